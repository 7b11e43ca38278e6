// MV3 content scripts are not modules; load the real module entry instead.
const script = document.createElement("script");
script.type = "module";
script.src = chrome.runtime.getURL("dist/extension/content.js");
document.documentElement.appendChild(script);
