/**
 * DOM-side mirror of the engine's addressing scheme.
 *
 * The engine computes locator paths and splices against its parse of the
 * markup the panel sends (`container.innerHTML`), so both sides index the
 * same child lists (text and comment nodes included) as long as splices
 * are applied against the same serialization they were computed from.
 */

import type { WireSplice } from "./protocol.js";

export function nodeAtPath(root: ParentNode, path: number[]): Node {
  let node: Node = root as unknown as Node;
  for (const index of path) {
    const child = node.childNodes[index];
    if (!child) {
      throw new Error(`path [${path.join(",")}] leaves the document`);
    }
    node = child;
  }
  return node;
}

export function pathOfNode(root: ParentNode, node: Node): number[] {
  const path: number[] = [];
  let current: Node | null = node;
  while (current && current !== root) {
    const parent: Node | null = current.parentNode;
    if (!parent) {
      throw new Error("node is not inside the container");
    }
    path.unshift(Array.prototype.indexOf.call(parent.childNodes, current));
    current = parent;
  }
  return path;
}

function parseFragment(markup: string): Node[] {
  const template = document.createElement("template");
  template.innerHTML = markup;
  return Array.from(template.content.childNodes);
}

/** Replace `remove_count` children at `start` with the splice markup. */
export function applySplice(container: ParentNode, splice: WireSplice): void {
  const parent = nodeAtPath(container, splice.parent_path);
  for (let i = 0; i < splice.remove_count; i += 1) {
    const victim = parent.childNodes[splice.start];
    if (!victim) {
      throw new Error("splice range exceeds current children");
    }
    parent.removeChild(victim);
  }
  const anchor = parent.childNodes[splice.start] ?? null;
  for (const node of parseFragment(splice.markup)) {
    parent.insertBefore(node, anchor);
  }
}

/** Markup of the mounted page as the engine should see it. */
export function pageMarkup(container: Element): string {
  return container.innerHTML;
}

/** Mount a full fixture document's body content into a container. */
export function mountFixture(markup: string, container: Element): void {
  const bodyMatch = /<body[^>]*>([\s\S]*)<\/body>/i.exec(markup);
  container.innerHTML = bodyMatch ? bodyMatch[1]! : markup;
}

export function elementsWithMarker(container: Element, enhancementId?: string): Element[] {
  const selector = enhancementId
    ? `[data-pita-enhancement="${enhancementId}"]`
    : "[data-pita-enhancement]";
  return Array.from(container.querySelectorAll(selector));
}
