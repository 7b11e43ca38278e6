import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkpita.document import (
    DocumentError,
    Element,
    HtmlDocument,
    MalformedFragmentError,
    NodeLocator,
    StaleLocatorError,
    TextNode,
    locator_of,
    parse_fragment,
    parse_html,
    query,
    resolve,
    serialize,
    serialize_node,
    structural_equal,
)
from conftest import CONTROL_PAGES, FIXTURES, PLANTED_PAGES


def all_fixture_paths():
    pages = [rel for rels in PLANTED_PAGES.values() for rel in rels]
    pages.extend(CONTROL_PAGES)
    return sorted(set(pages))


# -- parsing -------------------------------------------------------------

def test_minimal_document():
    doc = parse_html("<html><body><p>hi</p></body></html>")
    html = doc.root.children[0]
    body = html.children[0]
    p = body.children[0]
    assert (html.tag, body.tag, p.tag) == ("html", "body", "p")
    assert isinstance(p.children[0], TextNode) and p.children[0].text == "hi"


def test_misnested_inline_repaired_inside_p():
    # Browser tree construction closes the open <b> when </p> arrives.
    doc = parse_html("<p><b>x</p>")
    p = doc.root.children[0]
    assert p.tag == "p"
    b = p.children[0]
    assert b.tag == "b"
    assert b.children[0].text == "x"
    assert any("</p>" in w for w in doc.warnings)


def test_empty_input_fails():
    with pytest.raises(DocumentError):
        parse_html("")
    with pytest.raises(DocumentError):
        parse_html(b"")


def test_lossy_decode_recorded():
    doc = parse_html(b"<p>caf\xff</p>")
    assert any("UTF-8" in w for w in doc.warnings)


def test_amazon_fixture_has_buy_now_id():
    doc = parse_html((FIXTURES / "amazon/product.html").read_bytes())
    ids = [el.attrs.get("id", "") for el in doc.iter_elements()]
    assert any("buy-now" in i for i in ids)


def test_implied_end_tags():
    doc = parse_html("<ul><li>a<li>b</ul>")
    ul = doc.root.children[0]
    assert [child.tag for child in ul.children] == ["li", "li"]


def test_script_content_is_opaque():
    markup = "<script>if (a &amp;&lt; b) { run(); }</script>"
    doc = parse_html(markup)
    script = doc.root.children[0]
    assert script.children[0].text == "if (a &amp;&lt; b) { run(); }"
    assert serialize(doc) == markup


def test_duplicate_attribute_dropped_with_warning():
    doc = parse_html('<div a="1" a="2">x</div>')
    div = doc.root.children[0]
    assert div.attrs["a"] == "1"
    assert any("duplicate" in w for w in doc.warnings)


# -- serialization -------------------------------------------------------

def test_quote_normalization():
    doc = parse_html("<div title='say \"hi\"' bare>t</div>")
    out = serialize(doc)
    assert out == '<div title="say &quot;hi&quot;" bare="">t</div>'
    again = parse_html(out)
    assert structural_equal(doc, again)


def test_void_elements():
    doc = parse_html('<p>a<br/>b<img src="x.png"></p>')
    assert serialize(doc) == '<p>a<br>b<img src="x.png"></p>'


def test_entity_round_trip():
    doc = parse_html("<p>a &amp; b &lt; c &gt; d</p>")
    out = serialize(doc)
    assert structural_equal(parse_html(out), doc)


@pytest.mark.parametrize("rel", all_fixture_paths())
def test_fixture_round_trip(rel):
    first = parse_html((FIXTURES / rel).read_bytes(), rel)
    second = parse_html(serialize(first), rel)
    assert structural_equal(first, second)
    # And the serialized form is a fixed point.
    assert serialize(second) == serialize(first)


def test_serialized_output_parses_without_repairs():
    first = parse_html((FIXTURES / "twitter/home.html").read_bytes())
    assert first.warnings  # fixture deliberately needs repair
    second = parse_html(serialize(first))
    assert second.warnings == ()


# -- locators --------------------------------------------------------------

def test_locator_identity(amazon_product):
    for element in amazon_product.iter_elements():
        locator = locator_of(amazon_product, element)
        assert resolve(amazon_product, locator) is element


def test_locator_never_resolves_to_text():
    doc = parse_html("<div>text<span>x</span></div>")
    bad = NodeLocator(path=(0, 0))  # the text node
    with pytest.raises(StaleLocatorError):
        resolve(doc, bad)


def test_fingerprint_survives_sibling_insertion():
    doc = parse_html('<body><div id="buy-now-button">buy</div></body>')
    target = doc.root.children[0].children[0]
    locator = locator_of(doc, target)
    assert locator.fingerprint == ("id", "buy-now-button")
    # Insert an unrelated sibling before the target: path goes stale.
    body = doc.root.children[0]
    body.insert_child(0, Element("aside", {"class": "noise"}))
    resolved = resolve(doc, locator)
    assert resolved.attrs["id"] == "buy-now-button"


def test_stale_path_without_fingerprint():
    doc = parse_html("<body><div>a</div><div>b</div><div>c</div></body>")
    with pytest.raises(StaleLocatorError) as info:
        resolve(doc, NodeLocator(path=(0, 99)))
    assert info.value.path_missed
    assert info.value.fingerprint_missed is None


def test_stale_path_with_missing_fingerprint_distinguished():
    doc = parse_html("<body><div>a</div></body>")
    with pytest.raises(StaleLocatorError) as info:
        resolve(doc, NodeLocator(path=(0, 99), fingerprint=("id", "ghost")))
    assert info.value.path_missed
    assert info.value.fingerprint_missed is True


def _random_tree(rng: random.Random) -> HtmlDocument:
    tags = ["div", "span", "section", "p", "ul", "li", "article"]
    root = Element("#document")
    body = Element("body")
    root.append_child(body)
    elements = [body]
    for i in range(rng.randint(1, 25)):
        parent = rng.choice(elements)
        el = Element(rng.choice(tags))
        if rng.random() < 0.4:
            el.attrs["id"] = f"node-{i}"
        if rng.random() < 0.3:
            el.attrs["class"] = rng.choice(["a", "b", "c d"])
        if rng.random() < 0.5:
            el.append_child(TextNode(f"t{i}"))
        parent.append_child(el)
        elements.append(el)
    return HtmlDocument(root)


def test_locator_stability_on_random_trees():
    rng = random.Random(20260809)
    for _ in range(1000):
        doc = _random_tree(rng)
        elements = list(doc.iter_elements())
        target = rng.choice(elements)
        assert resolve(doc, locator_of(doc, target)) is target


# -- query ------------------------------------------------------------------

def test_query_document_order_and_empty():
    doc = parse_html("<body><div>a</div><section><div>b</div></section></body>")
    locs = query(doc, "div")
    assert len(locs) == 2
    assert locs[0].path < locs[1].path
    assert query(doc, "#no-such") == []


def test_query_netflix_fixture_data_uia():
    doc = parse_html((FIXTURES / "netflix/home.html").read_bytes())
    locs = query(doc, "[data-uia]")
    values = [resolve(doc, loc).attrs["data-uia"] for loc in locs]
    assert "billboard-motion" in values


# -- fragments ----------------------------------------------------------------

def test_fragment_well_formed():
    nodes = parse_fragment('<span class="pita-label">Ad</span>')
    assert len(nodes) == 1
    assert serialize_node(nodes[0]) == '<span class="pita-label">Ad</span>'


@pytest.mark.parametrize("bad", ["", "   ", "<div><p>unclosed", "</div>", "<b>x</p>"])
def test_fragment_rejects_malformed(bad):
    with pytest.raises(MalformedFragmentError):
        parse_fragment(bad)


@settings(max_examples=60)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80))
def test_text_content_round_trips(text):
    if not text:
        return
    doc = HtmlDocument(Element("#document"))
    div = Element("div")
    div.append_child(TextNode(text))
    doc.root.append_child(div)
    reparsed = parse_html(serialize(doc))
    assert structural_equal(reparsed, doc)
