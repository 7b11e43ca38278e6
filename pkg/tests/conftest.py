from __future__ import annotations

from pathlib import Path

import pytest

from darkpita.catalog import load_seed_catalog
from darkpita.document import parse_html

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"

# Planted fixture page per site; every seed pattern appears on exactly one
# of these pages.
PLANTED_PAGES = {
    "amazon": [
        "amazon/product.html",
        "amazon/search.html",
        "amazon/pricing.html",
        "amazon/home.html",
    ],
    "youtube": ["youtube/home.html", "youtube/watch.html"],
    "netflix": ["netflix/home.html", "netflix/watch.html"],
    "twitter": ["twitter/home.html"],
    "facebook": ["facebook/feed.html"],
}

# Control pages scanned under the site their layout mimics.
CONTROL_PAGES = {
    "controls/amazon_product.html": "amazon",
    "controls/amazon_search.html": "amazon",
    "controls/amazon_pricing.html": "amazon",
    "controls/amazon_home.html": "amazon",
    "controls/youtube_home.html": "youtube",
    "controls/youtube_watch.html": "youtube",
    "controls/netflix_home.html": "netflix",
    "controls/netflix_watch.html": "netflix",
    "controls/twitter_home.html": "twitter",
    "controls/facebook_feed.html": "facebook",
    "controls/blog_example.html": "example.org",
}


@pytest.fixture(scope="session")
def seed_catalog():
    return load_seed_catalog()


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


def load_fixture(rel: str):
    path = FIXTURES / rel
    return parse_html(path.read_bytes(), str(path))


@pytest.fixture()
def amazon_product():
    return load_fixture("amazon/product.html")


@pytest.fixture()
def twitter_home():
    return load_fixture("twitter/home.html")
