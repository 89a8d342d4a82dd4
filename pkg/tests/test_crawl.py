"""Snapshotting: fetch, file loading, pruning, and the snapshot store."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from conftest import FIXTURES
from e2egen.crawl import (
    EPOCH_TIMESTAMP,
    FetchError,
    IoError,
    NonHtmlContent,
    PageSnapshot,
    fetch,
    interactive_signature,
    load_snapshot,
    load_snapshot_from_file,
    prune,
    save_snapshot,
    snapshot_path,
)
from e2egen.dom import parse_html, serialize_html
from e2egen.xpath import evaluate, parse_xpath

HOME = (FIXTURES / "pages" / "home.html").read_text(encoding="utf-8")
LOGIN = (FIXTURES / "pages" / "login.html").read_text(encoding="utf-8")


class TestPrune:
    def test_scripts_styles_dropped_interactive_intact(self):
        big_script = "<script>" + "var x = 1;\n" * 100_000 + "</script>"
        html = f"<html><head>{big_script}<style>.a{{}}</style></head><body><a href='/go'>Go</a><svg><path d='m0 0'/></svg><!-- note --></body></html>"
        pruned = prune(html)
        assert "var x" not in pruned
        assert "<style" not in pruned
        assert "<svg" not in pruned
        assert "<!--" not in pruned
        assert '<a href="/go">Go</a>' in pruned

    def test_interactive_signature_preserved_on_fixture_pages(self):
        for raw in (HOME, LOGIN):
            assert interactive_signature(prune(raw)) == interactive_signature(raw)

    def test_signature_preserved_under_tight_budget(self):
        pruned = prune(HOME, budget=2_500)
        assert len(pruned) <= 2_500
        assert interactive_signature(pruned) == interactive_signature(HOME)

    def test_long_text_clipped_outside_interactive(self):
        long = "y" * 500
        html = f"<div><p>{long}</p><a href='/x'>{long}</a></div>"
        pruned = prune(html)
        assert "y" * 500 not in pruned.split("<a", 1)[0]
        assert "…" in pruned
        # anchors keep their full label; it is part of the locator surface
        assert f">{long}</a>" in pruned

    def test_small_page_is_just_reserialized_without_noise(self):
        html = "<div><script>x()</script><p>hi</p><a href='/a'>A</a></div>"
        expected = serialize_html(parse_html("<div><p>hi</p><a href='/a'>A</a></div>"))
        assert prune(html) == expected

    def test_positional_path_still_resolves_after_pruning(self):
        pruned = prune(HOME)
        dom = parse_html(pruned)
        expr = parse_xpath("//*[@id='header']/div[2]/div/div/div[2]/div[1]/ul/li[1]/a")
        nodes = evaluate(expr, dom)
        assert len(nodes) == 1
        assert nodes[0].text_content == "Signup / Login"

    def test_budget_is_always_respected(self):
        html = "<div>" + "<p>" + "z" * 90 + "</p>" * 1 + "<b>k</b>" * 3000 + "</div>"
        for budget in (500, 2_000, 10_000):
            assert len(prune(html, budget=budget)) <= budget

    def test_pruning_is_deterministic(self):
        assert prune(HOME, budget=3_000) == prune(HOME, budget=3_000)


class _PageHandler(BaseHTTPRequestHandler):
    def do_GET(self):
        if self.path == "/home":
            body = HOME.encode()
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
        elif self.path == "/pdf":
            body = b"%PDF-1.4 fake"
            self.send_response(200)
            self.send_header("Content-Type", "application/pdf")
        else:
            body = b"not here"
            self.send_response(404)
            self.send_header("Content-Type", "text/html")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def page_server():
    server = HTTPServer(("127.0.0.1", 0), _PageHandler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestFetch:
    def test_fetch_keeps_signup_anchor(self, page_server):
        snapshot = fetch(f"{page_server}/home")
        assert snapshot.http_status == 200
        assert snapshot.source == "live"
        assert "Signup / Login" in snapshot.pruned_html
        dom = parse_html(snapshot.pruned_html)
        assert evaluate(parse_xpath("//a[contains(text(), 'Signup / Login')]"), dom)

    def test_404_raises_fetch_error(self, page_server):
        with pytest.raises(FetchError) as err:
            fetch(f"{page_server}/missing")
        assert err.value.status == 404

    def test_non_html_content_rejected(self, page_server):
        with pytest.raises(NonHtmlContent):
            fetch(f"{page_server}/pdf")

    def test_relative_url_rejected(self):
        with pytest.raises(FetchError):
            fetch("not/a/url")


class TestFileSnapshots:
    def test_login_fixture(self):
        snapshot = load_snapshot_from_file(
            FIXTURES / "pages" / "login.html", "https://automationexercise.com/login"
        )
        assert snapshot.source == "file"
        assert snapshot.http_status == 200
        assert snapshot.fetched_at == EPOCH_TIMESTAMP
        dom = parse_html(snapshot.pruned_html)
        for xpath in (
            "//*[@id='form']//input[@name='email']",
            "//*[@id='form']//input[@name='password']",
            "//*[@id='form']//button[@type='submit']",
        ):
            assert len(evaluate(parse_xpath(xpath), dom)) == 1, xpath

    def test_empty_file_warns(self, tmp_path, caplog):
        empty = tmp_path / "empty.html"
        empty.write_text("")
        with caplog.at_level("WARNING"):
            snapshot = load_snapshot_from_file(empty, "https://x.example/")
        assert snapshot.pruned_html == ""
        assert any("empty" in r.message for r in caplog.records)

    def test_missing_file_raises_io_error(self, tmp_path):
        with pytest.raises(IoError):
            load_snapshot_from_file(tmp_path / "absent.html", "https://x.example/")


class TestStore:
    def test_round_trip_keyed_by_url_hash(self, tmp_path):
        snapshot = load_snapshot_from_file(
            FIXTURES / "pages" / "home.html", "http://automationexercise.com"
        )
        path = save_snapshot(snapshot, tmp_path)
        assert path == snapshot_path(tmp_path, "http://automationexercise.com")
        assert len(path.stem) == 64  # sha256 hex
        assert load_snapshot(tmp_path, "http://automationexercise.com") == snapshot

    def test_missing_snapshot_raises(self, tmp_path):
        with pytest.raises(IoError):
            load_snapshot(tmp_path, "https://never.example/")

    def test_store_file_is_valid_json(self, tmp_path):
        snapshot = PageSnapshot(
            url="https://x.example/",
            fetched_at=EPOCH_TIMESTAMP,
            http_status=200,
            raw_html="<p>x</p>",
            pruned_html="<p>x</p>",
            source="file",
        )
        path = save_snapshot(snapshot, tmp_path)
        data = json.loads(path.read_text())
        assert set(data) == {
            "url", "fetched_at", "http_status", "raw_html", "pruned_html", "source"
        }
