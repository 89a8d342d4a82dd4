#!/usr/bin/env python3
"""Generate the 30-page HTML corpus used by the pruning safety tests.

Deterministic (fixed seed) so the checked-in files are stable.  Pages vary in
size and shape: script/style-heavy, deeply nested, long-text articles, dense
forms, svg noise, sloppy markup, unicode content.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
OUT = REPO / "fixtures" / "prune_corpus"

WORDS = (
    "lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor "
    "incididunt ut labore et dolore magna aliqua ut enim ad minim veniam quis"
).split()
UNICODE_WORDS = ["café", "naïve", "Straße", "日本語", "δοκιμή", "тест", "emoji 🙂"]
LABELS = ("Submit", "Cancel", "Search", "Sign in", "Register", "Continue", "Back", "Next")


def words(rng: random.Random, n: int, unicode_mix: bool = False) -> str:
    pool = WORDS + (UNICODE_WORDS if unicode_mix else [])
    return " ".join(rng.choice(pool) for _ in range(n))


def an_input(rng: random.Random, i: int) -> str:
    kind = rng.choice(("text", "email", "password", "checkbox", "number"))
    return (
        f'<label for="f{i}">{rng.choice(LABELS)} {i}</label>'
        f'<input type="{kind}" id="f{i}" name="field_{i}" class="c{i % 5}">'
    )


def a_link(rng: random.Random, i: int) -> str:
    return f'<a href="/page/{i}" class="lnk{i % 7}">{rng.choice(LABELS)} link {i}</a>'


def big_script(rng: random.Random, lines: int) -> str:
    body = "\n".join(f"var v{i} = {rng.randint(0, 1 << 30)};" for i in range(lines))
    return f"<script>\n{body}\n</script>"


def nested_divs(rng: random.Random, depth: int, leaf: str) -> str:
    open_tags = "".join(f'<div class="lvl{d % 4}">' for d in range(depth))
    return open_tags + leaf + "</div>" * depth


def select_block(rng: random.Random, i: int, options: int) -> str:
    opts = "".join(f'<option value="o{j}">Choice {j}</option>' for j in range(options))
    return f'<select name="pick_{i}">{opts}</select>'


def make_page(rng: random.Random, index: int) -> str:
    flavor = index % 6
    parts = ["<!DOCTYPE html><html><head><meta charset='utf-8'>"]
    parts.append(f"<title>Corpus page {index}</title>")
    if flavor in (0, 3):
        parts.append(big_script(rng, rng.randint(2_000, 8_000)))
        parts.append("<style>" + " ".join(f".c{i}{{margin:{i}px}}" for i in range(600)) + "</style>")
    parts.append("</head><body>")
    parts.append(f"<!-- generated corpus page {index} -->")
    parts.append(f"<header id='top'><h1>{words(rng, 6)}</h1>{a_link(rng, 0)}</header>")

    if flavor == 0:  # script-heavy landing page with plenty of short copy
        for i in range(1, rng.randint(60, 120)):
            parts.append(f"<section><p>{words(rng, 16)}</p>{a_link(rng, i) if i < 8 else ''}</section>")
        parts.append(big_script(rng, rng.randint(3_000, 6_000)))
    elif flavor == 1:  # long article: many sub-clip-size paragraphs survive clipping
        for i in range(rng.randint(200, 400)):
            parts.append(f"<article><p>{words(rng, rng.randint(12, 17))}</p></article>")
            if rng.random() < 0.03:
                parts.append(a_link(rng, i + 10))
    elif flavor == 2:  # dense form amid heavy copy
        parts.append("<form id='big' action='/save' method='post'>")
        for i in range(rng.randint(10, 25)):
            parts.append(an_input(rng, i))
            if rng.random() < 0.2:
                parts.append(select_block(rng, i, rng.randint(2, 6)))
        parts.append("<textarea name='notes'>prefilled notes</textarea>")
        parts.append("<button type='submit'>Save</button></form>")
        for _ in range(rng.randint(80, 160)):
            parts.append(f"<p>{words(rng, 15)}</p>")
    elif flavor == 3:  # deep nesting + svg noise
        for i in range(rng.randint(20, 40)):
            leaf = a_link(rng, i + 20) if i < 6 else f"<b>{words(rng, 12)}</b>"
            parts.append(nested_divs(rng, rng.randint(10, 30), leaf))
        parts.append("<svg viewBox='0 0 100 100'>" + "<path d='M0 0h100v100z'/>" * 200 + "</svg>")
    elif flavor == 4:  # sloppy markup
        parts.append("<ul>" + "".join(f"<li>{words(rng, 8)}" for _ in range(200)))
        parts.append(f"<p>{words(rng, 60)}<div>unclosed paragraph</div>")
        parts.append("</wrong></ul>")
        parts.append(an_input(rng, 99))
        for _ in range(60):
            parts.append(f"<p>{words(rng, 14, unicode_mix=True)}</p>")
    else:  # mixed storefront
        for i in range(rng.randint(80, 160)):
            parts.append(
                "<div class='card'>"
                f"<p>{words(rng, rng.randint(10, 16), unicode_mix=True)}</p>"
                f"{a_link(rng, i + 40) if i < 10 else ''}"
                f"{an_input(rng, i + 40) if rng.random() < 0.05 else ''}"
                "</div>"
            )
        parts.append(big_script(rng, 1_500))

    parts.append(
        "<footer><form action='/subscribe'>"
        "<label for='sub'>Subscribe</label>"
        "<input type='email' id='sub' name='email'>"
        "<button type='submit'>Go</button></form></footer>"
    )
    parts.append("</body></html>")
    return "\n".join(parts)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(1207)
    total = 0
    for index in range(30):
        page = make_page(rng, index)
        path = OUT / f"page_{index:02d}.html"
        path.write_text(page, encoding="utf-8")
        total += len(page)
    print(f"wrote 30 pages, {total} chars total, to {OUT.relative_to(REPO)}")


if __name__ == "__main__":
    sys.exit(main())
