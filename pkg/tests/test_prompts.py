"""Template store, rendering, and ICL block formatting."""

from __future__ import annotations

import json

import pytest

from negotia.core import Speaker, Turn
from negotia.prompts import (
    TEMPLATE_IDS,
    WILDCARDS,
    TemplateError,
    TemplateStore,
    format_icl_block,
    render,
    render_conversation,
)

from conftest import make_exemplar


def test_store_loads_every_template(templates):
    for tid in TEMPLATE_IDS:
        t = templates.get(tid)
        assert t.id == tid
        assert t.segments


def test_store_unknown_id(templates):
    with pytest.raises(TemplateError, match="unknown template id"):
        templates.get("nonexistent")


def test_store_missing_file(tmp_path):
    with pytest.raises(TemplateError, match="missing template file"):
        TemplateStore(tmp_path)


def test_store_alternate_directory(tmp_path, templates):
    for tid in TEMPLATE_IDS:
        t = templates.get(tid)
        (tmp_path / f"{tid}.json").write_text(
            json.dumps({"id": tid, "segments": list(t.segments)}), encoding="utf-8"
        )
    other = TemplateStore(tmp_path)
    assert other.get("buyer").segments == templates.get("buyer").segments


def test_render_rejects_missing_bindings(templates):
    with pytest.raises(TemplateError, match="missing bindings"):
        render(templates.get("remediator"), {"$CONVERSATION": "x"})


def test_render_leaves_no_wildcards(templates):
    bindings = {
        "$ICL-Examples": "none",
        "$CONVERSATION": "buyer: hello",
        "$LAST_SENTENCE": "Take it or leave it!",
        "SELLER_INIT_PRICE": "$50",
        "COST_PRICE": "$35",
        "BUYER_INIT_PRICE": "$30",
    }
    for tid in TEMPLATE_IDS:
        msgs = render(templates.get(tid), bindings)
        for m in msgs:
            assert m["role"] in ("system", "user", "assistant")
            for w in WILDCARDS:
                assert w not in m["content"], (tid, w)


def test_seller_opener_price_binding(templates):
    msgs = render(
        templates.get("seller_normal"),
        {
            "$CONVERSATION": "buyer: hello",
            "SELLER_INIT_PRICE": "$50",
            "COST_PRICE": "$35",
        },
    )
    assert any("$50" in m["content"] for m in msgs)


def test_render_conversation():
    turns = (
        Turn(speaker=Speaker.BUYER, text="hello"),
        Turn(speaker=Speaker.SELLER, text="hi there"),
    )
    assert render_conversation(turns) == "buyer: hello\nseller: hi there"


def test_format_icl_block_structure():
    e1 = make_exemplar("a", 0.9)
    e2 = make_exemplar("b", 0.1)
    block = format_icl_block((e1, e2))
    chunks = block.split("\n\n")
    assert len(chunks) == 2
    for chunk, e in zip(chunks, (e1, e2)):
        lines = chunk.splitlines()
        assert lines[0] == "# Dialogue:"
        assert lines[-3].endswith("[violation]")
        assert lines[-3].startswith("seller: ")
        assert lines[-2] == "# Remediation:"
        assert lines[-1] == e.remediation_text


def test_format_icl_block_includes_rationale():
    from dataclasses import replace

    e = replace(make_exemplar("a", 0.9), rationale="keeps the tone respectful")
    assert format_icl_block((e,)).splitlines()[-1] == "keeps the tone respectful"


def test_format_icl_block_empty():
    assert format_icl_block(()) == ""
