"""Level 1: LLM-backed modularization and the deterministic baseline splitter."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CASE_ID, FIXTURES, LOGIN_SCENARIO
from e2egen.config import PipelineConfig
from e2egen.gateway import (
    LEVEL_MODULARIZE,
    MODE_REPLAY,
    Transcript,
    fingerprint_request,
    load_templates,
    load_transcript,
)
from e2egen.model import BoundaryViolationError, TestScenario, validate_boundaries
from e2egen.modularize import (
    LlmOutputInvalid,
    baseline_modularize,
    build_modularize_request,
    modularize,
)

CONFIG = PipelineConfig()
TEMPLATES = load_templates()


def _transcript_for(scenario, response: str) -> Transcript:
    request = build_modularize_request(scenario, TEMPLATES[LEVEL_MODULARIZE], CONFIG)
    return Transcript(mode=MODE_REPLAY, entries=[(fingerprint_request(request), response)])


class TestModularize:
    def test_replay_produces_two_modules(self, level1_spec):
        transcript = load_transcript(
            FIXTURES / "transcripts" / f"{CASE_ID}.modularize.transcript.json", MODE_REPLAY
        )
        spec = modularize(LOGIN_SCENARIO, TEMPLATES[LEVEL_MODULARIZE], transcript, CONFIG)
        assert spec == level1_spec
        assert spec.is_level1()

    def test_prefilled_extracted_data_rejected(self, level1_spec):
        from e2egen.model import spec_to_obj

        obj = spec_to_obj(level1_spec)
        obj["modules"][0]["execution_steps"][1]["extracted_data"] = [
            {
                "type": "button",
                "request_description": "x",
                "identifier_type": "XPath",
                "identifier_tracking": "//a",
            }
        ]
        transcript = _transcript_for(LOGIN_SCENARIO, json.dumps(obj))
        with pytest.raises(LlmOutputInvalid) as err:
            modularize(LOGIN_SCENARIO, TEMPLATES[LEVEL_MODULARIZE], transcript, CONFIG)
        assert "extracted_data must be empty at Level 1" in str(err.value)

    def test_prose_response_rejected_with_raw_retained(self):
        transcript = _transcript_for(LOGIN_SCENARIO, "I could not find any pages, sorry.")
        with pytest.raises(LlmOutputInvalid) as err:
            modularize(LOGIN_SCENARIO, TEMPLATES[LEVEL_MODULARIZE], transcript, CONFIG)
        assert err.value.raw_response == "I could not find any pages, sorry."

    def test_boundary_violations_surface(self, level1_spec):
        from e2egen.model import spec_to_obj

        obj = spec_to_obj(level1_spec)
        moved = obj["modules"][1]["execution_steps"].pop(2)
        obj["modules"][0]["execution_steps"].append(moved)
        transcript = _transcript_for(LOGIN_SCENARIO, json.dumps(obj))
        with pytest.raises(BoundaryViolationError) as err:
            modularize(LOGIN_SCENARIO, TEMPLATES[LEVEL_MODULARIZE], transcript, CONFIG)
        assert err.value.violations


class TestBaseline:
    def test_single_url_no_phrases_is_one_module(self):
        scenario = TestScenario(
            title="One page",
            urls=("https://shop.example/checkout",),
            steps=("Fill the name field", "Fill the address field", "Press submit"),
        )
        spec = baseline_modularize(scenario)
        assert len(spec.modules) == 1
        assert spec.modules[0].steps == scenario.steps
        assert spec.modules[0].purpose == "auto"

    def test_login_scenario_matches_published_partition(self, level1_spec):
        spec = baseline_modularize(LOGIN_SCENARIO)
        assert [m.url for m in spec.modules] == [m.url for m in level1_spec.modules]
        assert [m.steps for m in spec.modules] == [m.steps for m in level1_spec.modules]
        assert validate_boundaries(spec, LOGIN_SCENARIO) == []

    def test_more_navigation_phrases_than_urls_reuses_last(self, caplog):
        scenario = TestScenario(
            title="Wandering",
            urls=("https://a.example/",),
            steps=(
                "navigate to the start page",
                "navigate to the second page",
                "navigate to the third page",
            ),
        )
        with caplog.at_level("WARNING"):
            spec = baseline_modularize(scenario)
        assert len(spec.modules) == 3
        assert {m.url for m in spec.modules} == {"https://a.example/"}
        assert any("reused" in r.message for r in caplog.records)

    def test_custom_phrase_list(self):
        scenario = TestScenario(
            title="Custom",
            urls=("https://a.example/", "https://a.example/next"),
            steps=("open the first page", "proceed to checkout", "pay"),
        )
        spec = baseline_modularize(scenario, nav_phrases=("proceed to",))
        assert [len(m.execution_steps) for m in spec.modules] == [1, 2]


_word = st.text(alphabet="abcdefgh", min_size=3, max_size=8)


@given(
    st.lists(_word, min_size=1, max_size=10),
    st.integers(min_value=1, max_value=3),
    st.randoms(use_true_random=False),
)
def test_baseline_conserves_steps_in_order(words, n_urls, rng):
    urls = tuple(f"https://site.example/sec{i}/page{i}" for i in range(n_urls))
    steps = []
    for i, w in enumerate(words):
        if rng.random() < 0.3:
            steps.append(f"navigate to area then inspect {w}")
        else:
            steps.append(f"click the {w} widget")
    scenario = TestScenario(title="Generated", urls=urls, steps=tuple(steps))
    spec = baseline_modularize(scenario)
    assert spec.all_steps == scenario.steps
    assert all(m.url in urls for m in spec.modules)
    assert validate_boundaries(spec, scenario) == []
