"""Specification schema: parsing, serialization, boundary validation."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES, LOGIN_SCENARIO
from e2egen.model import (
    STEP_MISMATCH,
    TRANSITION_NOT_FINAL,
    UNKNOWN_URL,
    BoundaryViolationError,
    ExecutionStep,
    PageModule,
    SchemaError,
    TestScenario,
    TestSpecification,
    normalize_step,
    parse_scenario_text,
    parse_specification,
    scenario_to_text,
    serialize_specification,
    slugify,
    spec_to_obj,
    validate_boundaries,
)

LEVEL1_TEXT = (FIXTURES / "golden" / "level1.spec.json").read_text(encoding="utf-8")


class TestParse:
    def test_login_case_shape(self):
        spec = parse_specification(LEVEL1_TEXT)
        assert spec.test_case == "Login User with incorrect email and password"
        assert len(spec.modules) == 2
        assert [len(m.execution_steps) for m in spec.modules] == [2, 3]
        assert spec.is_level1()
        assert spec.modules[1].purpose == "Login page for users to enter their credentials"

    def test_empty_modules_rejected(self):
        with pytest.raises(SchemaError) as err:
            parse_specification('{"testCase":"t","modules":[]}')
        assert "modules must be non-empty" in str(err.value)
        assert err.value.path == "$.modules"

    def test_refined_module_has_one_element(self):
        spec = parse_specification(
            (FIXTURES / "golden" / "refined.spec.json").read_text(encoding="utf-8")
        )
        signup_step = spec.modules[0].execution_steps[1]
        assert len(signup_step.extracted_data) == 1
        element = signup_step.extracted_data[0]
        assert element.identifier_tracking == "//a[contains(text(), 'Signup / Login')]"
        assert element.element_type == "button"
        assert element.step_ref == "Click on 'Signup / Login' button"

    def test_missing_field_names_its_path(self):
        obj = json.loads(LEVEL1_TEXT)
        del obj["modules"][1]["execution_steps"][0]["step"]
        with pytest.raises(SchemaError) as err:
            parse_specification(json.dumps(obj))
        assert err.value.path == "$.modules[1].execution_steps[0].step"

    def test_every_required_field_is_enforced(self):
        # deleting any required key anywhere must yield a SchemaError naming it
        base = json.loads(
            (FIXTURES / "golden" / "refined.spec.json").read_text(encoding="utf-8")
        )

        def deletion_points(obj, prefix=()):
            if isinstance(obj, dict):
                for key, value in obj.items():
                    yield prefix, key
                    yield from deletion_points(value, prefix + (key,))
            elif isinstance(obj, list):
                for i, item in enumerate(obj):
                    yield from deletion_points(item, prefix + (i,))

        points = list(deletion_points(base))
        assert len(points) > 10
        for path, key in points:
            mutated = json.loads(json.dumps(base))
            container = mutated
            for part in path:
                container = container[part]
            del container[key]
            with pytest.raises(SchemaError) as err:
                parse_specification(json.dumps(mutated))
            assert key in err.value.path, f"deleting {path + (key,)}"

    def test_bad_url_rejected(self):
        obj = json.loads(LEVEL1_TEXT)
        obj["modules"][0]["url"] = "not-a-url"
        with pytest.raises(SchemaError) as err:
            parse_specification(json.dumps(obj))
        assert err.value.path == "$.modules[0].url"

    def test_invalid_xpath_rejected(self):
        obj = json.loads(LEVEL1_TEXT)
        obj["modules"][0]["execution_steps"][0]["extracted_data"] = [
            {
                "type": "button",
                "request_description": "x",
                "identifier_type": "XPath",
                "identifier_tracking": "//a[last()]",
            }
        ]
        with pytest.raises(SchemaError) as err:
            parse_specification(json.dumps(obj))
        assert "identifier_tracking" in err.value.path

    def test_unknown_element_type_maps_to_other(self):
        obj = json.loads(LEVEL1_TEXT)
        obj["modules"][0]["execution_steps"][0]["extracted_data"] = [
            {
                "type": "hyperlink-ish",
                "request_description": "x",
                "identifier_type": "XPath",
                "identifier_tracking": "//a",
            }
        ]
        spec = parse_specification(json.dumps(obj))
        element = spec.modules[0].execution_steps[0].extracted_data[0]
        assert element.element_type == "other"
        assert element.type_text == "hyperlink-ish"
        # original text survives a round-trip
        again = parse_specification(serialize_specification(spec))
        assert again.modules[0].execution_steps[0].extracted_data[0].type_text == "hyperlink-ish"

    def test_transition_mid_module_rejected_at_parse(self):
        obj = json.loads(LEVEL1_TEXT)
        steps = obj["modules"][0]["execution_steps"]
        steps.insert(
            1,
            {"step": "Go to 'https://automationexercise.com/login' now", "extracted_data": []},
        )
        with pytest.raises(BoundaryViolationError):
            parse_specification(json.dumps(obj))

    def test_navigation_to_own_url_is_not_a_transition(self):
        # the home module's first step names the home URL and is not final
        parse_specification(LEVEL1_TEXT)

    def test_malformed_json(self):
        with pytest.raises(SchemaError) as err:
            parse_specification("{nope")
        assert err.value.path == "$"


class TestSerialize:
    def test_round_trip_identity(self):
        spec = parse_specification(LEVEL1_TEXT)
        assert parse_specification(serialize_specification(spec)) == spec

    def test_key_order_starts_with_test_case(self):
        spec = parse_specification(LEVEL1_TEXT)
        text = serialize_specification(spec)
        assert text.lstrip().startswith('{\n  "testCase":')
        obj = json.loads(text)
        assert list(obj) == ["testCase", "modules"]
        assert list(obj["modules"][0]) == ["url", "purpose", "execution_steps"]

    def test_unknown_fields_survive_round_trip(self):
        obj = json.loads(LEVEL1_TEXT)
        obj["modules"][0]["custom"] = {"a": 1}
        obj["vendor"] = "x"
        spec = parse_specification(json.dumps(obj))
        again = json.loads(serialize_specification(spec))
        assert again["modules"][0]["custom"] == {"a": 1}
        assert again["vendor"] == "x"

    def test_two_space_indent(self):
        text = serialize_specification(parse_specification(LEVEL1_TEXT))
        assert '\n  "modules"' in text


def _mutate(spec: TestSpecification, **kwargs) -> TestSpecification:
    obj = spec_to_obj(spec)
    return parse_specification(json.dumps({**obj, **kwargs}))


class TestBoundaries:
    def test_clean_pair_has_no_violations(self, level1_spec):
        assert validate_boundaries(level1_spec, LOGIN_SCENARIO) == []

    def test_error_step_moved_into_first_module(self, level1_spec):
        obj = spec_to_obj(level1_spec)
        moved = obj["modules"][1]["execution_steps"].pop(2)
        obj["modules"][0]["execution_steps"].append(moved)
        spec = parse_specification(json.dumps(obj))
        violations = validate_boundaries(spec, LOGIN_SCENARIO)
        assert violations
        assert violations[0].kind == STEP_MISMATCH
        assert violations[0].module_index == 0

    def test_unknown_url(self, level1_spec):
        obj = spec_to_obj(level1_spec)
        obj["modules"][1]["url"] = "https://elsewhere.example.com/login"
        spec = parse_specification(json.dumps(obj))
        kinds = [v.kind for v in validate_boundaries(spec, LOGIN_SCENARIO)]
        assert UNKNOWN_URL in kinds

    def test_deleted_step_detected(self, level1_spec):
        obj = spec_to_obj(level1_spec)
        del obj["modules"][1]["execution_steps"][1]
        spec = parse_specification(json.dumps(obj))
        kinds = [v.kind for v in validate_boundaries(spec, LOGIN_SCENARIO)]
        assert kinds == [STEP_MISMATCH]

    def test_validation_is_idempotent(self, level1_spec):
        assert validate_boundaries(level1_spec, LOGIN_SCENARIO) == []
        assert validate_boundaries(level1_spec, LOGIN_SCENARIO) == []

    def test_quote_style_and_whitespace_insensitive(self, level1_spec):
        fancy = TestScenario(
            title=LOGIN_SCENARIO.title,
            urls=LOGIN_SCENARIO.urls,
            steps=tuple(
                s.replace("'", "’").replace(" ", "  ") for s in LOGIN_SCENARIO.steps
            ),
        )
        assert validate_boundaries(level1_spec, fancy) == []

    def test_transition_not_final_kind(self, level1_spec):
        module0 = level1_spec.modules[0]
        silent = PageModule(
            url=module0.url,
            purpose=module0.purpose,
            execution_steps=(
                ExecutionStep(step="Open 'https://automationexercise.com/login' first"),
                module0.execution_steps[0],
            ),
        )
        spec = TestSpecification(
            test_case=level1_spec.test_case, modules=(silent, *level1_spec.modules[1:])
        )
        kinds = {v.kind for v in validate_boundaries(spec, LOGIN_SCENARIO)}
        assert TRANSITION_NOT_FINAL in kinds


class TestScenarioText:
    def test_fixture_file_parses(self):
        scenario = parse_scenario_text(
            (FIXTURES / "scenarios" / "login_incorrect.txt").read_text(encoding="utf-8")
        )
        assert scenario == LOGIN_SCENARIO

    def test_title_before_urls_accepted(self):
        text = "My Case\nurls = [\"http://x.example\"]\n1. do a thing\n"
        scenario = parse_scenario_text(text)
        assert scenario.title == "My Case"
        assert scenario.steps == ("do a thing",)

    def test_round_trip_through_text(self):
        assert parse_scenario_text(scenario_to_text(LOGIN_SCENARIO)) == LOGIN_SCENARIO

    def test_missing_urls_line(self):
        from e2egen.model import ScenarioFormatError

        with pytest.raises(ScenarioFormatError):
            parse_scenario_text("Title only\n1. step\n")


def test_normalize_step():
    assert normalize_step("Click  ‘login’   button ") == "Click 'login' button"


def test_slugify():
    assert slugify("Login User with incorrect email and password") == (
        "login-user-with-incorrect-email-and-password"
    )
    assert slugify("  ***  ") == "case"


def test_scenario_invariants():
    with pytest.raises(SchemaError):
        TestScenario(title="t", urls=(), steps=("s",))
    with pytest.raises(SchemaError):
        TestScenario(title="t", urls=("ftp://x",), steps=("s",))
    with pytest.raises(SchemaError):
        TestScenario(title="t", urls=("http://x.example",), steps=("  ",))


_step_texts = st.text(
    alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters=" '"),
    min_size=1,
).filter(lambda s: s.strip())


@given(
    st.lists(_step_texts, min_size=1, max_size=8),
    st.integers(min_value=1, max_value=4),
)
def test_round_trip_on_generated_specs(steps, n_modules):
    # distribute steps over n_modules (never leaving a module empty)
    n_modules = min(n_modules, len(steps))
    chunks = [steps[i::n_modules] for i in range(n_modules)]
    spec = TestSpecification(
        test_case="generated",
        modules=tuple(
            PageModule(
                url=f"https://example.test/page{i}",
                purpose=f"page {i}",
                execution_steps=tuple(ExecutionStep(step=s) for s in chunk),
            )
            for i, chunk in enumerate(chunks)
        ),
    )
    assert parse_specification(serialize_specification(spec)) == spec
