#!/usr/bin/env python3
"""Regenerate the replay fixtures for the demo login scenario.

Builds the snapshot store from fixtures/pages/, then writes one transcript per
stage whose fingerprints are computed with the same request builders the
pipeline uses.  Run from the repository root after changing templates, the
fixture pages, or the canned stage responses:

    python tools/regen_fixtures.py
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from e2egen.config import PipelineConfig
from e2egen.crawl import load_snapshot_from_file, save_snapshot
from e2egen.extract import build_extract_request, build_refine_request, dedup_elements
from e2egen.gateway import (
    LEVEL_EXTRACT,
    LEVEL_GENERATE,
    LEVEL_MODULARIZE,
    LEVEL_REFINE,
    fingerprint_request,
    load_templates,
)
from e2egen.model import (
    ExecutionStep,
    UiElementRef,
    parse_scenario_text,
    parse_specification,
    serialize_module,
    serialize_specification,
    slugify,
)
from e2egen.modularize import build_modularize_request
from e2egen.robot import build_generate_request

FIXTURES = REPO / "fixtures"

HOME_URL = "http://automationexercise.com"
LOGIN_URL = "https://automationexercise.com/login"

MODULARIZE_RESPONSE = """\
{
  "testCase": "Login User with incorrect email and password",
  "modules": [
    {
      "url": "http://automationexercise.com",
      "purpose": "Home page of the application",
      "execution_steps": [
        {
          "step": "Launch browser and navigate to url 'http://automationexercise.com'",
          "extracted_data": []
        },
        {
          "step": "Click on 'Signup / Login' button",
          "extracted_data": []
        }
      ]
    },
    {
      "url": "https://automationexercise.com/login",
      "purpose": "Login page for users to enter their credentials",
      "execution_steps": [
        {
          "step": "Enter incorrect email address and password",
          "extracted_data": []
        },
        {
          "step": "Click 'login' button",
          "extracted_data": []
        },
        {
          "step": "Verify error 'Your email or password is incorrect!' is visible",
          "extracted_data": []
        }
      ]
    }
  ]
}
"""

SIGNUP_TEXT_XPATH = "//a[contains(text(), 'Signup / Login')]"
SIGNUP_POSITIONAL_XPATH = "//*[@id='header']/div[2]/div/div/div[2]/div[1]/ul/li[1]/a"

ROBOT_SCRIPT = """\
*** Settings ***
Library           SeleniumLibrary

*** Variables ***
${URL}            http://automationexercise.com
${LOGIN_URL}     https://automationexercise.com/login
${INCORRECT_EMAIL}    test@example.com
${INCORRECT_PASSWORD}     wrongpassword

*** Test Cases ***
Login User with Incorrect Email and Password
    Open Browser    ${URL}    chrome
    Maximize Browser Window
    Click Element    //a[contains(text(), 'Signup / Login')]
    Input Text    //*[@id='form']//input[@name='email']    ${INCORRECT_EMAIL}
    Input Text    //*[@id='form']//input[@name='password']    ${INCORRECT_PASSWORD}
    Click Button    //*[@id='form']//button[@type='submit']
    Element Should Be Visible    //div[contains(text(), 'Your email or password is incorrect!')]
    Close Browser
"""


def element(el_type: str, description: str, xpath: str) -> UiElementRef:
    return UiElementRef(
        element_type=el_type,
        request_description=description,
        identifier_type="XPath",
        identifier_tracking=xpath,
        type_text=el_type,
    )


def with_elements(step: ExecutionStep, elements: list[UiElementRef]) -> ExecutionStep:
    return replace(step, extracted_data=tuple(elements))


def write_transcript(path: Path, entries: list[tuple[str, str]]) -> None:
    payload = [{"fingerprint": fp, "response": resp} for fp, resp in entries]
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(REPO)} ({len(entries)} entries)")


def stage_entries(spec_l1, snapshots, templates, config):
    """(extract, refine, generate) transcript entries for one Level-1 spec.

    Returns the final refined spec as well, so golden artifacts stay in sync
    with what the pipeline reproduces.
    """
    home_module, login_module = spec_l1.modules
    home, login = snapshots
    extracted_home = replace(
        home_module,
        execution_steps=(
            home_module.execution_steps[0],
            with_elements(
                home_module.execution_steps[1],
                [
                    element("button", "Button to navigate to the Signup / Login page",
                            SIGNUP_TEXT_XPATH),
                    element("button", "Button to navigate to the Signup / Login page",
                            SIGNUP_POSITIONAL_XPATH),
                ],
            ),
        ),
    )
    extracted_login = replace(
        login_module,
        execution_steps=(
            with_elements(
                login_module.execution_steps[0],
                [
                    element("input", "Field to enter the email address",
                            "//*[@id='form']//input[@name='email']"),
                    element("input", "Field to enter the password",
                            "//*[@id='form']//input[@name='password']"),
                ],
            ),
            with_elements(
                login_module.execution_steps[1],
                [element("button", "Button to submit the login form",
                         "//*[@id='form']//button[@type='submit']")],
            ),
            with_elements(
                login_module.execution_steps[2],
                [element("text", "Error message shown for incorrect credentials",
                         "//div[contains(text(), 'Your email or password is incorrect!')]")],
            ),
        ),
    )
    extract_entries = []
    for module, snapshot, extracted in (
        (home_module, home, extracted_home),
        (login_module, login, extracted_login),
    ):
        req = build_extract_request(module, snapshot, templates[LEVEL_EXTRACT], config)
        extract_entries.append((fingerprint_request(req), serialize_module(extracted)))

    # refinement keeps the text-anchored locator only
    refined_home = replace(
        extracted_home,
        execution_steps=(
            extracted_home.execution_steps[0],
            with_elements(
                extracted_home.execution_steps[1],
                [element("button", "Button to navigate to the Signup / Login page",
                         SIGNUP_TEXT_XPATH)],
            ),
        ),
    )
    refined_login = extracted_login
    refine_entries = []
    for extracted, snapshot, refined in (
        (extracted_home, home, refined_home),
        (extracted_login, login, refined_login),
    ):
        req = build_refine_request(extracted, snapshot, templates[LEVEL_REFINE], config)
        refine_entries.append((fingerprint_request(req), serialize_module(refined)))

    final_spec = replace(
        spec_l1,
        modules=(dedup_elements(refined_home), dedup_elements(refined_login)),
    )
    req = build_generate_request(final_spec, templates[LEVEL_GENERATE], config)
    generate_entries = [(fingerprint_request(req), f"```robot\n{ROBOT_SCRIPT}```\n")]
    return extract_entries, refine_entries, generate_entries, final_spec


def main() -> None:
    from e2egen.modularize import baseline_modularize

    config = PipelineConfig()
    templates = load_templates()

    scenario = parse_scenario_text(
        (FIXTURES / "scenarios" / "login_incorrect.txt").read_text(encoding="utf-8")
    )
    case_id = slugify(scenario.title)

    snapshot_dir = FIXTURES / "snapshots"
    snapshot_dir.mkdir(parents=True, exist_ok=True)
    home = load_snapshot_from_file(FIXTURES / "pages" / "home.html", HOME_URL,
                                   budget=config.prune_budget)
    login = load_snapshot_from_file(FIXTURES / "pages" / "login.html", LOGIN_URL,
                                    budget=config.prune_budget)
    save_snapshot(home, snapshot_dir)
    save_snapshot(login, snapshot_dir)
    print(f"wrote {len(list(snapshot_dir.glob('*.json')))} snapshots")

    transcript_dir = FIXTURES / "transcripts"
    transcript_dir.mkdir(parents=True, exist_ok=True)

    # Level 1
    spec_l1 = parse_specification(MODULARIZE_RESPONSE)
    req = build_modularize_request(scenario, templates[LEVEL_MODULARIZE], config)
    write_transcript(
        transcript_dir / f"{case_id}.modularize.transcript.json",
        [(fingerprint_request(req), MODULARIZE_RESPONSE)],
    )

    # Levels 2 and 3, both for the modularize response above and for the
    # --baseline-modularizer variant (its module purposes differ, so the
    # downstream prompts have distinct fingerprints).
    extract_entries, refine_entries, generate_entries, final_spec = stage_entries(
        spec_l1, (home, login), templates, config
    )
    baseline_extract, baseline_refine, baseline_generate, _ = stage_entries(
        baseline_modularize(scenario), (home, login), templates, config
    )
    write_transcript(
        transcript_dir / f"{case_id}.extract.transcript.json",
        extract_entries + baseline_extract,
    )
    write_transcript(
        transcript_dir / f"{case_id}.refine.transcript.json",
        refine_entries + baseline_refine,
    )
    write_transcript(
        transcript_dir / f"{case_id}.generate.transcript.json",
        generate_entries + baseline_generate,
    )

    golden_dir = FIXTURES / "golden"
    golden_dir.mkdir(parents=True, exist_ok=True)
    (golden_dir / "level1.spec.json").write_text(
        serialize_specification(spec_l1), encoding="utf-8"
    )
    (golden_dir / "refined.spec.json").write_text(
        serialize_specification(final_spec), encoding="utf-8"
    )
    (golden_dir / "expected.robot").write_text(ROBOT_SCRIPT, encoding="utf-8")
    print("wrote golden artifacts")


if __name__ == "__main__":
    main()
