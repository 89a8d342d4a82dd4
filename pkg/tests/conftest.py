"""Shared paths and fixtures for the test suite."""

from __future__ import annotations

from pathlib import Path

import pytest

from e2egen.model import TestScenario, parse_specification

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"

CASE_ID = "login-user-with-incorrect-email-and-password"

LOGIN_SCENARIO = TestScenario(
    title="Login User with incorrect email and password",
    urls=(
        "http://automationexercise.com",
        "https://automationexercise.com/login",
    ),
    steps=(
        "Launch browser and navigate to url 'http://automationexercise.com'",
        "Click on 'Signup / Login' button",
        "Enter incorrect email address and password",
        "Click 'login' button",
        "Verify error 'Your email or password is incorrect!' is visible",
    ),
)


@pytest.fixture
def login_scenario() -> TestScenario:
    return LOGIN_SCENARIO


@pytest.fixture
def level1_spec():
    return parse_specification(
        (FIXTURES / "golden" / "level1.spec.json").read_text(encoding="utf-8")
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
