import numpy as np
import pytest
from hypothesis import settings

from constructor_kit import FIXTURES, Attribute, Substrate, fixture_path, load_model

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

INV_SQRT2 = 1 / np.sqrt(2)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def random_ray(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def ray_at_overlap(c: float) -> np.ndarray:
    """A qubit ray with |<0|v>| = c."""
    return np.array([c, np.sqrt(max(0.0, 1 - c * c))], dtype=complex)


@pytest.fixture(scope="session")
def models():
    return {name: load_model(fixture_path(name)) for name in FIXTURES}


@pytest.fixture(scope="session")
def qubit_model(models):
    return models["qubit_zx"]


@pytest.fixture
def q():
    return Substrate.quantum("q", 2)


@pytest.fixture
def zero(q):
    return Attribute.rays(q, [KET0], label="0")


@pytest.fixture
def one(q):
    return Attribute.rays(q, [KET1], label="1")


@pytest.fixture
def plus(q):
    return Attribute.rays(q, [PLUS], label="+")


@pytest.fixture
def minus(q):
    return Attribute.rays(q, [MINUS], label="-")


# acceptance gate: one line per criterion, filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}")
