import numpy as np
import pytest

from p1normal.normal_form import P1, solve_normal_form

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def laurent_coeffs(p: complex, a6: complex, J: int = 80) -> np.ndarray:
    """Numeric Laurent coefficients of the P1 solution with a pole at p."""
    a = np.zeros(J + 1, dtype=complex)
    a[0] = 1
    for j in range(1, J + 1):
        if j == 6:
            a[j] = a6
            continue
        rhs = 6 * sum(a[i] * a[j - i] for i in range(1, j))
        rhs += p if j == 4 else (1 if j == 5 else 0)
        a[j] = rhs / ((j - 6) * (j + 1))
    return a


def laurent_eval(a: np.ndarray, z: complex) -> tuple[complex, complex]:
    j = np.arange(len(a))
    return complex(np.sum(a * z ** (j - 2))), complex(np.sum(a * (j - 2) * z ** (j - 3)))


@pytest.fixture(scope="session")
def nf8():
    return solve_normal_form(P1, 8, 4)


@pytest.fixture(scope="session")
def nf12():
    return solve_normal_form(P1, 12, 8)


@pytest.fixture(scope="session")
def nf_int():
    # the integrator's default series
    return solve_normal_form(P1, 12, 6)


@pytest.fixture
def record_acceptance():
    def rec(n: int, passed: bool, detail: str = ""):
        _ACCEPTANCE[n] = (bool(passed), detail)
        print(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

    return rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
