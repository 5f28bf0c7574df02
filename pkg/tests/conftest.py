import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def planted_two_maps(rng, n=200, d1=2, d2=2, noise=0.05, intercept_shift=0.0):
    """Rows split between two random linear maps X -> Y; returns X, Y, true labels."""
    X = rng.standard_normal((n, d1))
    A = rng.standard_normal((2, d1, d2)) * 2
    labels = rng.integers(0, 2, size=n)
    Y = np.einsum("ni,nij->nj", X, A[labels]) + noise * rng.standard_normal((n, d2))
    Y += intercept_shift * labels[:, None]
    return X, Y, labels


_criteria: list[tuple[int, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _criteria.append((number, bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_criteria):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
