import numpy as np
import pytest

from psaqkd import gaussian


def random_symplectic(rng: np.random.Generator, n: int, depth: int = 6) -> np.ndarray:
    """Product of random beamsplitters, single-mode squeezers and phase rotations."""
    S = np.eye(2 * n)
    for _ in range(depth):
        a, b = rng.choice(n, size=2, replace=False) if n > 1 else (0, None)
        if b is not None:
            S = gaussian.beamsplitter(rng.uniform(0, 1), n, int(a), int(b)) @ S
        k = int(rng.integers(n))
        r = rng.uniform(-1, 1)
        sq = np.eye(2 * n)
        sq[2 * k, 2 * k], sq[2 * k + 1, 2 * k + 1] = np.exp(r), np.exp(-r)
        th = rng.uniform(0, 2 * np.pi)
        rot = np.eye(2 * n)
        rot[2 * k:2 * k + 2, 2 * k:2 * k + 2] = [[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]]
        S = rot @ sq @ S
    return S


def random_physical_state(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random Gaussian state: thermal spectrum in [1, 5] dressed by a random symplectic."""
    nus = rng.uniform(1, 5, size=n)
    S = random_symplectic(rng, n)
    return S @ np.diag(np.repeat(nus, 2)) @ S.T


@pytest.fixture
def rng():
    return np.random.default_rng(20200501)


_CRITERIA: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    cid, title = marker.args
    _CRITERIA.append((cid, title, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title, status in _CRITERIA:
        terminalreporter.write_line(f"[{status}] criterion {cid}: {title}")
