import numpy as np
import pytest

from uniod.config import desk_config
from uniod.data import Dataset


def random_psd(rng, n, rank=None):
    b = rng.standard_normal((n, rank or n))
    return b @ b.T


def gaussian_kernel_of(x, sigma):
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2 * sigma**2))


def finite_difference(f, theta, index, step=1e-5):
    old = theta[index]
    theta[index] = old + step
    up = f()
    theta[index] = old - step
    down = f()
    theta[index] = old
    return (up - down) / (2 * step)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return desk_config(d_star=8, gin_widths=(8, 4), gt_layers=1, gt_ffn_width=8, gt_heads=2, head_widths=(8, 2))


@pytest.fixture
def labeled_blob(rng):
    x = np.vstack([rng.standard_normal((27, 3)), rng.uniform(-8, 8, (3, 3))])
    y = np.r_[np.zeros(27, dtype=int), np.ones(3, dtype=int)]
    return Dataset("blob", x, y)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the terminal summary prints them all in order."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, title, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        lines.append((number, f"{status} criterion {number}: {title} | {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
