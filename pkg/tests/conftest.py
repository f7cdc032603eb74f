import numpy as np
import pytest


def central_difference(f, arrays, h=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. every entry of ``arrays`` (perturbed in place)."""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = f()
            flat[i] = keep - h
            down = f()
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * h)
        out.append(g)
    return out


def max_rel_error(analytic, numeric, floor=1e-8):
    """Largest |a - n| / max(|a|, |n|) over entries whose absolute error exceeds ``floor``."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        diff = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        mask = diff > floor
        if mask.any():
            worst = max(worst, float(np.max(diff[mask] / scale[mask])))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed after the run even when output is captured
ACCEPTANCE_LINES = []


def verdict(number, ok, detail):
    """Record and print a criterion outcome, then fail the test when ``ok`` is false."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
