import warnings

import numpy as np
import pytest

from mplc_usd.experiment import Geometry
from mplc_usd.optics import make_grid


@pytest.fixture
def grid():
    return make_grid(128, 128, 8e-6, 633e-9)


@pytest.fixture
def small_grid():
    return make_grid(64, 64, 10e-6, 633e-9)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_geometry():
    """A 64x64 device that trains in a second or two; not meant to be accurate."""
    return Geometry(
        nx=64,
        ny=64,
        pitch=10e-6,
        n_planes=3,
        plane_spacing=5e-3,
        lead_in=5e-3,
        lead_out=5e-3,
        hg_waist=50e-6,
        spot_waist=40e-6,
        spot_radius=130e-6,
    )


@pytest.fixture(autouse=True)
def _quiet_resolution_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        yield


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """``criterion(n, passed, detail)`` records one acceptance verdict."""

    def record(n: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(n, []).append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        entries = ACCEPTANCE[n]
        ok = all(p for p, _ in entries)
        detail = "; ".join(d for _, d in entries)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
