import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from coevoseg import ImageBuffer, PipelineConfig  # noqa: E402

import oracles  # noqa: E402

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, passed, detail=""):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def band_image():
    return ImageBuffer(oracles.band_image())


@pytest.fixture(scope="session")
def band_cfg():
    return PipelineConfig(r=9, theta_p=17)


@pytest.fixture(scope="session")
def warm_jit(band_image, band_cfg):
    """Run the pipeline once so compiled kernels are loaded before any timing."""
    from coevoseg import run_pipeline

    run_pipeline(band_image, band_cfg)
    return True


def blocks_image(rng, h=32, w=32, n_rects=4, channels=1):
    """Piecewise-constant image: a background plus a few overlapping flat rectangles."""
    img = np.full((h, w, channels), rng.integers(0, 256, channels), dtype=np.uint8)
    for _ in range(n_rects):
        y0, x0 = rng.integers(0, h - 8), rng.integers(0, w - 8)
        y1, x1 = y0 + rng.integers(8, h - y0 + 1), x0 + rng.integers(8, w - x0 + 1)
        img[y0:y1, x0:x1] = rng.integers(0, 256, channels)
    return ImageBuffer(img)
