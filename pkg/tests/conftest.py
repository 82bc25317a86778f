from __future__ import annotations

import numpy as np
import pytest

import patchyhjb as phj


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted kernels on a toy problem before any timed test."""
    spec = phj.preset("eikonal2d", controls=4)
    grid = phj.Grid(spec.box_lo, spec.box_hi, (9, 9))
    phj.solve_single(spec, grid)
    pcfg = phj.PatchyConfig(n_patches=2, coarse_nodes=9, fine_nodes=9)
    phj.run_patchy(spec, pcfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
