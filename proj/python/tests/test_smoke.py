import math

import numpy as np
import pytest

import capflow

PI3 = math.pi / 3


def test_cap_oracles():
    assert capflow.cap_center(math.pi / 2, 1.0) == pytest.approx(math.sqrt(2))
    assert capflow.cap_quermass(math.pi / 2, math.inf, 0) == pytest.approx(2 * math.pi / 3)
    lens = math.pi * (8 - 5 * math.sqrt(2)) / 6
    assert capflow.cap_quermass(math.pi / 2, 1.0, 0) == pytest.approx(lens, rel=1e-12)
    assert capflow.cap_radius_from_quermass(math.pi / 2, 2, 0, lens) == pytest.approx(1.0, rel=1e-7)
    d = capflow.shell_deltas(math.pi / 2, 1.0, 2.0)
    assert d[1] == pytest.approx(0.29289, abs=1e-5)
    assert d[4] == pytest.approx(0.70711, abs=1e-5)


def test_grid_and_quermass():
    g = capflow.Grid("axisym:128")
    assert g.nodes == 128
    assert len(g.beta) == 128
    u = capflow.cap_graph(PI3, 1.0, g)
    q = capflow.quermass(u, g, PI3)
    for k in range(3):
        assert q["W"][k] == pytest.approx(capflow.cap_quermass(PI3, 1.0, k), abs=1e-6)
    assert q["kappa_min"] == pytest.approx(1.0, abs=1e-5)
    assert np.max(np.abs(capflow.scalar_rhs(u, g, PI3))) < 1e-5
    assert abs(capflow.af_check(u, g, PI3)) < 1e-7
    assert abs(capflow.minkowski_residual(u, g, PI3, 1)) < 1e-7


def test_run_converges():
    g = capflow.Grid("axisym:64")
    cfg = capflow.FlowConfig(PI3, g, scheme="imex", stop_tol=1e-6)
    u0 = capflow.perturbed_cap(PI3, 1.0, g, 0.1, 1, math.pi)
    out = capflow.run(cfg, u0)
    assert out["converged"]
    assert out["max_drift"] < 1e-3
    assert out["violations"] == [0]
    assert out["final_dist"] < 5e-3
    assert np.all(np.diff(out["t"]) > 0)


def test_errors():
    g = capflow.Grid("axisym:64")
    with pytest.raises(ValueError):
        capflow.FlowConfig(2.0, g)
    with pytest.raises(ValueError):
        capflow.quermass(np.zeros(3), g, PI3)
    with pytest.raises(ValueError):
        capflow.Grid("hexagonal:12")
    cfg = capflow.FlowConfig(math.pi / 2, g, t_max=1e-4)
    out = capflow.run(cfg, capflow.perturbed_cap(math.pi / 2, 1.0, g, 0.1))
    assert not out["converged"]
    assert out["stop_reason"] == "t_max"
