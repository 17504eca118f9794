import json
import math

import numpy as np
import pytest

import simplex_stdp as ss


def test_loss_and_critical_points():
    assert ss.loss([1.0, 0.0, 0.0]) == pytest.approx(-1.0 / 12, abs=1e-15)
    assert ss.loss([1 / 3, 1 / 3, 1 / 3]) == pytest.approx(-1.0 / 108, abs=1e-15)
    pts = ss.critical_points(3)
    assert len(pts) == 7
    assert sum(p["minimum"] for p in pts) == 3
    for p in pts:
        assert max(abs(g) for g in ss.loss_gradient(p["point"])) < 1e-14


def test_hessian_is_symmetric():
    h = ss.loss_hessian([0.5, 0.3, 0.2])
    assert isinstance(h, np.ndarray)
    assert np.allclose(h, h.T)


def test_probabilities_and_step():
    p = ss.probabilities_from_weights([10.0, 7.5, 5.0], [1.0, 1.0, 1.0])
    assert p == pytest.approx([4 / 9, 1 / 3, 2 / 9], abs=1e-15)
    q = ss.step_probabilities([0.5, 0.5], 0.1, [1.0, 0.0])
    assert q == pytest.approx([11 / 21, 10 / 21], abs=1e-15)


def test_trajectory_is_reproducible():
    a = ss.run_trajectory([0.6, 0.4], 0.01, 500, seed=3, stride=100)
    b = ss.run_trajectory([0.6, 0.4], 0.01, 500, seed=3, stride=100)
    assert a == b
    assert a["steps"] == [0, 100, 200, 300, 400, 500]
    for s in a["states"]:
        assert sum(s) == pytest.approx(1.0, abs=1e-12)


def test_flow_against_closed_form():
    times, states = ss.integrate_flow([0.75, 0.25], horizon=2.0, dt=1e-3, stride=100)
    for t, s in zip(times, states):
        x = 1.0 / math.sqrt(1.0 + 3.0 * math.exp(-t))
        assert s[0] == pytest.approx((1.0 + x) / 2.0, abs=1e-10)
    assert ss.flow_rate([0.75, 0.25]) == pytest.approx(0.375)


def test_theory_values():
    assert ss.max_alpha([0.9, 0.1], epsilon=0.5) == pytest.approx(4.375e-4, rel=1e-12)
    c = ss.corr_params([0.8, 0.1, 0.1], [[1.0, 0.1, 0.1], [0.1, 1.0, 0.0], [0.1, 0.0, 1.0]])
    assert c["valid"]
    assert c["c_star"] == pytest.approx(8e-4, rel=1e-12)
    with pytest.raises(ss.PreconditionError):
        ss.iterations_for(0.05, [0.9, 0.1], 0.25, 0.0)


def test_mirror_and_stdp():
    a = ss.multiplicative_step([0.6, 0.4], 0.1)
    assert a == pytest.approx([0.636 / 1.052, 0.416 / 1.052], rel=1e-14)
    b = ss.entropic_step([0.5, 0.3, 0.2], 0.1, [0.0, 0.0, 0.0])
    assert b == pytest.approx([0.5, 0.3, 0.2], abs=1e-16)
    assert ss.stdp_increment([0.5], 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert ss.barycentric([0.0, 0.0, 1.0]) == pytest.approx((0.5, math.sqrt(3) / 2))


def test_invalid_input_raises():
    with pytest.raises(ss.InvalidInput):
        ss.barycentric([0.5, 0.5])
    with pytest.raises(ValueError):
        ss.step_probabilities([0.7, 0.5], 0.1, [1.0, 0.0])


def test_scenario(tmp_path):
    assert "landscape-grid" in ss.scenario_names()
    code, out, err = ss.run_scenario("mirror-compare", str(tmp_path), {"random_points": "3"}, seed=4, threads=1)
    assert code == 0, err
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 4
    code, _, _ = ss.run_scenario("no-such-scenario", str(tmp_path / "x"))
    assert code == 5
