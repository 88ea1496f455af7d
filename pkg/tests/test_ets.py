from __future__ import annotations

import numpy as np
import pytest

from hai_sim.errors import UndefinedResult
from hai_sim.ets import (
    SamplerState,
    TriggerPolicy,
    in_flow_set,
    in_jump_set,
    min_interjump_interval,
    sampler_reset,
    set_distance,
)
from hai_sim.hybrid import HybridSystemDef, IntegratorConfig, solve


def policy(v, w, tau=1.0):
    return TriggerPolicy(V=lambda q: v, W=lambda e: w, tau=tau)


def state(eta):
    return SamplerState(np.zeros(1), eta)


def test_flow_set_examples():
    # V_c = (0.41 - 1.41)^2 + 0.01 * 0.1^2, W_u = 10.01 * 0.1^2
    v = (0.41 - 1.41) ** 2 + 0.01 * 0.1**2
    w = 10.01 * 0.1**2
    assert v == pytest.approx(1.0001) and w == pytest.approx(0.1001)
    assert in_flow_set(policy(v, w), None, state(0.2))
    assert in_flow_set(policy(0.0, 0.0), None, state(0.5))
    assert not in_flow_set(policy(0.0, 0.5), None, state(1.0))


def test_jump_set_examples():
    assert in_jump_set(policy(0.0, 0.0), None, state(1.0))
    assert not in_jump_set(policy(2.0, 1.0), None, state(1.0))
    assert in_jump_set(policy(0.05, 0.0601), None, state(1.2))
    assert not in_jump_set(policy(0.0, 1.0), None, state(0.99))


def test_flow_and_jump_sets_cover_everything():
    rng = np.random.default_rng(0)
    for _ in range(500):
        v, w, eta = rng.uniform(0, 2, 3)
        p, s = policy(v, w), state(eta)
        assert in_flow_set(p, None, s) or in_jump_set(p, None, s)


def test_policy_needs_positive_tau():
    with pytest.raises(ValueError):
        policy(0.0, 0.0, tau=0.0)


def test_sampler_reset():
    s = sampler_reset(SamplerState(np.array([0.3, -0.1]), 1.0))
    assert np.array_equal(s.e, [0.0, 0.0]) and s.eta == 0.0
    z = sampler_reset(s)
    assert np.array_equal(z.e, [0.0, 0.0]) and z.eta == 0.0


def test_set_distance_ignores_timer():
    assert set_distance(np.array([3.0]), np.array([4.0])) == 5.0


def test_min_interjump_interval_periodic_timer():
    sys = HybridSystemDef(
        dim=1,
        flow_map=lambda t, x: np.ones(1),
        jump_map=lambda t, x: [np.zeros(1)],
        in_flow_set=lambda t, x: x[0] <= 1.0,
        in_jump_set=lambda t, x: x[0] >= 1.0,
    )
    arc = solve(sys, np.zeros(1), IntegratorConfig(step=0.01, event_tol=1e-4, horizon=3.5))
    assert min_interjump_interval(arc) == pytest.approx(1.0, abs=2e-4)


def test_min_interjump_interval_from_times():
    assert min_interjump_interval(np.array([0.5, 1.5, 4.0])) == 1.0
    with pytest.raises(UndefinedResult):
        min_interjump_interval(np.array([2.0]))
