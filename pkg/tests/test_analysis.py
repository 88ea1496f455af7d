from __future__ import annotations

import numpy as np
import pytest

from hai_sim import analysis, sar
from hai_sim.hybrid import FLOW, JUMP, HybridArc


def synthetic_arc(records, meta=None):
    """records: (t, j, tag, label)"""
    t = np.array([r[0] for r in records], dtype=float)
    j = np.array([r[1] for r in records], dtype=int)
    return HybridArc(
        t=t,
        j=j,
        x=np.zeros((len(records), 1)),
        tags=[r[2] for r in records],
        labels=[r[3] for r in records],
        step=0.1,
        horizon=float(t[-1]),
        reason="horizon",
        meta=meta or {},
    )


class ZeroLyap:
    def trigger_values(self, t, x):
        return 0.0, 0.0, 0.0, 0.0


def test_jump_bound_without_jumps():
    arc = synthetic_arc([(0.0, 0, FLOW, ""), (1.0, 0, FLOW, ""), (2.0, 0, FLOW, "")])
    chk = analysis.check_jump_bound(arc, 0.5)
    assert chk.ok and chk.margin == 2.0 / 0.5 + 1
    assert analysis.trigger_statistics(arc, 1.0, 1.0).counts == {"plant": 0, "controller": 0}


def test_jump_bound_negative_control():
    arc = synthetic_arc([(0.0, 0, FLOW, ""), (0.0, 1, JUMP, "plant"), (0.0, 2, JUMP, "plant"), (1.0, 2, FLOW, "")])
    chk = analysis.check_jump_bound(arc, 0.5)
    assert not chk.ok
    assert chk.violation == (0.0, 2)


def test_pairwise_bound_catches_late_burst():
    recs = [(0.0, 0, FLOW, ""), (5.0, 0, FLOW, "")]
    recs += [(5.0, k, JUMP, "plant") for k in (1, 2, 3)]
    arc = synthetic_arc(recs)
    assert analysis.check_jump_bound(arc, 1.0).ok
    pair = analysis.check_pairwise_jump_bound(arc, 1.0)
    assert not pair.ok and pair.violation == (5.0, 3)


def test_pairwise_bound_matches_brute_force():
    rng = np.random.default_rng(4)
    t = np.sort(rng.uniform(0, 10, 40))
    j = np.cumsum(rng.integers(0, 2, 40))
    recs = [(float(a), int(b), FLOW, "") for a, b in zip(t, j)]
    arc = synthetic_arc(recs)
    tau_a = 0.4
    brute = min((j[k] - j[i]) * -1 + (t[k] - t[i]) / tau_a + 1 for k in range(40) for i in range(k + 1))
    assert analysis.check_pairwise_jump_bound(arc, tau_a).margin == pytest.approx(brute)


def test_storage_trace_is_zero_at_equilibrium():
    arc = synthetic_arc([(0.0, 0, FLOW, ""), (0.5, 0, FLOW, ""), (0.5, 1, JUMP, "plant")])
    tr = analysis.storage_trace(arc, ZeroLyap())
    assert np.all(tr.U == 0.0) and tr.nonincreasing_at_jumps
    assert analysis.lyapunov_jump_monotonicity(arc, ZeroLyap()) == []


def test_flow_only_arc_has_no_violations():
    arc = synthetic_arc([(0.0, 0, FLOW, ""), (1.0, 0, FLOW, "")])
    assert analysis.lyapunov_jump_monotonicity(arc, ZeroLyap()) == []


def test_controller_jump_drops_vc_by_error_term():
    system, x0 = sar.build_mission(sar.MissionConfig(mission="B"))
    loop = system.loop
    sl = loop.slices()
    x = x0.copy()
    x[sl["e_u"]] = 3.0
    x[sl["eta_c"]] = 1.0
    _, _, vc0, _ = loop.trigger_values(0.0, x)
    _, _, vc1, _ = loop.trigger_values(0.0, loop.g(0.0, x, "controller"))
    assert vc1 - vc0 == pytest.approx(-0.01 * 9.0)


def test_mission_dwell_and_bounds(mission):
    res = mission(mission="B", tau_p=1.0, tau_c=1.0)
    rep = analysis.dwell_report(res.arc)
    assert rep.tau_a == 0.5 and rep.ok
    assert sum(rep.counts.values()) <= res.arc.n_jumps
    chk = analysis.check_jump_bound(res.arc, rep.tau_a)
    assert chk.ok and res.arc.n_jumps <= 40 / 0.5 + 1
    assert analysis.check_pairwise_jump_bound(res.arc, rep.tau_a, offset=2.0).ok


def test_pairwise_bound_needs_two_jump_slack_for_async_samplers():
    # each sampler respects tau = 1, yet four jumps fit in 1.1 s
    recs = [(0.0, 0, FLOW, ""), (1.0, 0, FLOW, "")]
    recs += [(1.0, 1, JUMP, "plant"), (1.1, 1, FLOW, ""), (1.1, 2, JUMP, "controller")]
    recs += [(2.0, 2, FLOW, ""), (2.0, 3, JUMP, "plant"), (2.1, 3, FLOW, ""), (2.1, 4, JUMP, "controller")]
    arc = synthetic_arc(recs, {"tau_p": 1.0, "tau_c": 1.0})
    assert analysis.dwell_report(arc).ok
    assert analysis.check_jump_bound(arc, 0.5).ok
    assert not analysis.check_pairwise_jump_bound(arc, 0.5).ok
    assert analysis.check_pairwise_jump_bound(arc, 0.5, offset=2.0).ok


def test_mission_storage_nonincreasing_at_jumps(mission):
    res = mission(mission="B", tau_p=1.0, tau_c=1.0)
    assert analysis.lyapunov_jump_monotonicity(res.arc) == []
    tr = analysis.storage_trace(res.arc)
    assert tr.nonincreasing_at_jumps
    assert np.all(tr.U >= tr.V_p) and np.all(tr.U >= tr.V_c)


def test_convergence_metrics(mission):
    small = [mission(mission=m, tau_p=1.0, tau_c=1.0) for m in "ABC"]
    rep = analysis.convergence_metrics(small, tol=0.05)
    assert rep.converged and rep.spread >= 0
    big = [mission(mission=m, tau_p=20.0, tau_c=20.0) for m in "ABC"]
    assert not analysis.convergence_metrics(big, tol=0.05).converged
    assert analysis.convergence_metrics([small[0], small[0]]).spread == 0.0
    with pytest.raises(ValueError):
        analysis.convergence_metrics(small[:1])


def test_trigger_statistics_mission_c(mission):
    res = mission(mission="C", tau_p=1.0, tau_c=1.0)
    stats = analysis.trigger_statistics(res.arc)
    assert stats.baseline_count == 40.0
    assert stats.counts["controller"] < stats.baseline_count
    assert stats.count_in("plant", 5.0, 30.0) >= 5
    starts, rates = stats.rate("plant", 5.0)
    assert len(starts) == len(rates) and rates.sum() * 5.0 == stats.counts["plant"]


def test_mission_analysis_is_json_ready(mission):
    import json

    res = mission(mission="B", tau_p=1.0, tau_c=1.0)
    json.dumps(analysis.mission_analysis(res))
