"""Event times of both samplers plus the post-hoc checks for one mission."""

from __future__ import annotations

import json

from hai_sim import analysis, sar


def main() -> None:
    res = sar.run_mission(sar.MissionConfig(mission="B", tau_p=1.0, tau_c=1.0, horizon=40.0))
    stats = analysis.trigger_statistics(res.arc)
    for which, times in stats.times.items():
        marks = ["."] * 40
        for t in times:
            marks[min(int(t), 39)] = "|"
        print(f"{which:>10} {''.join(marks)}  n={times.size}")
    print(f"periodic baseline would fire {stats.baseline_count:.0f} times per sampler")
    report = analysis.mission_analysis(res)
    keep = ("dwell", "jump_bound", "pairwise_jump_bound", "pairwise_jump_bound_offset2", "storage_nonincreasing_at_jumps")
    print(json.dumps({k: report[k] for k in keep}, indent=2, default=str))
    print(f"Lyapunov increases at jumps: {len(report['lyapunov_violations'])}")


if __name__ == "__main__":
    main()
