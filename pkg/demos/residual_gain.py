"""Tracking residual of the swarm for two agent gains."""

from __future__ import annotations

from hai_sim import sar


def main() -> None:
    peaks = {}
    for k_p in (4.0, 40.0):
        res = sar.run_mission(sar.MissionConfig(mission="B", k_p=k_p, horizon=12.0))
        peaks[k_p] = res.residual_max()
        print(f"k_p={k_p:g}: residual max on [0.4, 10] = {peaks[k_p]:.4f}  ({res.wall_time:.1f}s)")
    print(f"attenuation ratio = {peaks[4.0] / peaks[40.0]:.2f}")


if __name__ == "__main__":
    main()
