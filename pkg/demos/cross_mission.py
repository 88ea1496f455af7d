"""Terminal commander output across missions A, B and C for several sampling intervals."""

from __future__ import annotations

import argparse

from hai_sim import analysis, sar


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--taus", type=float, nargs="+", default=[0.1, 1.0, 20.0])
    ap.add_argument("--horizon", type=float, default=40.0)
    args = ap.parse_args()
    layout = tuple(map(tuple, sar.sweep_layout()))
    for tau in args.taus:
        results = []
        for m in ("A", "B", "C"):
            cfg = sar.MissionConfig(mission=m, tau_p=tau, tau_c=tau, horizon=args.horizon, survivors=layout)
            res = sar.run_mission(cfg)
            results.append(res)
            print(f"  {cfg.label()}: Yc={res.terminal('Yc'):.4f} detected={res.n_detected}/{len(res.survivors)}")
        rep = analysis.convergence_metrics(results)
        print(f"tau={tau:g}: Yc spread={rep.spread_Yc:.4f} converged={rep.converged}")


if __name__ == "__main__":
    main()
