"""Command-line entry point: ``hai-sim {run,sweep,analyze,export}``.

Exit codes: 0 success, 2 configuration or usage error (nothing written),
3 numerical failure, 4 at least one sweep cell failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, io, sar
from .errors import ConfigurationError, EventLocalizationError, NumericalFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CELL = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _csv_list(kind):
    def parse(text: str):
        items = [s.strip() for s in text.split(",") if s.strip()]
        try:
            return [kind(s) for s in items]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def _add_config_args(p: argparse.ArgumentParser, grid: bool = False) -> None:
    p.add_argument("--config", type=Path, help="JSON file of MissionConfig fields")
    if grid:
        p.add_argument("--missions", type=_csv_list(str), default=["A", "B", "C"], help="comma list, e.g. A,B,C")
        p.add_argument("--taus", type=_csv_list(float), default=[1.0], help="comma list of sampling intervals")
        p.add_argument("--kps", type=_csv_list(float), default=None, help="comma list of agent gains")
        p.add_argument("--tol", type=float, default=0.05, help="spread tolerance of the combined report")
    else:
        p.add_argument("--mission", choices=sorted(sar.MISSION_INITIALS))
        p.add_argument("--tau", type=float, help="sets both tau_p and tau_c")
        p.add_argument("--tau-p", type=float)
        p.add_argument("--tau-c", type=float)
        p.add_argument("--kp", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--survivor-layout",
        choices=("config", "sweep"),
        default="config",
        help="'sweep' places survivors along the settled sweep path",
    )
    p.add_argument("--out-dir", type=Path, default=Path("results"))


def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return data


def _apply_layout(cfg: sar.MissionConfig, layout: str) -> sar.MissionConfig:
    if layout != "sweep":
        return cfg
    pts = sar.sweep_layout(k_p=cfg.k_p, rate=cfg.sweep_rate, amplitude=cfg.ref_amplitude, y_ratio=cfg.ref_y_ratio)
    return sar.with_overrides(cfg, survivors=tuple(map(tuple, pts)))


def resolve_config(base: dict, layout: str = "config", **overrides) -> sar.MissionConfig:
    """Merge file values and flag overrides; every check runs before any simulation."""
    d = dict(base)
    over = {k: v for k, v in overrides.items() if v is not None}
    if "mission" in over and over["mission"] != d.get("mission"):
        for name in ("P0", "T0", "X0"):
            d.pop(name, None)
    if "tau" in over:
        d.pop("tau", None)
        d["tau_p"] = d["tau_c"] = over.pop("tau")
    d.update(over)
    try:
        cfg = sar.MissionConfig.from_dict(d)
    except (ConfigurationError, TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc
    return _apply_layout(cfg, layout)


def _run_overrides(args) -> dict:
    return {
        "mission": args.mission,
        "tau": args.tau,
        "tau_p": args.tau_p,
        "tau_c": args.tau_c,
        "k_p": args.kp,
        "horizon": args.horizon,
        "seed": args.seed,
    }


def _summary_line(res: sar.MissionResult) -> str:
    return (
        f"{res.config.label()}: jumps={res.arc.n_jumps} "
        f"P={res.terminal('P'):.4f} T={res.terminal('T'):.4f} Yc={res.terminal('Yc'):.4f} "
        f"survivors_detected={res.n_detected}/{len(res.survivors)} "
        f"residual_max={res.residual_max():.4f} reason={res.reason}"
    )


def execute(cfg: sar.MissionConfig, out_dir: Path) -> tuple[sar.MissionResult, dict]:
    res = sar.run_mission(cfg)
    report = analysis.mission_analysis(res)
    io.save_result(res, out_dir, report)
    return res, report


def cmd_run(args) -> int:
    cfg = resolve_config(load_config(args.config), args.survivor_layout, **_run_overrides(args))
    try:
        res, _ = execute(cfg, args.out_dir)
    except (NumericalFailure, EventLocalizationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(_summary_line(res))
    print(f"wrote {args.out_dir}")
    return EXIT_NUMERICAL if res.reason == "stuck" else EXIT_OK


def _cell(job: tuple[dict, str]) -> dict:
    cfg_dict, out_dir = job
    cfg = sar.MissionConfig.from_dict(cfg_dict)
    out = {"label": cfg.label(), "dir": out_dir, "mission": cfg.mission, "tau_p": cfg.tau_p, "tau_c": cfg.tau_c, "k_p": cfg.k_p}
    try:
        res, _ = execute(cfg, Path(out_dir))
    except Exception as exc:  # recorded per cell, reported at the end
        out.update(ok=False, error=f"{type(exc).__name__}: {exc}")
        return out
    loop = res.system.loop
    out.update(
        ok=res.reason != "stuck",
        reason=res.reason,
        summary=_summary_line(res),
        P=res.terminal("P"),
        T=res.terminal("T"),
        Yc=res.terminal("Yc"),
        controller_distance=loop.distance_controller_set(res.arc.final_state),
        survivors_detected=res.n_detected,
    )
    return out


def sweep_threads(n_cells: int) -> int:
    raw = os.environ.get("HAI_SIM_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError as exc:
            raise CliError(f"HAI_SIM_THREADS must be an integer, got {raw!r}") from exc
        if cap < 1:
            raise CliError("HAI_SIM_THREADS must be at least 1")
    return max(1, min(cap, n_cells))


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    kps = args.kps if args.kps is not None else [None]
    cells = []
    for tau in args.taus:
        for kp in kps:
            for m in args.missions:
                cfg = resolve_config(base, args.survivor_layout, mission=m, tau=tau, k_p=kp, horizon=args.horizon, seed=args.seed)
                cells.append(cfg)
    if not cells:
        raise CliError("empty sweep grid")
    out_root = Path(args.out_dir)
    jobs = [(cfg.to_dict(), str(out_root / cfg.label())) for cfg in cells]
    workers = sweep_threads(len(jobs))
    if workers == 1:
        outcomes = [_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_cell, jobs))

    groups: dict[tuple, list[dict]] = {}
    for o in outcomes:
        print(o.get("summary") or f"{o['label']}: FAILED {o.get('error', o.get('reason'))}")
        groups.setdefault((o["tau_p"], o["tau_c"], o["k_p"]), []).append(o)
    reports = []
    for (tp, tc, kp), members in groups.items():
        ok = [o for o in members if o["ok"]]
        entry = {"tau_p": tp, "tau_c": tc, "k_p": kp, "cells": [o["label"] for o in members]}
        if len(ok) >= 2:
            rep = analysis.convergence_from_terminals(
                [o["label"] for o in ok],
                [o["P"] for o in ok],
                [o["T"] for o in ok],
                [o["Yc"] for o in ok],
                [o["controller_distance"] for o in ok],
                args.tol,
            )
            entry["convergence"] = rep.to_dict()
            print(f"tau_p={tp:g} tau_c={tc:g} k_p={kp:g}: Yc spread={rep.spread_Yc:.4f} converged={rep.converged}")
        reports.append(entry)
    out_root.mkdir(parents=True, exist_ok=True)
    io.write_json(out_root / "sweep_report.json", {"cells": outcomes, "groups": reports})
    return EXIT_OK if all(o["ok"] for o in outcomes) else EXIT_CELL


def _require_result(path: Path) -> Path:
    path = Path(path)
    for name in (io.TRAJECTORY, io.EVENTS, io.CONFIG):
        if not (path / name).is_file():
            raise CliError(f"no saved result in {path} (missing {name})")
    return path


def cmd_analyze(args) -> int:
    src = _require_result(args.result)
    try:
        cfg = sar.MissionConfig.from_dict(json.loads((src / io.CONFIG).read_text(encoding="utf-8")))
    except (ConfigurationError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid saved config: {exc}") from exc
    system, _ = sar.build_mission(cfg)
    arc = io.load_arc(src, system)
    dwell = analysis.dwell_report(arc)
    bound = analysis.check_jump_bound(arc, dwell.tau_a)
    pair = analysis.check_pairwise_jump_bound(arc, dwell.tau_a)
    pair2 = analysis.check_pairwise_jump_bound(arc, dwell.tau_a, offset=2.0)
    viol = analysis.lyapunov_jump_monotonicity(arc)
    report = {
        "dwell": dwell.to_dict(),
        "jump_bound": {"ok": bound.ok, "margin": bound.margin, "violation": bound.violation},
        "pairwise_jump_bound": {"ok": pair.ok, "margin": pair.margin, "violation": pair.violation},
        "pairwise_jump_bound_offset2": {"ok": pair2.ok, "margin": pair2.margin},
        "lyapunov_violations": len(viol),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_export(args) -> int:
    src = _require_result(args.result)
    paths = io.export_figures(src, args.out_dir)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hai-sim", description="Simulate the human-swarm search-and-rescue loop.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one mission")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="simulate a mission x tau x k_p grid")
    _add_config_args(p, grid=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="re-check a saved run")
    p.add_argument("result", type=Path)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", help="write plot-ready CSVs from a saved run")
    p.add_argument("result", type=Path)
    p.add_argument("--out-dir", type=Path, default=None)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
