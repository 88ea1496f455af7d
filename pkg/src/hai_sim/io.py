"""Result files: trajectory CSV, event JSONL, analysis JSON and figure exports.

Floats are written with ``repr`` so a read back reproduces them bit for bit.
All files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .closedloop import ClosedLoopState
from .hybrid import FLOW, JUMP, HybridArc

TRAJECTORY = "trajectory.csv"
EVENTS = "events.jsonl"
ANALYSIS = "analysis.json"
CONFIG = "config.json"
SURVIVORS = "survivors.csv"

INT_COLUMNS = ("j",)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Columns keyed by header name; ``j`` as int, text columns kept as strings."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        raw = list(r)
    cols = {}
    for k, name in enumerate(header):
        vals = [row[k] for row in raw]
        if name in INT_COLUMNS:
            cols[name] = np.array([int(v) for v in vals], dtype=int)
        else:
            try:
                cols[name] = np.array([float(v) for v in vals], dtype=float)
            except ValueError:
                cols[name] = np.array(vals, dtype=object)
    return cols


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_jsonl(path: Path, records) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- trajectories ---------------------------------------------------------------


def trajectory_table(series: dict[str, np.ndarray]) -> tuple[list[str], list[list]]:
    S, X, em, eu = series["S"], series["X"], series["e_m"], series["e_u"]
    n_s, n_a = S.shape[1] - 1, X.shape[1] // 2
    header = ["t", "j", "P", "T", "Yc", "R"]
    header += [f"S1_{k + 1:02d}" for k in range(n_s)] + ["S2", "eta_p", "eta_c"]
    header += [f"X{i + 1:02d}_{ax}" for i in range(n_a) for ax in ("x", "y")]
    header += [f"em_{k + 1:02d}" for k in range(em.shape[1])]
    header += [f"eu_{k + 1:02d}" for k in range(eu.shape[1])] + ["delta"]
    rows = []
    for k in range(len(series["t"])):
        row = [float(series["t"][k]), int(series["j"][k])]
        row += [float(series[c][k]) for c in ("P", "T", "Yc", "R")]
        row += list(S[k]) + [float(series["eta_p"][k]), float(series["eta_c"][k])]
        row += list(X[k]) + list(em[k]) + list(eu[k]) + [float(series["delta"][k])]
        rows.append(row)
    return header, rows


def event_records(events: list[dict]) -> list[dict]:
    keys = ("t", "j", "sampler", "applied", "Vp", "Wp", "Vc", "Wu")
    return [{k: ev[k] for k in keys} for ev in events]


def survivor_rows(result) -> tuple[list[str], list[list]]:
    rows = []
    for k, (pos, td) in enumerate(zip(result.survivors, result.detection_times)):
        rows.append([k + 1, float(pos[0]), float(pos[1]), float(td)])
    return ["index", "x", "y", "detected_t"], rows


def save_result(result, out_dir: Path, analysis: dict | None = None) -> Path:
    """Write one mission's files into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = trajectory_table(result.series)
    write_csv(out_dir / TRAJECTORY, header, rows)
    write_jsonl(out_dir / EVENTS, event_records(result.events))
    write_csv(out_dir / SURVIVORS, *survivor_rows(result))
    write_json(out_dir / CONFIG, result.config.to_dict())
    if analysis is not None:
        write_json(out_dir / ANALYSIS, analysis)
    return out_dir


def _block(cols: dict, prefix: str) -> np.ndarray:
    names = sorted(k for k in cols if k.startswith(prefix))
    return np.column_stack([cols[k] for k in names])


def load_arc(result_dir: Path, system) -> HybridArc:
    """Rebuild the arc of a saved run for post-hoc analysis.

    Needs the system built from the saved config; jump labels come from the
    event log.
    """
    result_dir = Path(result_dir)
    cols = read_csv(result_dir / TRAJECTORY)
    events = read_jsonl(result_dir / EVENTS)
    loop = system.loop
    a = loop.anchors
    S = np.column_stack([_block(cols, "S1_"), cols["S2"]])
    X = _block(cols, "X")
    em, eu = _block(cols, "em_"), _block(cols, "eu_")
    xs = []
    for k in range(len(cols["t"])):
        q = ClosedLoopState(
            x_p=X[k] - a.X_star,
            e_m=em[k],
            eta_p=cols["eta_p"][k],
            x_c=np.array([cols["P"][k] - a.P_star, cols["T"][k] - a.T_star]),
            e_u=eu[k],
            eta_c=cols["eta_c"][k],
            S=S[k],
            R=np.array([cols["R"][k]]),
        )
        xs.append(loop.pack(q))
    j = cols["j"]
    tags, labels = [FLOW], [""]
    applied = {int(ev["j"]): ev["applied"] for ev in events}
    for k in range(1, len(j)):
        if j[k] != j[k - 1]:
            tags.append(JUMP)
            labels.append(applied.get(int(j[k]), ""))
        else:
            tags.append(FLOW)
            labels.append("")
    cfg = json.loads((result_dir / CONFIG).read_text(encoding="utf-8"))
    meta = {"system": system, "tau_p": cfg["tau_p"], "tau_c": cfg["tau_c"], "event_tol": cfg["event_tol"]}
    return HybridArc(
        t=cols["t"],
        j=j,
        x=np.vstack(xs),
        tags=tags,
        labels=labels,
        step=cfg["step"],
        horizon=cfg["horizon"],
        reason="loaded",
        meta=meta,
    )


# -- figure exports ---------------------------------------------------------------

FIGURE_FILES = ("fig2_centroid.csv", "fig3_states.csv", "fig4_residual.csv", "fig6_triggers.csv")


def export_figures(result_dir: Path, out_dir: Path | None = None) -> list[Path]:
    """Plot-ready CSVs from a saved run.

    The centroid, state and residual files have one row per arc record; the
    trigger raster has one row per jump.  Survivor markers go to
    ``fig2_survivors.csv``.
    """
    result_dir = Path(result_dir)
    out_dir = Path(out_dir) if out_dir is not None else result_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = read_csv(result_dir / TRAJECTORY)
    events = read_jsonl(result_dir / EVENTS)
    t, j = cols["t"], cols["j"]
    X = _block(cols, "X")
    cx, cy = X[:, 0::2].mean(axis=1), X[:, 1::2].mean(axis=1)
    paths = [out_dir / name for name in FIGURE_FILES]
    write_csv(paths[0], ["t", "j", "cx", "cy"], zip(t, j, cx, cy))
    write_csv(paths[1], ["t", "j", "P", "T", "Yc", "R"], zip(t, j, cols["P"], cols["T"], cols["Yc"], cols["R"]))
    write_csv(paths[2], ["t", "j", "delta"], zip(t, j, cols["delta"]))
    write_csv(paths[3], ["t", "j", "sampler"], ([ev["t"], ev["j"], ev["sampler"]] for ev in events))
    surv = read_csv(result_dir / SURVIVORS)
    sp = out_dir / "fig2_survivors.csv"
    write_csv(sp, ["index", "x", "y", "detected_t"], zip(surv["index"].astype(int), surv["x"], surv["y"], surv["detected_t"]))
    return paths + [sp]

