from __future__ import annotations

import pytest

from hai_sim import sar

_RUNS: dict[tuple, sar.MissionResult] = {}
ACCEPTANCE_LINES: list[str] = []


def cached_mission(layout: str = "sweep", **kw) -> sar.MissionResult:
    """Run a mission once per session; ``layout='sweep'`` uses the sweep-path survivors."""
    key = (layout, tuple(sorted(kw.items())))
    if key not in _RUNS:
        cfg = sar.MissionConfig(**kw)
        if layout == "sweep":
            pts = sar.sweep_layout(k_p=cfg.k_p, rate=cfg.sweep_rate)
            cfg = sar.with_overrides(cfg, survivors=tuple(map(tuple, pts)))
        _RUNS[key] = sar.run_mission(cfg)
    return _RUNS[key]


@pytest.fixture(scope="session")
def mission():
    return cached_mission


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
