"""A bouncing timer: flows at unit rate, resets to zero when it reaches 1."""

from __future__ import annotations

import numpy as np

from hai_sim.hybrid import HybridSystemDef, IntegratorConfig, solve


def main() -> None:
    sys = HybridSystemDef(
        dim=1,
        flow_map=lambda t, x: np.ones(1),
        jump_map=lambda t, x: [np.zeros(1)],
        in_flow_set=lambda t, x: x[0] <= 1.0,
        in_jump_set=lambda t, x: x[0] >= 1.0,
    )
    arc = solve(sys, [0.0], IntegratorConfig(step=0.01, horizon=3.5, event_tol=1e-9))
    print(f"reason={arc.reason} jumps={arc.n_jumps}")
    for k in arc.jump_indices():
        print(f"  jump j={arc.j[k]} at t={arc.t[k]:.9f}")
    print(f"final state x={arc.final_state[0]:.6f} at t={arc.t[-1]:.3f}")


if __name__ == "__main__":
    main()
