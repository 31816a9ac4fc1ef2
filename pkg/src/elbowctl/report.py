"""Static figures of a run, written next to its CSV."""
from __future__ import annotations

from pathlib import Path

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .sim import SimResult

STYLE = {"linewidth": 1.2}
REF_STYLE = {"linewidth": 1.0, "linestyle": "--", "color": "0.4"}


def _states(axes, result: SimResult):
    for j, ax in enumerate(axes[0]):
        ax.plot(result.t, result.q[:, j], label=f"$q_{j + 1}$", **STYLE)
        ax.plot(result.t, result.qd[:, j], label=f"$q_{{d{j + 1}}}$", **REF_STYLE)
        ax.set_ylabel("rad")
        ax.legend(loc="upper right", fontsize=8)
    for j, ax in enumerate(axes[1]):
        ax.plot(result.t, result.q_tilde[:, j], color="C3", **STYLE)
        ax.axhline(0.0, **REF_STYLE)
        ax.set_ylabel(rf"$\tilde q_{j + 1}$ (rad)")


def _controls(axes, result: SimResult):
    for j, ax in enumerate(axes):
        ax.plot(result.t, result.u[:, j], color="C2", **STYLE)
        ax.set_ylabel(f"$u_{j + 1}$ (N m)")


def render_run(result: SimResult, path: Path, states=True, controls=True) -> Path:
    """Save a PNG with the tracking panels and/or the torque panels."""
    rows = 2 * bool(states) + bool(controls) or 2
    fig = Figure(figsize=(8, 2.2 * rows), constrained_layout=True)
    FigureCanvasAgg(fig)
    axes = fig.subplots(rows, 2, squeeze=False, sharex=True)
    row = 0
    if states or not controls:
        _states(axes[0:2], result)
        row = 2
    if controls:
        _controls(axes[row], result)
    for ax in axes[-1]:
        ax.set_xlabel("t (s)")
    for ax in axes.flat:
        ax.grid(alpha=0.3)
    fig.suptitle(f"{result.config.controller.kind.replace('_', ' ')} controller, "
                 f"d = ({result.d[0]:g}, {result.d[1]:g})", fontsize=10)
    path = Path(path)
    fig.savefig(path, dpi=120)
    return path
