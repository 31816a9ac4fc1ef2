"""Batch execution: one CSV per run plus a JSON summary."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from enum import IntEnum
from pathlib import Path

import numpy as np

from .analysis import CubicCharPoly, hurwitz_check, lyapunov_certificates, switching_certificate
from .config import RunManifest, dump_manifest, manifest_to_dict
from .sim import DivergedRunError, SimResult, error_envelope, is_settling, metrics, simulate

log = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 1
    DIVERGED = 2
    CERTIFICATE_FAILED = 3


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def csv_columns(result: SimResult, states=True, controls=True, diagnostics=True):
    """Ordered ``(header, column)`` pairs for the flat CSV layout."""
    cols = [("t", result.t)]
    if states:
        cols += [("q1", result.q[:, 0]), ("q2", result.q[:, 1]),
                 ("qd1", result.qd[:, 0]), ("qd2", result.qd[:, 1]),
                 ("q1dot", result.qdot[:, 0]), ("q2dot", result.qdot[:, 1])]
    if controls:
        cols += [("u1", result.u[:, 0]), ("u2", result.u[:, 1])]
    if states:
        cols += [("err1", result.q_tilde[:, 0]), ("err2", result.q_tilde[:, 1])]
    if diagnostics:
        if result.sigma is not None:
            cols += [("sigma1", result.sigma[:, 0]), ("sigma2", result.sigma[:, 1])]
        if result.d_hat is not None:
            cols += [("dhat1", result.d_hat[:, 0]), ("dhat2", result.d_hat[:, 1])]
        if result.V is not None:
            cols += [("V", result.V)]
    return cols


def write_csv(result: SimResult, path: Path, states=True, controls=True, diagnostics=True):
    cols = csv_columns(result, states, controls, diagnostics)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name for name, _ in cols])
        data = np.column_stack([c for _, c in cols])
        for row in data:
            writer.writerow([_fmt(x) for x in row])


def certificates_for(result: SimResult) -> dict:
    ctl = result.config.controller
    if ctl.kind == "lyapunov":
        return lyapunov_certificates(result).as_dict()
    if ctl.kind == "discontinuous":
        return switching_certificate(result).as_dict()
    g = ctl.gains
    check = hurwitz_check(CubicCharPoly(g.kd, g.kp, g.ki))
    return {"passed": check.stable,
            "certificates": {"hurwitz": {"passed": check.stable, "margin": check.margin}}}


def execute(manifest: RunManifest, figures: bool = False) -> dict:
    """Run one manifest and write its artifacts. Returns its summary entry."""
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{manifest.name}.resolved.toml").write_text(dump_manifest(manifest))
    entry = {"name": manifest.name, "manifest": manifest_to_dict(manifest)}
    try:
        result = simulate(manifest.config)
    except DivergedRunError as exc:
        log.error("%s: %s", manifest.name, exc)
        entry.update(status="diverged", error=str(exc), step=exc.step)
        return entry

    write_csv(result, out / f"{manifest.name}.csv",
              manifest.states, manifest.controls, manifest.diagnostics)
    t_end = result.t[-1]
    envelope = error_envelope(result, transient=min(2.0, 0.2 * t_end), window=max(t_end / 10, result.config.dt))
    entry.update(
        status="ok",
        csv=f"{manifest.name}.csv",
        metrics=metrics(result, settle_window=min(2.0, 0.2 * t_end)).as_dict(),
        certificates=certificates_for(result),
        error_envelope=envelope.tolist(),
        settling=is_settling(envelope),
    )
    if figures:
        from .report import render_run

        entry["figure"] = render_run(result, out / f"{manifest.name}.png",
                                     states=manifest.states, controls=manifest.controls).name
    return entry


def run_experiments(manifests: list[RunManifest], workers: int = 1,
                    strict_certificates: bool = False, figures: bool = False,
                    summary_path: Path | None = None) -> tuple[ExitCode, list[dict]]:
    """Execute every manifest, write ``summary.json`` and pick an exit code.

    A diverged run does not stop the others. Divergence outranks a
    certificate failure, which only counts under ``strict_certificates``.
    """
    if workers > 1 and len(manifests) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(execute, manifests, [figures] * len(manifests)))
    else:
        entries = [execute(m, figures) for m in manifests]

    if summary_path is None:
        summary_path = Path(manifests[0].out_dir) / "summary.json"
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    summary_path.write_text(json.dumps({"runs": entries}, indent=2, sort_keys=True) + "\n")

    if any(e["status"] == "diverged" for e in entries):
        return ExitCode.DIVERGED, entries
    failed = [e["name"] for e in entries if not e["certificates"]["passed"]]
    if failed:
        log.warning("certificate failures: %s", ", ".join(failed))
        if strict_certificates:
            return ExitCode.CERTIFICATE_FAILED, entries
    return ExitCode.OK, entries
