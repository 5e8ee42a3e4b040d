"""Scenario orchestration, sweeps and artifact emission."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, validate
from .diagnostics import (
    bump_initial_data,
    envelope_check,
    lab1_suite,
    prop23_suite,
    theta_M,
    virial_Lq,
    virial_monotonicity,
)
from .errors import ConditionFails, ConfigError, NoMajorant, NoRoot, NumericalError, RangeError
from .nonlinearity import INVERSE, DiffusionSpec, check_gex1
from .numerics import GridField
from .primal import primal_run, reconstruct_v
from .records import DIAGNOSTIC_COLUMNS, STEP_FAILURE, Outcome
from .transform import u_to_f
from .transformed import transformed_run

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
SWEEP_AXES = ("p", "alpha", "delta", "m0")
SWEEP_COLUMNS = ("axis_value", "outcome", "t_singular", "Lq0", "theta_M")
MIN_VIRIAL_SAMPLES = 200


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_json_ready(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def initial_density(cfg: ScenarioConfig) -> GridField:
    if cfg.initial == "cosine":
        N = cfg.Nu
        x = (np.arange(N) + 0.5) / N
        # exact cell averages of M (1 + a cos(pi x))
        avg = (np.sin(np.pi * (x + 0.5 / N)) - np.sin(np.pi * (x - 0.5 / N))) * N / np.pi
        return GridField(cfg.M * (1.0 + cfg.amplitude * avg), 1.0)
    return bump_initial_data(cfg.M, cfg.m0, cfg.delta, cfg.Nu)


def _threshold(cfg: ScenarioConfig, spec: DiffusionSpec):
    try:
        return theta_M(cfg.q, cfg.M, spec), ""
    except (NoMajorant, NoRoot) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _lyapunov_applies(spec: DiffusionSpec, M: float) -> bool:
    if spec.family == INVERSE:
        return True
    try:
        check_gex1(spec, M)
    except ConditionFails:
        return False
    return True


def _monotone(series, tol_rel: float = 1e-8) -> dict:
    L = np.asarray(series, dtype=float)
    L = L[np.isfinite(L)]
    if L.size < 2:
        return {"checked": 0, "violations": []}
    rise = np.diff(L) - tol_rel * (1.0 + np.abs(L[:-1]))
    bad = np.nonzero(rise > 0)[0]
    return {"checked": int(rise.size),
            "violations": [{"index": int(i), "lhs": float(L[i + 1]), "rhs": float(L[i])} for i in bad]}


def simulate(cfg: ScenarioConfig) -> dict:
    """Run both formulations from the same data and evaluate every applicable check.

    Returns the summary plus the two outcomes under ``"_runs"``.
    """
    spec = cfg.spec()
    u0 = initial_density(cfg)
    M = u0.mean()
    cap = min(cfg.u_cap, cfg.u_cap_grid * M / u0.h)
    if u0.values.max() > cap:
        # otherwise the primal run would report blow-up at t = 0
        raise RangeError("delta", f"initial peak {u0.values.max():.6g} already exceeds the blow-up cap "
                                  f"{cap:.6g}; refine Nu or widen the bump")
    f0 = u_to_f(u0, cfg.Nf)
    theta, theta_note = _threshold(cfg, spec)
    Lq0 = virial_Lq(u0, cfg.q)
    sample = cfg.sample_interval
    blowup_expected = theta is not None and Lq0 < theta
    if blowup_expected:
        # The singular time is close to 1/max u0; sample densely enough for the virial check.
        sample = min(sample, 1.0 / (float(u0.values.max()) * 2.0 * MIN_VIRIAL_SAMPLES))
    run_cfg = cfg.replace(sample_interval=sample)

    primal = primal_run(u0, spec, run_cfg)
    trans = transformed_run(f0, spec, run_cfg)

    checks: dict = {}
    pm = primal.series.array("mass")
    checks["primal_mass"] = {"max_rel_drift": float(np.max(np.abs(pm - pm[0])) / pm[0]), "tol": 1e-12}
    checks["primal_mass"]["passed"] = checks["primal_mass"]["max_rel_drift"] <= 1e-12
    tm = trans.series.array("mass")
    checks["transformed_mass"] = {"max_drift": float(np.max(np.abs(tm - 1.0))), "tol": 1e-6}
    checks["transformed_mass"]["passed"] = checks["transformed_mass"]["max_drift"] <= 1e-6
    env = envelope_check(primal.series, u0.h, float(u0.values.min()), M, float(u0.values.max()))
    checks["envelope"] = {**env.to_dict(), "passed": env.passed}
    if cfg.track_lyapunov and _lyapunov_applies(spec, M):
        mono = _monotone(trans.series.L_or_L1)
        checks["lyapunov"] = {**mono, "passed": not mono["violations"]}

    monotonicity_reports = {}
    if theta is not None:
        for name, run in (("primal", primal), ("transformed", trans)):
            rep = virial_monotonicity(run, cfg.q, spec, M=M, h=u0.h if name == "primal" else f0.h)
            monotonicity_reports[name] = rep.to_dict()
        if blowup_expected:
            rp = monotonicity_reports["primal"]
            checks["virial"] = {"fraction_ok": rp["fraction_ok"],
                                "strictly_decreasing": rp["strictly_decreasing"],
                                "samples": rp["samples"]}
            checks["virial"]["passed"] = bool(rp["fraction_ok"] >= 0.95 and rp["strictly_decreasing"])

    singular = (primal.singular, trans.singular)
    checks["outcomes_agree"] = {"primal": primal.status, "transformed": trans.status,
                                "passed": singular[0] == singular[1]
                                and STEP_FAILURE not in (primal.status, trans.status)}
    gap = None
    if all(singular):
        gap = abs(primal.t_event - trans.t_event) / max(primal.t_event, trans.t_event)

    summary = {
        "config": {k: v for k, v in vars(cfg).items() if k != "out"},
        "spec": spec.label(),
        "outcome_primal": primal.status,
        "outcome_transformed": trans.status,
        "message_primal": primal.message,
        "message_transformed": trans.message,
        "t_blowup": primal.t_event if primal.singular else None,
        "t_touchdown": trans.t_event if trans.singular else None,
        "singular_time_gap": gap,
        "theta_M": theta,
        "theta_M_note": theta_note,
        "Lq0": Lq0,
        "blowup_predicted": blowup_expected,
        "min_f_lower_bound": float(np.min(trans.series.array("min_field"))),
        "sample_interval_used": sample,
        "monotonicity_reports": monotonicity_reports,
        "checks": checks,
        "all_checks_passed": all(c["passed"] for c in checks.values()),
        "_runs": (primal, trans),
    }
    return summary


def _primal_snapshot_rows(out: Outcome, M: float):
    for t, u in out.series.snapshots:
        v = reconstruct_v(u, M)
        for x, ui, vi in zip(u.centers, u.values, v.values):
            yield (t, x, ui, vi)


def _transformed_snapshot_rows(out: Outcome, spec: DiffusionSpec):
    for t, f in out.series.snapshots:
        psi = spec.Psi(f.values)
        for y, fi, pi in zip(f.centers, f.values, psi):
            yield (t, y, fi, pi)


def write_outputs(summary: dict, cfg: ScenarioConfig, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    primal, trans = summary["_runs"]
    spec = cfg.spec()
    M = primal.final.mean()
    write_csv(out_dir / "snapshots_primal.csv", ("t", "x", "u", "v"), _primal_snapshot_rows(primal, M))
    write_csv(out_dir / "snapshots_transformed.csv", ("t", "y", "f", "Psi_f"),
              _transformed_snapshot_rows(trans, spec))
    write_csv(out_dir / "diagnostics_primal.csv", DIAGNOSTIC_COLUMNS, primal.series.rows())
    write_csv(out_dir / "diagnostics_transformed.csv", DIAGNOSTIC_COLUMNS, trans.series.rows())
    write_json(out_dir / "summary.json", {k: v for k, v in summary.items() if not k.startswith("_")})


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> int:
    """Simulate, write artifacts and return the process exit status."""
    out_dir = Path(out_dir if out_dir is not None else cfg.out)
    try:
        validate(cfg)
        summary = simulate(cfg)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("numerical error: %s", exc)
        return EXIT_NUMERICAL
    try:
        write_outputs(summary, cfg, out_dir)
    except OSError as exc:
        logger.error("cannot write outputs to %s: %s", out_dir, exc)
        return EXIT_IO
    if STEP_FAILURE in (summary["outcome_primal"], summary["outcome_transformed"]):
        return EXIT_NUMERICAL
    return EXIT_OK


def _classify(summary: dict) -> tuple[str, float | None]:
    statuses = (summary["outcome_primal"], summary["outcome_transformed"])
    if STEP_FAILURE in statuses:
        return "FAILED", None
    tb, tt = summary["t_blowup"], summary["t_touchdown"]
    if tb is None and tt is None:
        return "global", None
    if tb is not None and tt is not None:
        return "singular", tt
    return "inconsistent", tt if tt is not None else tb


def _sweep_one(args):
    cfg, axis, value, out_dir = args
    try:
        cfg = cfg.replace(**{axis: value})
        summary = simulate(cfg)
        write_outputs(summary, cfg, out_dir)
        outcome, t_sing = _classify(summary)
        return (value, outcome, t_sing, summary["Lq0"], summary["theta_M"])
    except Exception as exc:   # a failed row must not sink the sweep
        logger.warning("sweep %s=%s failed: %s", axis, value, exc)
        return (value, "FAILED", None, None, None)


def sweep(cfg: ScenarioConfig, axis: str, values, jobs: int = 1, out_dir=None) -> int:
    """One scenario per axis value; rows keep the input order."""
    if axis not in SWEEP_AXES:
        logger.error("axis must be one of %s", ", ".join(SWEEP_AXES))
        return EXIT_CONFIG
    out_dir = Path(out_dir if out_dir is not None else cfg.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("cannot create %s: %s", out_dir, exc)
        return EXIT_IO
    tasks = [(cfg, axis, float(v), out_dir / f"{axis}={fmt(float(v))}") for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    try:
        write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, rows)
    except OSError as exc:
        logger.error("cannot write sweep table: %s", exc)
        return EXIT_IO
    if rows and all(r[1] == "FAILED" for r in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def verify_suites(M_values=(0.5, 1.0, 2.0), n: int = 1000, seed: int = 42) -> dict:
    """Randomized inequality suites; one report per (suite, M)."""
    specs = (DiffusionSpec.inverse(), DiffusionSpec.power(1.0), DiffusionSpec.log(1.0))
    reports = {}
    for M in M_values:
        reports[f"energy_M={fmt(M)}"] = prop23_suite(M, n, seed).to_dict()
        for spec in specs:
            reports[f"energy1_{spec.label()}_M={fmt(M)}"] = lab1_suite(spec, M, n, seed).to_dict()
    return reports
