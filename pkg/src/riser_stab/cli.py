"""Command line surface: check, simulate, sweep, verify-lemmas, fit.

Outputs are deterministic: identical configs (and seeds) produce
byte-identical CSV/JSON on one platform.  Sweep grid points run in parallel
processes; RISER_STAB_THREADS caps the worker count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configs import ScenarioConfig, load_scenario, validate_scenario, with_updates
from .control import check_conditions
from .diagnostics import (
    ENERGY_FIELDS,
    bounded_product_check,
    default_fit_window,
    energy_balance_residual,
    fit_exponential,
    fit_polynomial,
)
from .lemmas import run_lemma_suite
from .svgplot import line_plot_svg
from .timestepping import simulate

__all__ = ["main", "SweepSpec", "load_sweep", "run_sweep", "classify_trajectory"]

RATE_THRESHOLD = 1e-3
R2_FLOOR = 0.9


# --------------------------------------------------------------------------- io
def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_timeseries_csv(path, traj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(ENERGY_FIELDS) + "\n")
        cols = [traj.samples[name] for name in ENERGY_FIELDS]
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_timeseries_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows]) if rows else np.zeros((0, len(header)))
    return header, data


# ----------------------------------------------------------------------- checks
def cmd_check(args) -> int:
    try:
        cfg = load_scenario(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, ValueError) as err:
        print(f"error: cannot parse config: {err}", file=sys.stderr)
        return 2
    validation = validate_scenario(cfg)
    report = check_conditions(cfg.params, cfg.control, delta=cfg.delta_override)
    d = report.to_dict()
    d["validation"] = validation.violations

    print(f"lambda1  = {report.lambda1:.6g}")
    if report.delta is not None:
        print(f"delta    = {report.delta:.6g}" + (" (override)" if report.delta_overridden else ""))
    if report.D0 is not None:
        print(f"D0       = {report.D0:.6g}")
    if report.eps is not None:
        print(f"eps      = {report.eps:.6g}")
    print(f"h        = {report.h:.6g}   mu = {report.mu:.6g}")
    if cfg.params.a0 == 0.0:
        print("no destabilizing tension; control optional")
    for name in ("nonlinear", "linear"):
        hmax = getattr(report, f"h_max_{name}")
        mumin = getattr(report, f"mu_min_{name}")
        ok = getattr(report, f"satisfied_{name}")
        if hmax is None:
            print(f"{name}: thresholds inapplicable")
            continue
        print(
            f"{name}: h_max = {hmax:.6g}, mu_min = {mumin:.6g} -> "
            + ("satisfied" if ok else "NOT satisfied")
        )
    for key, val in sorted(report.derivation_variant_flags.items()):
        print(f"  variant {key}: {'pass' if val else 'fail'}")
    for note in report.notes:
        print(f"  note: {note}")
    if validation.violations:
        print("validation violations:")
        for v in validation.violations:
            print(f"  - {v}")
    if args.out:
        _write_json(args.out, d)
    return 0 if validation.ok else 1


# --------------------------------------------------------------------- simulate
def _fit_payload(cfg: ScenarioConfig, traj) -> dict:
    """Decay fits for one finished trajectory, with skip reasons."""
    values = traj.energy_norms()
    window = cfg.fit_window or default_fit_window(float(cfg.t_final))
    payload = {"window": list(window)}
    if len(values) == 0 or float(np.max(values)) == 0.0:
        payload["skipped"] = "zero energy"
        return payload
    mask = (traj.times >= window[0]) & (traj.times <= window[1])
    if np.any(values[mask] <= 0.0) or mask.sum() < 2:
        payload["skipped"] = "nonpositive or too few samples in window"
        return payload
    exp_fit = fit_exponential(traj.times, values, window)
    payload["exponential"] = exp_fit.to_dict()
    if cfg.mode == "nonlinear-damping":
        p = cfg.params.p
        claimed = (p + 1.0) / (p + 2.0)
        poly = fit_polynomial(traj.times, values, window, claimed_rate=claimed)
        payload["kind"] = "polynomial"
        payload["polynomial"] = poly.to_dict()
        payload["claimed_rates"] = {
            "theorem": claimed,
            "derivation_slowest_term": p / (p + 2.0),
        }
        if window[0] > 0:
            payload["bounded_product"] = bounded_product_check(
                traj.times, values, claimed, window
            ).to_dict()
        payload["rate"] = poly.rate
    else:
        payload["kind"] = "exponential"
        payload["rate"] = exp_fit.rate
    return payload


def _plot_payload(cfg, traj, fit, path):
    values = traj.energy_norms()
    series = [("||u_t||^2 + ||u_xx||^2", traj.times.tolist(), values.tolist())]
    window = fit.get("window")
    if "polynomial" in fit and window:
        # claimed power-law slope anchored at the window start
        t0 = max(window[0], 1e-6)
        i0 = int(np.argmin(np.abs(traj.times - t0)))
        if values[i0] > 0:
            claimed = fit["claimed_rates"]["theorem"]
            ts = [t for t in traj.times if t >= t0]
            ref = [values[i0] * (t / traj.times[i0]) ** (-claimed) for t in ts]
            series.append((f"reference slope t^-{claimed:.3g}", ts, ref))
    elif "exponential" in fit and window:
        rate = fit["exponential"]["rate"]
        i0 = int(np.argmin(np.abs(traj.times - window[0])))
        if values[i0] > 0 and rate > 0:
            ts = [t for t in traj.times if t >= window[0]]
            ref = [values[i0] * math.exp(-rate * (t - traj.times[i0])) for t in ts]
            series.append((f"reference rate {rate:.3g}", ts, ref))
    line_plot_svg(path, series, title=f"energy decay ({cfg.mode})", xlabel="t",
                  ylabel="||u_t||^2 + ||u_xx||^2")


def run_scenario(cfg: ScenarioConfig, out_dir) -> tuple[int, dict]:
    """Simulate one validated scenario and write every artifact to out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = simulate(cfg)
    _write_timeseries_csv(out / "timeseries.csv", traj)

    balance = energy_balance_residual(traj)
    energies = traj.energy_norms()
    report = {
        "mode": cfg.mode,
        "conditions": traj.conditions.to_dict(),
        "energy_balance_residual": balance.value,
        "energy_balance_relative": balance.relative,
        "initial_energy_norms": float(energies[0]) if len(energies) else 0.0,
        "final_energy_norms": float(energies[-1]) if len(energies) else 0.0,
        "n_samples": int(len(traj.times)),
        "scenario": cfg.to_dict(),
    }
    if traj.failure is not None:
        report["failure"] = traj.failure
    _write_json(out / "energy_report.json", report)

    fit = _fit_payload(cfg, traj) if traj.failure is None else {"skipped": "step failure"}
    _write_json(out / "decay_fit.json", fit)
    _plot_payload(cfg, traj, fit, out / "plot.svg")

    if traj.snapshots is not None:
        np.savez(
            out / "states.npz",
            t=traj.snapshot_times,
            u=traj.snapshots["u"],
            v=traj.snapshots["v"],
        )
    return (1 if traj.failure is not None else 0), {"trajectory": traj, "fit": fit}


def cmd_simulate(args) -> int:
    try:
        cfg = load_scenario(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    validation = validate_scenario(cfg)
    if not validation.ok:
        for v in validation.violations:
            print(f"invalid scenario: {v}", file=sys.stderr)
        return 2
    code, _ = run_scenario(cfg, args.out)
    if code:
        print("simulation aborted by step failure; partial outputs written", file=sys.stderr)
    return code


# ------------------------------------------------------------------------ sweep
@dataclass
class SweepSpec:
    """Cartesian parameter sweep around a base scenario."""

    base: ScenarioConfig
    axes: dict  # dotted path -> list of values
    rate_threshold: float = RATE_THRESHOLD
    r2_floor: float = R2_FLOOR

    def grid(self):
        names = list(self.axes)
        for name in names:
            if not self.axes[name]:
                raise ValueError(f"sweep axis '{name}' is empty")
        idx = [0] * len(names)
        while True:
            yield {n: self.axes[n][i] for n, i in zip(names, idx)}
            for pos in reversed(range(len(names))):
                idx[pos] += 1
                if idx[pos] < len(self.axes[names[pos]]):
                    break
                idx[pos] = 0
            else:
                return


def load_sweep(path) -> SweepSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    base_entry = raw.get("base")
    if isinstance(base_entry, str):
        base_path = Path(path).parent / base_entry
        base = load_scenario(base_path)
    else:
        base = load_scenario(base_entry or {})
    if not raw.get("axes"):
        raise ValueError("sweep config needs a nonempty 'axes' object")
    classify = raw.get("classify", {})
    return SweepSpec(
        base=base,
        axes=raw["axes"],
        rate_threshold=float(classify.get("rate_threshold", RATE_THRESHOLD)),
        r2_floor=float(classify.get("r2_floor", R2_FLOOR)),
    )


def _apply_axis(cfg: ScenarioConfig, path: str, value):
    """Rebind one dotted scenario path; sweeping a0 re-pins a constant tension."""
    d = cfg.to_dict()
    parts = path.split(".")
    node = d
    for key in parts[:-1]:
        if key not in node:
            raise ValueError(f"sweep axis references unknown field '{path}'")
        node = node[key]
    if parts[-1] not in node:
        raise ValueError(f"sweep axis references unknown field '{path}'")
    node[parts[-1]] = value
    if path == "params.a0" and d["params"]["tension"].get("type") == "constant":
        d["params"]["tension"] = {"type": "constant", "value": -float(value)}
    return load_scenario(d)


def classify_trajectory(cfg, traj, rate_threshold=RATE_THRESHOLD, r2_floor=R2_FLOOR):
    """Empirical stabilization flag and fitted rate for one finished run."""
    values = traj.energy_norms()
    window = cfg.fit_window or default_fit_window(float(cfg.t_final))
    mask = (traj.times >= window[0]) & (traj.times <= window[1])
    if mask.sum() < 2 or np.max(values) == 0.0:
        return True, 0.0, 1.0  # an identically zero run is trivially stabilized
    if np.any(values[mask] <= 0.0):
        return True, math.inf, 1.0  # reached exact zero inside the window
    if cfg.mode == "nonlinear-damping":
        p = cfg.params.p
        claimed = (p + 1.0) / (p + 2.0)
        fit = fit_polynomial(traj.times, values, window, claimed_rate=claimed)
        bp = bounded_product_check(traj.times, values, claimed, window)
        ok = bp.is_bounded or (fit.rate > rate_threshold and fit.r_squared > r2_floor)
        return bool(ok), fit.rate, fit.r_squared
    fit = fit_exponential(traj.times, values, window)
    ok = fit.rate > rate_threshold and fit.r_squared > r2_floor
    return bool(ok), fit.rate, fit.r_squared


def _sweep_point(payload):
    """Worker: run one grid point (scenario dict in, result row out)."""
    point = payload["point"]
    cfg = load_scenario(payload["scenario"])
    row = dict(point)
    validation = validate_scenario(cfg)
    if not validation.ok:
        row.update(status="invalid", error="; ".join(validation.violations))
        return row
    report = check_conditions(cfg.params, cfg.control, delta=cfg.delta_override)
    row["theorem_nonlinear"] = bool(report.satisfied_nonlinear)
    row["theorem_linear"] = bool(report.satisfied_linear)
    row["theorem_pass"] = bool(
        report.satisfied_nonlinear
        if cfg.mode == "nonlinear-damping"
        else report.satisfied_linear
    )
    try:
        traj = simulate(cfg)
    except Exception as err:  # propagate as a row, keep the sweep running
        row.update(status="error", error=str(err))
        return row
    if traj.failure is not None:
        row.update(status="step-failure", error=f"t={traj.failure['t']}")
        return row
    stabilized, rate, r2 = classify_trajectory(
        cfg, traj, payload["rate_threshold"], payload["r2_floor"]
    )
    row.update(status="ok", stabilized=stabilized, fitted_rate=rate, r_squared=r2)
    return row


def run_sweep(spec: SweepSpec, out_dir, max_workers=None) -> list[dict]:
    """Run every grid point (concurrently) and write the region table CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = list(spec.grid())
    payloads = []
    for point in points:
        cfg = spec.base
        for path, value in point.items():
            cfg = _apply_axis(cfg, path, value)
        payloads.append(
            {
                "point": point,
                "scenario": cfg.to_dict(),
                "rate_threshold": spec.rate_threshold,
                "r2_floor": spec.r2_floor,
            }
        )
    if max_workers is None:
        max_workers = int(os.environ.get("RISER_STAB_THREADS", os.cpu_count() or 1))
    max_workers = max(1, min(max_workers, len(payloads)))
    if max_workers == 1:
        rows = [_sweep_point(p) for p in payloads]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_point, payloads))

    axis_names = list(spec.axes)
    columns = axis_names + [
        "status",
        "theorem_pass",
        "theorem_nonlinear",
        "theorem_linear",
        "stabilized",
        "fitted_rate",
        "r_squared",
        "error",
    ]
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                val = row.get(col, "")
                if isinstance(val, bool):
                    cells.append("true" if val else "false")
                elif isinstance(val, float):
                    cells.append(repr(val))
                else:
                    cells.append(str(val))
            fh.write(",".join(cells) + "\n")
    return rows


def cmd_sweep(args) -> int:
    try:
        spec = load_sweep(args.config)
    except FileNotFoundError:
        print(f"error: sweep config not found: {args.config}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, ValueError) as err:
        print(f"error: bad sweep config: {err}", file=sys.stderr)
        return 2
    rows = run_sweep(spec, args.out, max_workers=args.threads)
    n_ok = sum(1 for r in rows if r.get("status") == "ok")
    unsound = [
        r for r in rows if r.get("status") == "ok" and r.get("theorem_pass") and not r.get("stabilized")
    ]
    print(f"sweep: {len(rows)} points, {n_ok} simulated, {len(unsound)} soundness violations")
    if unsound:
        for r in unsound:
            print(f"  UNSOUND: {r}", file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------------- verify/fit
def cmd_verify_lemmas(args) -> int:
    summaries = run_lemma_suite(n_samples=args.samples, seed=args.seed)
    worst = min(s.worst_relative_margin for s in summaries)
    violations = sum(s.n_violations for s in summaries)
    for s in summaries:
        print(
            f"{s.check:18s} {s.kind:18s} samples={s.n_samples:5d} "
            f"violations={s.n_violations} worst_rel_margin={s.worst_relative_margin:.3e}"
        )
    print(f"total violations: {violations}; worst relative margin: {worst:.3e}")
    if args.report:
        _write_json(
            args.report,
            {
                "samples_per_family": args.samples,
                "seed": args.seed,
                "total_violations": violations,
                "worst_relative_margin": worst,
                "checks": [s.to_dict() for s in summaries],
            },
        )
    return 0 if violations == 0 else 1


def cmd_fit(args) -> int:
    try:
        header, data = _read_timeseries_csv(args.csv)
    except FileNotFoundError:
        print(f"error: csv not found: {args.csv}", file=sys.stderr)
        return 2
    if "t" not in header:
        print("error: csv needs a 't' column", file=sys.stderr)
        return 2
    t = data[:, header.index("t")]
    if args.column:
        if args.column not in header:
            print(f"error: column '{args.column}' not in csv", file=sys.stderr)
            return 2
        values = data[:, header.index(args.column)]
    else:
        values = data[:, header.index("norm_v_sq")] + data[:, header.index("norm_uxx_sq")]
    window = tuple(args.window) if args.window else None
    payload = {}
    try:
        if args.kind in ("exponential", "both"):
            payload["exponential"] = fit_exponential(t, values, window).to_dict()
        if args.kind in ("polynomial", "both"):
            payload["polynomial"] = fit_polynomial(t, values, window).to_dict()
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        _write_json(args.out, payload)
    return 0


# ------------------------------------------------------------------------ main
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riser-stab",
        description="Simulate and verify finite-volume nudging stabilization of a clamped tensioned beam.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate stabilization thresholds for a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="run one scenario and write artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter sweep with per-point classification")
    p.add_argument("--config", required=True, help="sweep spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: RISER_STAB_THREADS or cpu count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-lemmas", help="randomized checks of the supporting inequalities")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", "--out", dest="report", default=None)
    p.set_defaults(func=cmd_verify_lemmas)

    p = sub.add_parser("fit", help="decay fit on an existing timeseries CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", choices=("exponential", "polynomial", "both"), default="exponential")
    p.add_argument("--column", default=None, help="value column (default: norm_v_sq + norm_uxx_sq)")
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
