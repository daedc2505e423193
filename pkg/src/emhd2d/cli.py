"""Command-line entry point: ``emhd2d <subcommand> [options]``.

Output directory precedence is ``--out``, then ``$EMHD2D_OUT``, then the
config's ``output_dir``. Exit codes: 0 success, 1 failed verification,
2 invalid configuration or arguments, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import diagnostics as dg
from . import linear, lp, storage
from .integrate import IntegrationError, Trajectory, integrate

OUT_ENV = "EMHD2D_OUT"


class UsageError(ValueError):
    """Bad command-line value; reported with exit status 2."""


def _out_dir(arg: str | None, fallback: str) -> Path:
    out = Path(arg or os.environ.get(OUT_ENV) or fallback)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _write_timing(out: Path, started: str, wall: float, extra: dict | None = None) -> Path:
    doc = {"started": started, "finished": _now(), "wall_seconds": wall}
    doc.update(extra or {})
    return storage.write_json(out / "timing.json", doc)


def _load(path: str | None) -> storage.RunConfig:
    if path is None:
        return storage.RunConfig()
    try:
        return storage.load_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


def _config_doc(cfg: storage.RunConfig) -> dict:
    # the output location does not affect results, so it stays out of the manifest
    doc = storage.config_echo(cfg)
    doc.pop("output_dir", None)
    return doc


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"config error at '{key}': {err['msg']}")
    return "\n".join(lines)


# -- simulate / linear -----------------------------------------------------


def _linear_trajectory(state0, icfg) -> Trajectory:
    n_out = icfg.n_steps // icfg.output_stride
    times = [state0.time + i * icfg.output_stride * icfg.dt for i in range(n_out + 1)]
    states = [state0] + [linear.propagate_linear_grid(state0, t - state0.time) for t in times[1:]]
    return Trajectory(tuple(times), tuple(states), icfg, ())


def _emit_run(out: Path, cfg: storage.RunConfig, traj: Trajectory, kind: str) -> list[Path]:
    dcfg = cfg.diagnostics.build()
    records = dg.evaluate_trajectory(traj.times, traj.states, dcfg)
    files = [storage.write_csv(out / "diagnostics.csv", dg.csv_columns(dcfg), [r.row(dcfg) for r in records])]
    files.append(storage.checkpoint_write(traj.final, out / "final.ckpt"))
    if cfg.plots:
        t = [r.time for r in records]
        series = {}
        for name in ("E", "D", "E_s"):
            vals = [getattr(r, name) for r in records]
            series[f"log10 {name}"] = (t, [math.log10(v) if v > 0 else math.nan for v in vals])
        files.append(
            storage.atomic_write_text(out / "norms.svg", storage.svg_line_plot(series, f"{kind} run: energy functionals", "t", "log10 value"))
        )
    return files


def cmd_run(args, kind: str) -> int:
    cfg = _load(args.config)
    out = _out_dir(args.out, cfg.output_dir)
    started, t0 = _now(), time.perf_counter()
    state0 = storage.initial_state(cfg)
    icfg = cfg.integrator.build()
    try:
        traj = integrate(state0, icfg) if kind == "simulate" else _linear_trajectory(state0, icfg)
    except IntegrationError as exc:
        snap = storage.checkpoint_write(exc.snapshot, out / "abort.ckpt")
        print(f"numerical abort: {exc}; last finite state written to {snap}", file=sys.stderr)
        return 3
    files = _emit_run(out, cfg, traj, kind)
    cert = dg.certify(state0.grid, cfg.diagnostics.eps1)
    extra = {"command": kind, "warnings": list(traj.warnings)}
    storage.write_json(out / "manifest.json", storage.build_manifest(_config_doc(cfg), files, out, cert, extra))
    _write_timing(out, started, time.perf_counter() - t0)
    if not args.quiet:
        print(f"{kind}: {len(traj)} snapshots to t={traj.times[-1]:g}; outputs in {out}")
    return 0


# -- decay-fit -------------------------------------------------------------


def _pair(text: str, name: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--{name} expects two comma-separated numbers, got {text!r}") from exc
    return a, b


def cmd_decay_fit(args) -> int:
    window = _pair(args.window, "window")
    if not 0 < window[0] < window[1]:
        raise UsageError("--window must satisfy 0 < t0 < t1")
    ks = [args.k] if args.k is not None else [0, 1, 2]
    try:
        profile = linear.DecayProfile(s=args.s, shape=args.shape)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args.out, "runs/decay")
    started, t0 = _now(), time.perf_counter()
    times = np.geomspace(window[0], window[1], args.samples)
    rows, fits, series, overlays = [], {}, {}, {}
    columns = ["time"] + [f"norm_k{k}" for k in ks]
    values = {k: linear.decay_quadrature(profile, times, k) for k in ks}
    for i, t in enumerate(times):
        rows.append([float(t)] + [float(values[k][i]) for k in ks])
    lt = np.log10(times)
    for k in ks:
        slope, r2 = dg.fit_decay(times, values[k], window)
        fits[str(k)] = {"exponent": slope, "r2": r2, "stated": -(args.s + k) / 2}
        series[f"k={k}"] = (lt, np.log10(values[k]))
        icpt = float(np.mean(np.log10(values[k]) - slope * lt))
        overlays[f"fit k={k}: {slope:.4f}"] = (lt, icpt + slope * lt)
    files = [storage.write_csv(out / "decay.csv", columns, rows)]
    report = {"s": args.s, "shape": args.shape, "window": list(window), "fits": fits}
    files.append(storage.write_json(out / "decay.json", report))
    svg = storage.svg_line_plot(series, f"linear decay, s={args.s:g}", "log10 t", "log10 norm", overlays)
    files.append(storage.atomic_write_text(out / "decay.svg", svg))
    storage.write_json(out / "manifest.json", storage.build_manifest(report, files, out, extra={"command": "decay-fit"}))
    _write_timing(out, started, time.perf_counter() - t0)
    if not args.quiet:
        for k in ks:
            print(f"k={k}: exponent {fits[str(k)]['exponent']:.4f} (r2 {fits[str(k)]['r2']:.6f})")
    return 0


# -- lp-analyze ------------------------------------------------------------


def cmd_lp_analyze(args) -> int:
    try:
        state = storage.checkpoint_read(args.snapshot)
    except (OSError, storage.CheckpointError) as exc:
        raise UsageError(f"cannot read snapshot {args.snapshot}: {exc}") from exc
    out = _out_dir(args.out, "runs/lp")
    field = state.psi if args.field == "psi" else state.b
    dec = lp.decompose(field)
    energies = dec.energies()
    rows = [[j, k, energies[(j, k)]] for j in dec.j_range for k in dec.k_range]
    files = [storage.write_csv(out / f"lp_blocks_{args.field}.csv", ["j", "k", "energy"], rows)]
    extra = {"command": "lp-analyze", "snapshot_sha256": storage.sha256_file(args.snapshot), "time": state.time}
    storage.write_json(out / "manifest.json", storage.build_manifest({"field": args.field}, files, out, extra=extra))
    if not args.quiet:
        total = sum(energies.values())
        print(f"{len(rows)} blocks, total block energy {total:.6e}, field norm^2 {field.norm2():.6e}")
    return 0


# -- dispersion ------------------------------------------------------------


def _complex(text: str, name: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise UsageError(f"--{name} expects a complex number such as 1+0.5j, got {text!r}") from exc


def _cjson(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def cmd_dispersion(args) -> int:
    xi = _pair(args.xi, "xi")
    if xi == (0.0, 0.0):
        raise UsageError("--xi must be a nonzero frequency")
    sol = linear.mode_solution(xi, _complex(args.psi0, "psi0"), _complex(args.b0, "b0"))
    doc = {
        "xi": list(xi),
        "regime": sol.regime,
        "lambda_plus": _cjson(sol.lambda_plus),
        "lambda_minus": _cjson(sol.lambda_minus),
        "c1": _cjson(sol.c1),
        "c2": _cjson(sol.c2),
    }
    print(json.dumps(doc, indent=2))
    return 0


# -- verify ----------------------------------------------------------------


def _parse_only(text: str | None):
    from .verify import CRITERIA

    if not text:
        return None
    try:
        nums = sorted({int(v) for v in text.split(",")})
    except ValueError as exc:
        raise UsageError(f"--only expects comma-separated criterion numbers, got {text!r}") from exc
    bad = [n for n in nums if n not in CRITERIA]
    if bad:
        raise UsageError(f"unknown criteria: {bad}")
    return nums


def cmd_verify(args) -> int:
    from . import verify

    only = _parse_only(args.only)
    out = _out_dir(args.out, "runs/verify")
    started, t0 = _now(), time.perf_counter()
    results, timings = verify.run(only, echo=None if args.quiet else print)
    report = {"criteria": [r.as_dict() for r in results], "passed": all(r.passed for r in results)}
    files = [storage.write_json(out / "report.json", report)]
    storage.write_json(out / "manifest.json", storage.build_manifest({"only": only}, files, out, extra={"command": "verify"}))
    _write_timing(out, started, time.perf_counter() - t0, {"criteria_seconds": {str(k): v for k, v in timings.items()}})
    return 0 if report["passed"] else 1


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emhd2d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary line")

    for name, text in (("simulate", "nonlinear run with diagnostics"), ("linear", "exact linear propagator run")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="JSON run configuration (defaults used if omitted)")
        common(sp)

    sp = sub.add_parser("decay-fit", help="quadrature decay series and fitted exponents")
    sp.add_argument("--s", type=float, default=0.45)
    sp.add_argument("--k", type=int, choices=(0, 1, 2), help="derivative order (all of 0, 1, 2 if omitted)")
    sp.add_argument("--shape", choices=("d8", "borderline"), default="d8")
    sp.add_argument("--window", default="100,10000", help="fit window t0,t1")
    sp.add_argument("--samples", type=int, default=16, help="log-spaced sample times in the window")
    common(sp)

    sp = sub.add_parser("lp-analyze", help="Littlewood-Paley block energies of a checkpoint")
    sp.add_argument("--snapshot", required=True, help="checkpoint file")
    sp.add_argument("--field", choices=("psi", "b"), default="b")
    common(sp)

    sp = sub.add_parser("dispersion", help="roots and mode coefficients for one frequency")
    sp.add_argument("--xi", required=True, help="frequency xi1,xi2")
    sp.add_argument("--psi0", default="0", help="initial psi coefficient (complex)")
    sp.add_argument("--b0", default="1", help="initial b coefficient (complex)")

    sp = sub.add_parser("verify", help="run the acceptance criteria")
    sp.add_argument("--only", help="comma-separated criterion numbers")
    common(sp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": lambda a: cmd_run(a, "simulate"),
        "linear": lambda a: cmd_run(a, "linear"),
        "decay-fit": cmd_decay_fit,
        "lp-analyze": cmd_lp_analyze,
        "dispersion": cmd_dispersion,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(_format_validation(exc), file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except linear.QuadratureError as exc:
        print(f"quadrature error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
