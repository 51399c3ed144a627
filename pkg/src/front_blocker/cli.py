"""Command line entry point: front-blocker {wave,criterion,minimize,simulate,sweep,verify}.

Exit codes: 0 success, 1 certificate failure, 2 criterion not satisfied
(``verify`` stops there), 64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import config as config_mod
from .criterion import (
    CriterionReport, Form, SobolevConstants, evaluate, exponents_for, optimal_a_closed_form, optimize_a, summary_for,
)
from .drift import CrossSection, DriftField, DriftSummary
from .nonlinearity import ExtendedNonlinearity, NonlinearityConstants, compute_constants
from .simulator import InconclusiveError, run_and_classify
from .sobolev import estimate_c1, estimate_c2
from .supersolution import StabilizationResult, extend_and_certify, stabilize_in_R
from .traveling_wave import solve_wave

log = logging.getLogger("front_blocker")

EXIT_OK, EXIT_CERT, EXIT_UNSATISFIED, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- output helpers -----------------------------------------------------------------

def _plain(obj):
    """JSON-safe copy with deterministic float rendering."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _threads() -> int:
    raw = os.environ.get("FRONT_BLOCKER_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


# -- the criterion step shared by several subcommands ----------------------------------

@dataclass
class CriterionContext:
    nl: ExtendedNonlinearity
    nc: NonlinearityConstants
    cs: CrossSection
    drift: DriftField
    ds: DriftSummary
    sc: SobolevConstants
    report: CriterionReport
    a_mode: str


def _sobolev(cfg: dict, cs: CrossSection, n: int, drift: DriftField) -> SobolevConstants:
    if cfg["criterion"]["sobolev_mode"] == "configured":
        return config_mod.sobolev_constants(cfg)
    ex = exponents_for(n)
    c1 = estimate_c1(cs, float(ex.q)).value
    c2 = estimate_c2(cs, float(ex.p), float(ex.m), drift.x0).value
    return SobolevConstants(c1, c2, "estimated")


def run_criterion(cfg: dict, *, n: int | None = None, snap: float | None = None) -> CriterionContext:
    """Evaluate the criterion; ``snap`` rounds a to a multiple of the axial grid spacing."""
    cs = config_mod.build_cross_section(cfg, n)
    n = cs.n
    nl = config_mod.build_nonlinearity(cfg)
    nc = compute_constants(nl)
    drift = config_mod.build_drift(cfg)
    ex = exponents_for(n)
    sec = cfg["criterion"]
    ds = summary_for(drift, cs, n, quad_resolution=int(sec["quad_resolution"]))
    sc = _sobolev(cfg, cs, n, drift)
    form = Form(sec["form"])
    if sec["optimize_a"]:
        a, _ = optimize_a(nc, sc, ds, ex, cs, tuple(sec["a_range"]), form)
        mode = "optimized"
    elif sec["a"] > 0.0:
        a, mode = sec["a"], "configured"
    else:
        a, mode = optimal_a_closed_form(nc), "closed_form"
    if snap:
        a = max(snap, round(a / snap) * snap)
        mode += "_snapped"
    rep = evaluate(nc, sc, ds, ex, cs, a, form)
    return CriterionContext(nl, nc, cs, drift, ds, sc, rep, mode)


def _criterion_payload(ctx: CriterionContext, cfg: dict) -> dict:
    return {"report": ctx.report.as_dict(), "a_mode": ctx.a_mode, "config": cfg,
            "nonlinearity_constants": asdict(ctx.nc)}


# -- subcommands --------------------------------------------------------------------

def cmd_wave(args, cfg, out) -> int:
    if args.theta is not None:
        cfg["nonlinearity"].update(kind="cubic", theta=args.theta)
    nl = config_mod.build_nonlinearity(cfg)
    w = solve_wave(nl, spacing=args.spacing)
    buf = ["z,phi"] + [f"{z!r},{p!r}" for z, p in zip(w.z.tolist(), w.phi.tolist())]
    _write(out, "wave.csv", "\n".join(buf) + "\n")
    _write(out, "wave.dat", "\n".join(f"{z!r} {p!r}" for z, p in zip(w.z.tolist(), w.phi.tolist())) + "\n")
    payload = {"c": w.c, "lam_left": w.lam_left, "lam_right": w.lam_right, "mismatch": w.mismatch,
               "z_min": w.z[0], "z_max": w.z[-1], "config": cfg}
    _write(out, "wave.json", dumps(payload))
    print(f"c = {w.c!r}")
    return EXIT_OK


def cmd_criterion(args, cfg, out) -> int:
    if args.form:
        cfg["criterion"]["form"] = args.form
    if args.optimize_a:
        cfg["criterion"]["optimize_a"] = True
    if args.sobolev_c1 is not None:
        cfg["criterion"]["sobolev_c1"] = args.sobolev_c1
    if args.sobolev_c2 is not None:
        cfg["criterion"]["sobolev_c2"] = args.sobolev_c2
    ctx = run_criterion(cfg, n=args.n)
    text = dumps(_criterion_payload(ctx, cfg))
    _write(out, "criterion.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def _field_csv(values: np.ndarray, grid) -> str:
    x1, ys = grid.coords()
    cols = ["x1"] + [f"y{i + 2}" for i in range(grid.cs.dim)] + ["w"]
    flat = np.column_stack([x1.ravel(), ys.reshape(-1, grid.cs.dim), values.ravel()])
    return ",".join(cols) + "\n" + "\n".join(",".join(repr(float(v)) for v in row) for row in flat) + "\n"


def _minimize(cfg: dict, ctx: CriterionContext) -> tuple[StabilizationResult, object]:
    m = cfg["minimizer"]
    st = stabilize_in_R(ctx.drift, ctx.cs, ctx.nl, ctx.report.delta, m["R"], ctx.report.a_used, m["h1"],
                        int(m["n_cross"]), config_mod.minimizer_config(cfg))
    cert = extend_and_certify(st.w_inf, ctx.drift, ctx.nl, tol=m["certify_tol"], extension=m["extension"],
                              raise_on_failure=False)
    return st, cert


def _minimize_payload(st: StabilizationResult, cert) -> dict:
    runs = [{"R": g.R, "iterations": r.iterations, "converged": r.converged, "energy": r.energy,
             "energy_w0": r.energy_w0, "distance_to_w0": r.distance_to_w0, "delta": r.ball_radius_used,
             "el_residual": r.el_residual, "constraint_active": r.constraint_active, "w_min": r.w_min,
             "w_max": r.w_max} for g, r in zip(st.grids, st.results)]
    return {"runs": runs, "cauchy_gaps": st.cauchy_gaps, "gaps_decreasing": st.decreasing,
            "certificate": {"passed": cert.passed, "failures": cert.failures,
                            "interior_residual": cert.interior_residual,
                            "junction_slope_min": cert.junction_slope_min,
                            "junction_residual": cert.junction_residual_max,
                            "w_min": cert.w_min, "w_max": cert.w_max}}


def _minimize_ok(st: StabilizationResult, cert) -> bool:
    return (cert.passed and st.decreasing
            and all(r.converged and not r.constraint_active and r.energy <= r.energy_w0 for r in st.results))


def cmd_minimize(args, cfg, out) -> int:
    ctx = run_criterion(cfg, snap=cfg["minimizer"]["h1"])
    st, cert = _minimize(cfg, ctx)
    payload = _minimize_payload(st, cert)
    payload["criterion"] = ctx.report.as_dict()
    payload["config"] = cfg
    _write(out, "w.csv", _field_csv(st.w_inf.values, st.w_inf.grid))
    _write(out, "certificate.json", dumps(payload))
    sys.stdout.write(dumps({k: payload[k] for k in ("cauchy_gaps", "gaps_decreasing", "certificate")}))
    return EXIT_OK if _minimize_ok(st, cert) else EXIT_CERT


def _trace_files(out: Path | None, trace) -> None:
    rows = zip(trace.times.tolist(), trace.positions.tolist())
    rows = list(rows)
    _write(out, "trace.csv", "t,x_f\n" + "\n".join(f"{t!r},{x!r}" for t, x in rows) + "\n")
    _write(out, "trace.dat", "\n".join(f"{t!r} {x!r}" for t, x in rows) + "\n")


def _simulate(cfg: dict, nl, cs, drift, w_tilde=None, *, anchor=None, x_minus=None, frames=False):
    wave = solve_wave(nl)
    plan = config_mod.sim_config(cfg, wave.c, anchor=anchor, x_minus=x_minus)
    sim_cfg = plan.cfg
    if frames:
        sim_cfg = type(sim_cfg)(**{**sim_cfg.__dict__, "keep_frames": True})
    return wave, run_and_classify(sim_cfg, cs, nl, drift, wave, w_tilde)


def cmd_simulate(args, cfg, out) -> int:
    cs = config_mod.build_cross_section(cfg)
    nl = config_mod.build_nonlinearity(cfg)
    drift = config_mod.build_drift(cfg)
    try:
        wave, trace = _simulate(cfg, nl, cs, drift, frames=args.frames)
    except InconclusiveError as exc:
        log.error("%s", exc)
        return EXIT_CERT
    _trace_files(out, trace)
    if args.frames and out is not None:
        fdir = out / "frames"
        fdir.mkdir(parents=True, exist_ok=True)
        for i, (t, u) in enumerate(trace.frames):
            line = u[(slice(None),) + (u.shape[1] // 2,) * (u.ndim - 1)]
            body = "\n".join(f"{x!r},{v!r}" for x, v in zip(trace.x1.tolist(), line.tolist()))
            (fdir / f"frame_{i:05d}.csv").write_text(f"# t={t!r}\nx1,u\n{body}\n")
    payload = {"wave_speed": wave.c, "trace": trace.as_dict(), "config": cfg}
    text = dumps(payload)
    _write(out, "verdict.json", text)
    sys.stdout.write(text)
    return EXIT_OK


_SWEEP_TARGET = {"C": ("drift", "C"), "eps": ("drift", "eps"), "theta": ("nonlinearity", "theta"), "n": None}


def _sweep_point(cfg: dict, param: str, value, simulate: bool) -> dict:
    local = copy.deepcopy(cfg)
    n = None
    if param == "n":
        n = int(value)
    else:
        sec, key = _SWEEP_TARGET[param]
        local[sec][key] = float(value)
        if param in ("C", "eps") and local["drift"]["kind"] != "concentrated":
            local["drift"]["kind"] = "concentrated"
    ctx = run_criterion(local, n=n)
    label = "not_run"
    if simulate:
        try:
            _, trace = _simulate(local, ctx.nl, ctx.cs, ctx.drift)
            label = trace.classification
        except InconclusiveError:
            label = "inconclusive"
    return {"value": value, "satisfied": ctx.report.satisfied, "lhs": ctx.report.lhs, "rhs": ctx.report.rhs,
            "classification": label}


def cmd_sweep(args, cfg, out) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if args.param == "n":
        values = sorted({int(round(v)) for v in np.linspace(args.start, args.stop, args.steps)})
    else:
        values = np.linspace(args.start, args.stop, args.steps).tolist()
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda v: _sweep_point(cfg, args.param, v, args.simulate), values))
    lines = [f"{args.param},satisfied,lhs,rhs,classification"]
    for r in rows:
        lines.append(f"{r['value']!r},{str(r['satisfied']).lower()},{r['lhs']!r},{r['rhs']!r},{r['classification']}")
    text = "\n".join(lines) + "\n"
    _write(out, "sweep.csv", text)
    _write(out, "sweep.dat", "\n".join(f"{r['value']!r} {int(r['satisfied'])} {r['lhs']!r} {r['rhs']!r}"
                                       for r in rows) + "\n")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args, cfg, out) -> int:
    h1 = cfg["minimizer"]["h1"]
    ctx = run_criterion(cfg, snap=h1)
    payload: dict = {"config": cfg, "criterion": ctx.report.as_dict(), "stage": "criterion"}
    if not ctx.report.satisfied:
        payload["verdict"] = "criterion_unsatisfied"
        _write(out, "verify.json", dumps(payload))
        sys.stdout.write(dumps({"verdict": payload["verdict"], "lhs": ctx.report.lhs, "rhs": ctx.report.rhs}))
        return EXIT_UNSATISFIED
    st, cert = _minimize(cfg, ctx)
    payload.update(_minimize_payload(st, cert), stage="minimize")
    ok = _minimize_ok(st, cert)
    if ok:
        payload["stage"] = "simulate"
        try:
            _, trace = _simulate(cfg, ctx.nl, ctx.cs, ctx.drift, cert.extended, anchor=ctx.report.a_used,
                                 x_minus=st.grids[-1].R)
            payload["simulation"] = trace.as_dict()
            _trace_files(out, trace)
            ok = trace.classification == "blocked" and trace.comparison_max <= cfg["simulator"]["comparison_tol"]
        except InconclusiveError as exc:
            payload["simulation"] = {"error": str(exc)}
            ok = False
    payload["verdict"] = "certified" if ok else "certificate_failed"
    _write(out, "verify.json", dumps(payload))
    _write(out, "w.csv", _field_csv(st.w_inf.values, st.w_inf.grid))
    summary = {"verdict": payload["verdict"], "stage": payload["stage"], "cauchy_gaps": st.cauchy_gaps,
               "certificate_passed": cert.passed}
    if "simulation" in payload:
        summary["simulation"] = payload["simulation"]
    sys.stdout.write(dumps(summary))
    return EXIT_OK if ok else EXIT_CERT


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="front-blocker", description="Drift-induced blocking of bistable fronts in cylinders.")
    p.add_argument("--config", help="scenario TOML file")
    p.add_argument("--out", help="directory for artifacts (default: [output].dir of the scenario)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("wave", help="traveling wave speed and profile")
    w.add_argument("--theta", type=float)
    w.add_argument("--spacing", type=float, default=0.005)

    c = sub.add_parser("criterion", help="evaluate the blocking criterion")
    c.add_argument("--n", type=int)
    c.add_argument("--form", choices=[f.value for f in Form])
    c.add_argument("--optimize-a", action="store_true")
    c.add_argument("--sobolev-c1", type=float)
    c.add_argument("--sobolev-c2", type=float)

    sub.add_parser("minimize", help="constrained minimisation, R-stabilisation and certificate")

    s = sub.add_parser("simulate", help="direct simulation and front classification")
    s.add_argument("--frames", action="store_true", help="dump centreline frames every stride steps")

    sw = sub.add_parser("sweep", help="criterion (and optionally simulation) over one parameter")
    sw.add_argument("--param", choices=sorted(_SWEEP_TARGET), required=True)
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--steps", type=int, required=True)
    sw.add_argument("--simulate", action="store_true")

    sub.add_parser("verify", help="criterion -> minimise -> certify -> simulate -> compare")
    return p


_COMMANDS = {"wave": cmd_wave, "criterion": cmd_criterion, "minimize": cmd_minimize, "simulate": cmd_simulate,
             "sweep": cmd_sweep, "verify": cmd_verify}


def run_subcommand(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config)
        out = Path(args.out) if args.out else Path(cfg["output"]["dir"])
        log.info("resolved scenario: %s", json.dumps(_plain(cfg), sort_keys=True))
        return _COMMANDS[args.command](args, cfg, out)
    except (config_mod.ConfigError, UsageError, ValueError) as exc:
        # ValueError covers input validation in the numerical modules (bad theta, n < 3, ...)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
