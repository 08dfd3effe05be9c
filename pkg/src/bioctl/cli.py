"""Command-line front end.

Thin adapters only: every subcommand parses the JSON scenario config,
calls the corresponding module and prints key=value lines; file artifacts
(CSV, SVG) land in --out.  Exit codes: 0 success, 1 domain or verdict
failure, 2 usage or config-shape failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import impulsim, mcharness, planner
from .kernels import (
    Allee,
    DomainError,
    HollingI,
    HollingII,
    HollingIV,
    Linear,
    Logistic,
    KernelSet,
    Proportional,
    UnboundedRatioError,
    validate_kernels,
)
from .orbit import PestFreeOrbit, ReleaseProgram, Verdict, floquet_multipliers, stability_verdict

__all__ = ["ConfigError", "load_config", "build_kernels", "main"]


class ConfigError(Exception):
    """Config file is missing, malformed, or has the wrong shape."""


_MODEL_ERRORS = (
    DomainError,
    UnboundedRatioError,
    planner.PeriodTooLargeError,
    impulsim.IntegrationError,
    impulsim.StateConsistencyError,
    impulsim.HorizonExceededError,
)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _emit(key: str, value) -> None:
    print(f"{key}={_fmt(value)}")


# --------------------------------------------------------------------------
# config parsing.  Shape problems (unknown keys, wrong types, missing
# sections) raise ConfigError (exit 2); out-of-range values fall through to
# the model dataclasses, whose DomainError exits 1.


def _check_keys(d: dict, allowed, where: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s): {', '.join(unknown)}")


def _num(d: dict, key: str, where: str, required: bool = True,
         default=None) -> Optional[float]:
    if key not in d:
        if required:
            raise ConfigError(f"{where}: missing key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: {key} must be a number")
    return float(v)


def _int(d: dict, key: str, default: int, where: str) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: {key} must be an integer")
    return v


def _section(cfg: dict, name: str, required: bool = True) -> Optional[dict]:
    if name not in cfg:
        if required:
            raise ConfigError(f"config: missing section {name!r}")
        return None
    v = cfg[name]
    if not isinstance(v, dict):
        raise ConfigError(f"config: {name} must be an object")
    return v


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _check_keys(raw, {"kernels", "program", "eil", "box", "sim", "mc"}, "config")
    return raw


_GROWTH = {
    "linear": (Linear, ("r",)),
    "logistic": (Logistic, ("r", "K")),
    "allee": (Allee, ("r", "A", "K")),
}
_RESPONSE = {
    "holling1": (HollingI, ("lam",)),
    "holling2": (HollingII, ("lam", "a")),
    "holling4": (HollingIV, ("lam", "a", "b")),
}


def _build_variant(d, table: dict, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: must be an object")
    t = d.get("type")
    if t not in table:
        raise ConfigError(
            f"{where}: type must be one of {', '.join(sorted(table))}; got {t!r}")
    cls, fields = table[t]
    _check_keys(d, {"type", *fields}, where)
    return cls(**{f: _num(d, f, where) for f in fields})


def build_kernels(cfg: dict) -> KernelSet:
    d = _section(cfg, "kernels")
    _check_keys(d, {"growth", "response", "numerical", "m"}, "kernels")
    for key in ("growth", "response", "numerical"):
        if key not in d:
            raise ConfigError(f"kernels: missing key {key!r}")
    growth = _build_variant(d["growth"], _GROWTH, "kernels.growth")
    response = _build_variant(d["response"], _RESPONSE, "kernels.response")
    nd = d["numerical"]
    if not isinstance(nd, dict) or nd.get("type") != "proportional":
        raise ConfigError("kernels.numerical: type must be 'proportional'")
    _check_keys(nd, {"type", "e"}, "kernels.numerical")
    numerical = Proportional(e=_num(nd, "e", "kernels.numerical"),
                             response=response)
    return KernelSet(growth=growth, response=response, numerical=numerical,
                     m=_num(d, "m", "kernels"))


def _build_program(cfg: dict, period_override=None) -> ReleaseProgram:
    d = _section(cfg, "program")
    _check_keys(d, {"mu", "T"}, "program")
    mu = _num(d, "mu", "program")
    T = period_override if period_override is not None else _num(d, "T", "program")
    return ReleaseProgram(mu=mu, T=float(T))


def _mu_only(cfg: dict) -> float:
    d = _section(cfg, "program")
    _check_keys(d, {"mu", "T"}, "program")
    return _num(d, "mu", "program")


def _build_eil(cfg: dict, required: bool = True) -> Optional[float]:
    eil = _num(cfg, "eil", "config", required=required)
    if eil is not None and not eil > 0:
        raise ConfigError("config: eil must be positive")
    return eil


def _build_box(cfg: dict) -> planner.UncertaintyBox:
    d = _section(cfg, "box")
    _check_keys(d, {"z0", "sigma", "m"}, "box")

    def pair(key):
        if key not in d:
            raise ConfigError(f"box: missing key {key!r}")
        v = d[key]
        ok = (isinstance(v, list) and len(v) == 2
              and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                      for x in v))
        if not ok:
            raise ConfigError(f"box: {key} must be a [lo, hi] pair")
        return float(v[0]), float(v[1])

    z0 = pair("z0")
    sg = pair("sigma")
    mm = pair("m")
    return planner.UncertaintyBox(z0[0], z0[1], sg[0], sg[1], mm[0], mm[1])


def _build_sim(cfg: dict) -> impulsim.SimConfig:
    d = _section(cfg, "sim", required=False)
    if d is None:
        return impulsim.SimConfig()
    allowed = ("rtol", "atol", "max_step", "t_end", "crossing_tol")
    _check_keys(d, allowed, "sim")
    kwargs = {k: _num(d, k, "sim") for k in allowed if k in d}
    return impulsim.SimConfig(**kwargs)


def _mc_settings(cfg: dict, args):
    d = _section(cfg, "mc", required=False) or {}
    _check_keys(d, {"trials", "seed", "engine", "bins"}, "mc")
    trials = args.trials if args.trials is not None else _int(d, "trials", 200_000, "mc")
    seed = args.seed if args.seed is not None else _int(d, "seed", 0, "mc")
    engine = args.engine if args.engine is not None else d.get("engine", "closed")
    bins = args.bins if args.bins is not None else _int(d, "bins", 50, "mc")
    if engine not in ("closed", "zsim", "full"):
        raise ConfigError(f"mc: engine must be closed, zsim or full; got {engine!r}")
    if trials < 1:
        raise ConfigError("mc: trials must be at least 1")
    if bins < 1:
        raise ConfigError("mc: bins must be at least 1")
    return trials, seed, engine, bins


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate_kernels(build_kernels(cfg))
    _emit("growth_slope0", report.growth_slope0)
    _emit("response_slope0", report.response_slope0)
    _emit("m", report.m)
    _emit("s_limit", report.s_limit)
    _emit("s_sup", report.s_sup)
    _emit("s_argmax", report.s_argmax)
    for name, ok in report.checks.items():
        _emit(f"check_{name}", ok)
    _emit("all_ok", report.all_ok)
    return 0 if report.all_ok else 1


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    k = build_kernels(cfg)
    program = _build_program(cfg, args.period)
    report = validate_kernels(k)
    verdict = stability_verdict(report, program)
    pest, predator = floquet_multipliers(report.growth_slope0,
                                         report.response_slope0,
                                         report.m, program)
    _emit("verdict", verdict.verdict.value)
    _emit("boundary", verdict.boundary)
    _emit("pest_multiplier", pest)
    _emit("predator_multiplier", predator)
    _emit("s_limit", verdict.s_limit)
    _emit("s_sup", verdict.s_sup)
    _emit("mu", program.mu)
    if verdict.note:
        _emit("note", verdict.note)
    return 1 if verdict.verdict is Verdict.UNSTABLE else 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    k = build_kernels(cfg)
    program = _build_program(cfg, args.period)
    eil = _build_eil(cfg, required=False)
    y0 = args.y0
    if y0 is None:
        y0 = PestFreeOrbit(program.mu, program.T, k.m).eval(args.t0, post=True)
    traj = impulsim.simulate(k, program, args.x0, y0, t0=args.t0,
                             cfg=_build_sim(cfg), eil=eil)
    out = _out_dir(args)
    path = os.path.join(out, "trajectory.csv")
    impulsim.trajectory_to_csv(traj, path)
    _emit("t_start", float(traj.ts[0]))
    _emit("t_end", float(traj.ts[-1]))
    _emit("samples", len(traj.ts))
    _emit("releases", len(traj.impulses))
    down = [t for t, label in traj.events if label == "down"]
    _emit("first_crossing", down[0] if down else math.nan)
    _emit("trajectory_csv", path)
    return 0


def cmd_damage(args) -> int:
    cfg = load_config(args.config)
    k = build_kernels(cfg)
    program = _build_program(cfg, args.period)
    eil = _build_eil(cfg)
    report = validate_kernels(k)
    if not report.all_ok:
        failed = [n for n, ok in report.checks.items() if not ok]
        raise DomainError("kernel checks failed: " + ", ".join(failed))
    if args.x0 is None and args.z0 is None:
        raise ConfigError("damage: give --x0 or --z0")
    if args.x0 is not None:
        x0 = args.x0
    else:
        x0 = planner.x_from_z_local(args.z0, eil, k.m, report.response_slope0)
    # conservative comparison model: pest pressure capped by the ratio
    # ceiling, so its crossing time bounds the full model's from above
    z0 = planner.z_from_x_global(x0, eil, k.m, k.response)
    p = planner.ZParams(sigma=report.s_sup, m=k.m, mu=program.mu, T=program.T)
    _emit("x0", float(x0))
    _emit("z0", z0)
    _emit("sigma", report.s_sup)
    _emit("decay_ceiling",
          planner.max_decay_period(program.mu, report.s_sup, k.m))
    pi_z = planner.damage_time(p, z0, t0=args.t0)
    pi_full, t_cross = impulsim.damage_time_full(k, program, x0, eil,
                                                 t0=args.t0,
                                                 cfg=_build_sim(cfg))
    _emit("pi_full", pi_full)
    _emit("pi_z", pi_z)
    _emit("crossing_t", t_cross)
    _emit("bound_ok", pi_full <= pi_z + 1e-6)
    return 0


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    k = build_kernels(cfg)
    mu = _mu_only(cfg)
    box = _build_box(cfg)
    if box.sigma_lo != box.sigma_hi:
        raise DomainError("optimize needs a single sigma value in the box")
    sigma = box.sigma_lo
    result = planner.optimal_periods(args.z0, mu, sigma, k.m)
    _emit("t1", result.t1)
    _emit("n0", result.n0)
    _emit("decay_ceiling", result.decay_ceiling)
    _emit("periods", ",".join(f"{t:.17g}" for t in result.periods))
    out = _out_dir(args)
    path = os.path.join(out, "period_sweep.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "pi_max", "deviation"])
        for T in result.periods:
            worst = planner.worst_invasion(
                planner.ZParams(sigma=sigma, m=k.m, mu=mu, T=T), args.z0)
            w.writerow([f"{T:.17g}", f"{worst.pi_max:.17g}",
                        f"{worst.deviation:.17g}"])
    _emit("sweep_csv", path)
    return 0


def cmd_robustness(args) -> int:
    cfg = load_config(args.config)
    mu = _mu_only(cfg)
    box = _build_box(cfg)
    t_lower, t_hat_min = planner.t_limits(box, mu)
    _emit("t_lower", t_lower)
    _emit("t_hat_min", t_hat_min)
    n = 200
    out = _out_dir(args)
    path = os.path.join(out, "robust_bound.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "bound", "T_L_flag"])
        for i in range(1, n + 1):
            T = t_hat_min * i / (n + 1)
            bound = planner.robust_envelope(T, box, mu)
            w.writerow([f"{T:.17g}", f"{bound:.17g}", int(T < t_lower)])
    _emit("points", n)
    _emit("bound_csv", path)
    return 0


def cmd_montecarlo(args) -> int:
    cfg = load_config(args.config)
    mu = _mu_only(cfg)
    box = _build_box(cfg)
    trials, seed, engine, bins = _mc_settings(cfg, args)
    kernels = eil = sim = None
    if engine == "full":
        kernels = build_kernels(cfg)
        eil = _build_eil(cfg)
        sim = _build_sim(cfg)
    mc_cfg = mcharness.McConfig(box=box, mu=mu, n_trials=trials, seed=seed,
                                engine=engine, kernels=kernels, eil=eil,
                                sim=sim)
    records = mcharness.run_mc(mc_cfg)
    report = mcharness.verify_envelope(records, box, mu, n_bins=bins)
    out = _out_dir(args)
    rec_path = os.path.join(out, "mc_records.csv")
    env_path = os.path.join(out, "mc_envelope.csv")
    mcharness.write_records_csv(records, rec_path)
    mcharness.write_envelope_csv(report, env_path)
    _emit("trials", trials)
    _emit("seed", seed)
    _emit("engine", engine)
    _emit("t_upper", report.t_upper)
    _emit("violations", report.violations)
    _emit("failed", sum(1 for r in records if r.failed))
    _emit("records_csv", rec_path)
    _emit("envelope_csv", env_path)
    return 1 if (report.violations > 0 and engine != "full") else 0


# --------------------------------------------------------------------------
# SVG scatter (no plotting dependency; the file is small and diff-able)

_SVG_W = 800
_SVG_H = 500
_SVG_PAD = 60
_SVG_MAX_POINTS = 4000


def render_scatter_svg(xs, ys, curve_x, curve_y, title: str,
                       x_label: str, y_label: str) -> str:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) > _SVG_MAX_POINTS:
        stride = int(math.ceil(len(xs) / _SVG_MAX_POINTS))
        xs, ys = xs[::stride], ys[::stride]
    all_x = np.concatenate([xs, curve_x]) if len(xs) else np.asarray(curve_x)
    all_y = np.concatenate([ys, curve_y]) if len(ys) else np.asarray(curve_y)
    x_lo, x_hi = float(all_x.min(initial=0.0)), float(all_x.max(initial=1.0))
    y_lo, y_hi = float(min(all_y.min(initial=0.0), 0.0)), float(all_y.max(initial=1.0))
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad
    w_in = _SVG_W - 2 * _SVG_PAD
    h_in = _SVG_H - 2 * _SVG_PAD

    def sx(x):
        return _SVG_PAD + (x - x_lo) / (x_hi - x_lo) * w_in

    def sy(y):
        return _SVG_H - _SVG_PAD - (y - y_lo) / (y_hi - y_lo) * h_in

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W / 2:.1f}" y="25" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    axis = (f'<line x1="{_SVG_PAD}" y1="{_SVG_H - _SVG_PAD}" '
            f'x2="{_SVG_W - _SVG_PAD}" y2="{_SVG_H - _SVG_PAD}" '
            'stroke="black"/>'
            f'<line x1="{_SVG_PAD}" y1="{_SVG_PAD}" x2="{_SVG_PAD}" '
            f'y2="{_SVG_H - _SVG_PAD}" stroke="black"/>')
    parts.append(axis)
    for i in range(5):
        tx = x_lo + (x_hi - x_lo) * i / 4
        px = sx(tx)
        parts.append(f'<line x1="{px:.2f}" y1="{_SVG_H - _SVG_PAD}" '
                     f'x2="{px:.2f}" y2="{_SVG_H - _SVG_PAD + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.2f}" y="{_SVG_H - _SVG_PAD + 20}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{tx:.3g}</text>')
        ty = y_lo + (y_hi - y_lo) * i / 4
        py = sy(ty)
        parts.append(f'<line x1="{_SVG_PAD - 5}" y1="{py:.2f}" '
                     f'x2="{_SVG_PAD}" y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{_SVG_PAD - 8}" y="{py + 4:.2f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{ty:.3g}</text>')
    parts.append(f'<text x="{_SVG_W / 2:.1f}" y="{_SVG_H - 15}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">{x_label}</text>')
    parts.append(f'<text x="18" y="{_SVG_H / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 18 {_SVG_H / 2:.1f})">{y_label}</text>')
    if y_lo < 0.0 < y_hi:
        zy = sy(0.0)
        parts.append(f'<line x1="{_SVG_PAD}" y1="{zy:.2f}" '
                     f'x2="{_SVG_W - _SVG_PAD}" y2="{zy:.2f}" '
                     'stroke="#bbbbbb" stroke-dasharray="4 3"/>')
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="1.5" '
                     'fill="#4878a8" fill-opacity="0.35"/>')
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(curve_x, curve_y))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#c0392b" '
                 'stroke-width="1.8"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(args) -> int:
    cfg = load_config(args.config)
    mu = _mu_only(cfg)
    box = _build_box(cfg)
    out = _out_dir(args)
    rec_path = os.path.join(out, "mc_records.csv")
    if not os.path.exists(rec_path):
        raise ConfigError(f"{rec_path}: not found (run montecarlo with the "
                          "same --out first)")
    Ts, devs = [], []
    with open(rec_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["failed"] == "0":
                Ts.append(float(row["T"]))
                devs.append(float(row["deviation"]))
    t_upper, _ = planner.t_limits(box, mu)
    curve_x = np.array([t_upper * (i + 1) / 201 for i in range(200)])
    curve_y = planner.envelope_bound_curve(curve_x, box, mu)
    svg = render_scatter_svg(
        Ts, devs, curve_x, curve_y,
        title="Damage-time deviation vs release period",
        x_label="release period T", y_label="Pi - T1")
    svg_path = os.path.join(out, "envelope.svg")
    with open(svg_path, "w", newline="\n") as fh:
        fh.write(svg)
    _emit("points", len(Ts))
    _emit("svg", svg_path)
    return 0


# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bioctl",
        description="Impulsive predator-release simulation and release-"
                    "schedule planning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, out=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario JSON file")
        if out:
            p.add_argument("--out", default=None,
                           help="output directory (default: current)")
        p.set_defaults(fn=fn)
        return p

    add("validate", cmd_validate, "check the kernel assumptions")

    p = add("stability", cmd_stability, "pest-free orbit stability verdict")
    p.add_argument("--period", type=float, default=None,
                   help="override the release period from the config")

    p = add("simulate", cmd_simulate, "integrate the full model", out=True)
    p.add_argument("--x0", type=float, required=True, help="initial pest density")
    p.add_argument("--y0", type=float, default=None,
                   help="initial predator density (default: release orbit)")
    p.add_argument("--t0", type=float, default=0.0, help="start time")
    p.add_argument("--period", type=float, default=None)

    p = add("damage", cmd_damage,
            "damage time, full model vs conservative comparison model")
    p.add_argument("--x0", type=float, default=None, help="initial pest density")
    p.add_argument("--z0", type=float, default=None,
                   help="initial transformed excess (alternative to --x0)")
    p.add_argument("--t0", type=float, default=0.0,
                   help="invasion phase within the release cycle")
    p.add_argument("--period", type=float, default=None)

    p = add("optimize", cmd_optimize,
            "release periods that drive the worst case to its floor", out=True)
    p.add_argument("--z0", type=float, required=True,
                   help="initial transformed excess")

    add("robustness", cmd_robustness,
        "worst-case deviation bound over the uncertainty box", out=True)

    p = add("montecarlo", cmd_montecarlo,
            "random-trial envelope experiment", out=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--engine", choices=("closed", "zsim", "full"), default=None)

    add("plot", cmd_plot, "scatter + bound SVG from montecarlo output",
        out=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except _MODEL_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
