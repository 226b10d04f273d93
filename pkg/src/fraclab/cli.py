"""Command-line front end: ``fraclab <command> [options]``.

Every numeric option may also come from a flat ``key = value`` config
file (``--config``) or from a previous run's ``manifest.json``; explicit
flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, io, orlicz, semigroup
from .fields import make_initial
from .grid import lq_norm, make_grid, support_measure
from .solver import (
    DIVERGED,
    Nonlinearity,
    SolveConfig,
    picard_continue,
    step_evolve,
)
from .verify import (
    BOUND,
    DecayCase,
    DecayTarget,
    decay_fit,
    inequality_suite,
    regime_classify,
    run_decay_case,
    select_parameters,
)

# key: (type, default)
PARAMS = {
    "n": (int, 1),
    "L": (float, 20.0),
    "N": (int, 1024),
    "beta": (float, 2.0),
    "t": (float, 1.0),
    "m": (float, 1.0),
    "p": (float, 2.0),
    "lambda": (float, 1.0),
    "sign": (int, 1),
    "ic": (str, "bump:amp=0.1,width=1"),
    "T": (float, 1.0),
    "scheme": (str, "etd"),
    "dt": (float, 0.01),
    "q": (float, 4.0),
    "r": (float, 1.0),
    "save_every": (int, 1),
    "picard_tol": (float, 1e-8),
    "max_iter": (int, 100),
    "quad_points": (int, 1000),
    "blow_threshold": (float, 1e6),
    "min_window": (float, 0.0),
    "seed": (int, 0),
    "kind": (str, "expLp"),
    "tol": (float, 1e-10),
    "t_start": (float, 10.0),
    "width": (float, 1.0),
    "exp_target": (float, 0.01),
    "k": (str, "0..20"),
    "variant": (str, BOUND),
    "t_min": (float, 0.01),
    "t_max": (float, 1.0),
    "points": (int, 20),
    "samples": (int, 100),
    "q_exp": (float, 1.0),
    "regime": (str, semigroup.SUBCRITICAL),
    "C": (float, 1.0),
}

COMMAND_KEYS = {
    "kernel": ["n", "L", "N", "beta", "t"],
    "norm": ["n", "L", "N", "ic", "seed", "kind", "p", "tol"],
    "evolve": ["n", "L", "N", "beta", "m", "p", "lambda", "sign", "ic", "T", "scheme", "dt",
               "q", "save_every", "picard_tol", "max_iter", "quad_points", "blow_threshold",
               "min_window", "seed"],
    "decay": ["n", "L", "N", "beta", "m", "p", "lambda", "sign", "q", "T", "dt", "t_start",
              "width", "exp_target", "save_every"],
    "regime": ["n", "beta", "p", "m"],
    "params": ["n", "beta", "p", "m", "q", "k", "variant"],
    "smoothing": ["n", "L", "N", "beta", "r", "q", "t_min", "t_max", "points", "ic", "seed"],
    "orlicz": ["n", "L", "N", "p", "q", "q_exp", "lambda", "samples", "seed"],
    "kappa": ["regime", "n", "beta", "p", "r", "C"],
    "sweep": ["n", "L", "N", "ic", "T", "dt", "q", "save_every", "blow_threshold", "sign", "seed"],
}

# per-command defaults that differ from the global table
COMMAND_DEFAULTS = {
    "smoothing": {"n": 1, "L": 32.0, "N": 65536, "ic": "indicator:amp=1,measure=0", "q": math.inf},
    "orlicz": {"L": 16.0, "N": 512, "q": 4.0},
    "kappa": {"n": 3, "beta": 1.0, "p": 2.0, "r": 4.0},
    "decay": {"T": 100.0, "t_start": 10.0, "dt": 0.1, "q": 24.0},
}

SWEEP_AXES = ("beta", "p", "m", "lambda", "amp")


class ConfigError(ValueError):
    pass


def _convert(key, raw):
    typ = PARAMS[key][0]
    try:
        if typ is float and isinstance(raw, str) and raw.strip().lower() in ("inf", "infinity"):
            return math.inf
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def load_config_file(path) -> dict:
    """Flat ``key = value`` text (``#`` comments) or a run manifest's parameters."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        return dict(data.get("parameters", data))
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        out[key.strip()] = val.strip()
    return out


def parse_config(command: str, flags: dict, file_values: dict | None = None) -> dict:
    """Merge defaults, file values and flags for ``command`` and validate them."""
    keys = COMMAND_KEYS[command]
    cfg = {k: PARAMS[k][1] for k in keys}
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    for source in (file_values or {}), flags:
        for k, v in source.items():
            if v is None:
                continue
            if k not in keys:
                raise ConfigError(f"unknown key {k!r} for {command}; allowed: {', '.join(keys)}")
            cfg[k] = _convert(k, v)
    _validate(command, cfg)
    return cfg


def _validate(command, cfg):
    if "beta" in cfg:
        semigroup.check_beta(cfg["beta"])
    if {"n", "L", "N"} <= cfg.keys():
        make_grid(cfg["n"], cfg["L"], cfg["N"])
    if command in ("evolve", "decay"):
        Nonlinearity(cfg["m"], cfg["p"], cfg["lambda"], cfg["sign"])
    if command in ("evolve", "decay", "sweep"):
        if not cfg["T"] > 0:
            raise ConfigError(f"T must be > 0, got {cfg['T']}")
        if not cfg["dt"] > 0:
            raise ConfigError(f"dt must be > 0, got {cfg['dt']}")
    if command == "evolve":
        if cfg["scheme"] not in ("etd", "picard"):
            raise ConfigError(f"scheme must be etd or picard, got {cfg['scheme']!r}")
        SolveConfig(cfg["T"], cfg["picard_tol"], cfg["max_iter"], cfg["quad_points"],
                    cfg["blow_threshold"])
    if command == "decay":
        DecayTarget(cfg["n"], cfg["beta"], cfg["p"], cfg["m"], cfg["q"])
    if command == "regime":
        regime_classify(cfg["n"], cfg["beta"], cfg["p"], cfg["m"])
    if command == "norm" and cfg["kind"] not in orlicz.KINDS:
        raise ConfigError(f"kind must be one of {orlicz.KINDS}, got {cfg['kind']!r}")


def parse_k_range(text: str):
    lo, sep, hi = text.partition("..")
    if sep:
        return range(int(lo), int(hi) + 1)
    return [int(v) for v in text.split(",") if v.strip()]


# --- commands ----------------------------------------------------------------

def _grid(cfg):
    return make_grid(cfg["n"], cfg["L"], cfg["N"])


def _emit(obj, out=None):
    text = io.dumps(obj)
    if out:
        io.write_json(out, obj)
    print(text)


def cmd_kernel(cfg, args):
    spec = _grid(cfg)
    k = semigroup.kernel_realspace(spec, cfg["beta"], cfg["t"])
    if args.out:
        io.write_grid_csv(args.out, k)
    mass = float(np.sum(k.values)) * spec.cell_volume
    _emit({"grid": spec.summary(), "beta": cfg["beta"], "t": cfg["t"], "mass": mass,
           "peak": float(k.values.max())})


def cmd_norm(cfg, args):
    u = io.read_grid_csv(args.input) if args.input else make_initial(_grid(cfg), cfg["ic"], cfg["seed"])
    res = orlicz.luxemburg_norm(u, orlicz.OrliczGauge(cfg["kind"], cfg["p"]), cfg["tol"])
    _emit({"kind": cfg["kind"], "p": cfg["p"], "norm": res.norm, "iterations": res.iterations,
           "support_measure": support_measure(u)})


SERIES_HEADER = ["t", "l1", "l2", "lq", "linf", "expLp"]


def series_row(t, u, q, p):
    return [t, lq_norm(u, 1), lq_norm(u, 2), lq_norm(u, q), lq_norm(u, math.inf),
            orlicz.exp_norm(u, p)]


def run_evolve(cfg, out_dir) -> dict:
    """Run one evolution and write ``manifest.json`` and ``series.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = _grid(cfg)
    f = Nonlinearity(cfg["m"], cfg["p"], cfg["lambda"], cfg["sign"])
    manifest = io.RunManifest("evolve", dict(cfg), spec.summary(), __version__)
    manifest.write(out / "manifest.json")
    u0 = make_initial(spec, cfg["ic"], cfg["seed"])
    rows = []
    if cfg["scheme"] == "etd":
        steps = int(math.ceil(cfg["T"] / cfg["dt"] - 1e-9))
        _, status = step_evolve(
            u0, f, cfg["beta"], cfg["dt"], steps, save_every=cfg["save_every"],
            blow_threshold=cfg["blow_threshold"],
            callback=lambda t, u: rows.append(series_row(t, u, cfg["q"], cfg["p"])))
    else:
        sc = SolveConfig(cfg["T"], cfg["picard_tol"], cfg["max_iter"], cfg["quad_points"],
                         cfg["blow_threshold"])
        traj, status = picard_continue(u0, f, cfg["beta"], sc, min_window=cfg["min_window"])
        last = len(traj.times) - 1
        for i, (t, u) in enumerate(zip(traj.times, traj.states)):
            if i % cfg["save_every"] == 0 or i == last:
                rows.append(series_row(t, u, cfg["q"], cfg["p"]))
    io.write_csv(out / "series.csv", SERIES_HEADER, rows)
    manifest.finalize(out / "manifest.json", [status.summary()])
    return {"outcome": status.outcome, "rows": rows, "status": status}


def cmd_evolve(cfg, args):
    if not args.out:
        raise ConfigError("evolve needs --out DIR")
    res = run_evolve(cfg, args.out)
    _emit({"outcome": res["outcome"], "out": str(args.out), "samples": len(res["rows"])})


def cmd_decay(cfg, args):
    case = DecayCase(cfg["n"], cfg["beta"], cfg["p"], cfg["m"], cfg["q"], cfg["L"], cfg["N"],
                     cfg["T"], cfg["dt"], cfg["t_start"], cfg["width"], cfg["exp_target"],
                     cfg["lambda"], cfg["sign"], cfg["save_every"])
    run = run_decay_case(case)
    summary = {"sigma": case.target.sigma, "slope": run.slope, "stderr": run.stderr,
               "envelope_C": run.envelope.C, "envelope_violations": run.envelope.violations,
               "amplitude": run.amplitude, "outcome": run.status.outcome}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_csv(out / "series.csv", ["t", "lq"], zip(run.times, run.norms))
        io.write_json(out / "fit.json", {"parameters": cfg, **summary})
    _emit(summary)


def cmd_regime(cfg, args):
    _emit(regime_classify(cfg["n"], cfg["beta"], cfg["p"], cfg["m"]).as_dict())


def cmd_params(cfg, args):
    rows = [select_parameters(cfg["n"], cfg["beta"], cfg["p"], cfg["m"], cfg["q"], k=k,
                              variant=cfg["variant"]).as_row()
            for k in parse_k_range(cfg["k"])]
    header = ["k", "theta", "rho", "a", "r", "identity_residual"]
    if args.out:
        io.write_csv(args.out, header, rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(io.fmt(v) for v in row))


def cmd_smoothing(cfg, args):
    u = make_initial(_grid(cfg), cfg["ic"], cfg["seed"])
    times = np.geomspace(cfg["t_min"], cfg["t_max"], cfg["points"])
    res = semigroup.smoothing_estimate(u, cfg["beta"], cfg["r"], cfg["q"], times)
    _emit({"slope": res.slope, "expected_slope": res.expected_slope,
           "max_constant": float(res.constants.max())}, args.out)


def cmd_orlicz(cfg, args):
    rep = inequality_suite(_grid(cfg), cfg["p"], cfg["q"], cfg["q_exp"], cfg["lambda"],
                           cfg["samples"], cfg["seed"])
    _emit({"samples": rep.samples, "violations": rep.violations,
           "applicable": rep.applicable}, args.out)


def cmd_kappa(cfg, args):
    r = cfg["r"] if cfg["regime"] == semigroup.SUBCRITICAL else None
    res = semigroup.kappa_integral(cfg["regime"], cfg["n"], cfg["beta"], cfg["p"], cfg["C"], r)
    _emit({"value": res.value, "estimates": res.estimates, "increments": res.increments,
           "converged": res.converged}, args.out)


# --- sweep ------------------------------------------------------------------

SUMMARY_HEADER = ["beta", "p", "m", "lambda", "amp", "outcome", "slope", "sigma_target"]


def _with_amp(ic: str, amp: float) -> str:
    kind, _, rest = ic.partition(":")
    opts = [o for o in rest.split(",") if o and not o.startswith("amp=")]
    return f"{kind}:" + ",".join([f"amp={amp!r}"] + opts)


def _sweep_one(job):
    idx, base, point, out_dir = job
    cfg = dict(base)
    cfg.update({k: point[k] for k in ("beta", "p", "m", "lambda")})
    cfg["ic"] = _with_amp(base["ic"], point["amp"])
    cfg["scheme"] = "etd"
    row = dict(point, outcome="Failed", slope="", sigma_target="")
    try:
        row["sigma_target"] = DecayTarget(cfg["n"], cfg["beta"], cfg["p"], cfg["m"], cfg["q"]).sigma
    except ValueError:
        pass
    try:
        _validate("evolve", cfg)
        res = run_evolve(cfg, Path(out_dir) / f"run_{idx:03d}")
        row["outcome"] = res["outcome"]
        if res["outcome"] != DIVERGED:
            t = np.array([r[0] for r in res["rows"]])
            y = np.array([r[3] for r in res["rows"]])
            try:
                row["slope"] = decay_fit(t, y, (cfg["T"] / 10, cfg["T"]))[0]
            except ValueError:
                pass
    except Exception as exc:  # recorded in the summary, the sweep continues
        row["outcome"] = f"Failed: {exc}"
    return row


def run_sweep(matrix, base: dict, out_dir, workers: int = 1) -> Path:
    """Run one ETD evolution per parameter tuple and write ``summary.csv``.

    ``matrix`` is a sequence of dicts with keys beta, p, m, lambda, amp.
    Runs go to ``out_dir/run_XXX``; the summary is written by this process
    only, row by row in matrix order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(i, base, dict(pt), str(out)) for i, pt in enumerate(matrix)]
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        fh.flush()

        def write(row):
            w.writerow([io.fmt(row[k]) if row[k] != "" else "" for k in SUMMARY_HEADER])
            fh.flush()

        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for row in pool.map(_sweep_one, jobs):
                    write(row)
        else:
            for job in jobs:
                write(_sweep_one(job))
    return out


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()] if text is not None else None


def cmd_sweep(cfg, args):
    if not args.out:
        raise ConfigError("sweep needs --out DIR")
    axes = {
        "beta": _floats(args.betas) or [2.0],
        "p": _floats(args.ps) or [2.0],
        "m": _floats(args.ms) or [1.0],
        "lambda": _floats(args.lambdas) or [1.0],
        "amp": _floats(args.amps) or [0.1],
    }
    matrix = [dict(zip(SWEEP_AXES, combo)) for combo in itertools.product(*axes.values())]
    base = dict(cfg, m=1.0, p=2.0, beta=2.0, scheme="etd", picard_tol=1e-8, max_iter=100,
                quad_points=1000, min_window=0.0, **{"lambda": 1.0})
    run_sweep(matrix, base, args.out, args.workers)
    _emit({"runs": len(matrix), "out": str(args.out)})


# --- argument parsing -----------------------------------------------------------

def _add_params(parser, keys):
    for k in keys:
        typ = PARAMS[k][0]
        flag = "--" + k.replace("_", "-")
        parser.add_argument(flag, dest=k, default=None, type=str,
                            help=f"{typ.__name__} (default {PARAMS[k][1]})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fraclab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, keys, handler, parent=sub, **kw):
        p = parent.add_parser(name, **kw)
        p.add_argument("--config", default=None, help="key = value file or manifest.json")
        p.add_argument("--out", default=None, help="output path")
        _add_params(p, keys)
        p.set_defaults(handler=handler, config_name=name)
        return p

    add("kernel", COMMAND_KEYS["kernel"], cmd_kernel, help="sample the semigroup kernel")
    p = add("norm", COMMAND_KEYS["norm"], cmd_norm, help="Luxemburg norm of a field")
    p.add_argument("--input", default=None, help="grid CSV instead of --ic")
    add("evolve", COMMAND_KEYS["evolve"], cmd_evolve, help="solve the semilinear problem")
    add("decay", COMMAND_KEYS["decay"], cmd_decay, help="measure the L^q decay rate")

    pv = sub.add_parser("verify", help="regime, parameter and inequality checks")
    vs = pv.add_subparsers(dest="check", required=True)
    for name, handler in [("regime", cmd_regime), ("params", cmd_params),
                          ("smoothing", cmd_smoothing), ("orlicz", cmd_orlicz),
                          ("kappa", cmd_kappa)]:
        add(name, COMMAND_KEYS[name], handler, parent=vs)

    p = add("sweep", COMMAND_KEYS["sweep"], cmd_sweep, help="parameter sweep of evolve runs")
    p.add_argument("--betas", default=None, help="comma-separated β values")
    p.add_argument("--ps", default=None, help="comma-separated p values")
    p.add_argument("--ms", default=None, help="comma-separated m values")
    p.add_argument("--lambdas", default=None, help="comma-separated λ values")
    p.add_argument("--amps", default=None, help="comma-separated amplitudes")
    p.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    name = args.config_name
    flags = {k: getattr(args, k) for k in COMMAND_KEYS[name]}
    try:
        file_values = load_config_file(args.config) if args.config else None
        cfg = parse_config(name, flags, file_values)
        args.handler(cfg, args)
    except (ValueError, OSError) as exc:
        print(f"fraclab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
