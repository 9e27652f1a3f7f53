"""Command-line campaigns: ``erwlab <command> [flags]``.

Every Monte Carlo campaign runs replicate r on the stream (seed, r) and
writes rows in replicate order, so the output bytes depend only on the
resolved config.  The thread count and wall time are reported on stderr
and are deliberately left out of the data file.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 resource error.
"""

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, embedding, exact, limits, stats, verify, walk
from ._backend import resolve
from .coeffs import MemoryParam
from .errors import ResourceError
from .io import FORMATS, dumps
from .parallel import default_threads, run_replicates
from .rng import MAX_SEED

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3

COMMON = {"p": 0.5, "seed": 0, "format": "csv", "out": "-", "threads": None}

DEFAULTS = {
    "simulate": {"k": 0, "n": 100, "replicates": 10, "mode": "marginal", "demo": False},
    "zeros": {"k": 0, "n": 1024, "replicates": 1000, "exact": True},
    "return-tail": {"k": 0, "cap": 1024, "replicates": 10000, "points": 16},
    "exact": {"k": 0, "horizon": 64, "killed": False},
    "embed": {"k": 0, "n": 64, "replicates": 100, "method": "grid",
              "res": embedding.RESOLUTION, "shell": embedding.SHELL,
              "max_steps": embedding.MAX_STEPS},
    "limit": {"t": [1.0], "replicates": 1000, "quantity": "H", "grid_step": None},
    "verify": {"suite": None},
}


class UsageError(ValueError):
    pass


def _load_config_file(path):
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:  # python < 3.11
            import tomli as tomllib
        return tomllib.loads(text.decode())
    return json.loads(text)


def resolve_config(command, flags: dict, config_file=None) -> dict:
    """defaults < config file < command-line flags."""
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    if config_file is not None:
        filecfg = _load_config_file(config_file)
        filecfg.pop("command", None)
        unknown = set(filecfg) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(filecfg)
    cfg.update(flags)
    cfg = {"command": command, **cfg}
    return cfg


def _require(cond, msg):
    if not cond:
        raise UsageError(msg)


def validate(cfg):
    cmd = cfg["command"]
    _require(cfg["format"] in FORMATS, f"format must be one of {FORMATS}")
    _require(isinstance(cfg["seed"], int) and 0 <= cfg["seed"] <= MAX_SEED,
             "seed must be a 64-bit unsigned integer")
    if cmd == "verify":
        _require(cfg["suite"] in verify.SUITES,
                 f"suite must be one of {sorted(verify.SUITES)}")
        return
    MemoryParam(cfg["p"], demo=bool(cfg.get("demo", False)))
    k = cfg.get("k", 0)
    _require(isinstance(k, int) and k >= 0 and k % 2 == 0,
             "k must be an even non-negative integer")
    if "replicates" in cfg:
        _require(cfg["replicates"] >= 1, "replicates must be >= 1")
    if cmd in ("simulate", "zeros", "embed"):
        _require(cfg["n"] >= 1, "n must be >= 1")
    if cmd == "simulate":
        _require(cfg["mode"] in walk.MODES, f"mode must be one of {walk.MODES}")
    if cmd == "return-tail":
        _require(cfg["cap"] >= 2, "cap must be >= 2")
        _require(cfg["points"] >= 2, "points must be >= 2")
    if cmd == "exact":
        _require(0 <= cfg["horizon"], "horizon must be non-negative")
        if cfg["horizon"] > exact.MAX_HORIZON:
            raise ResourceError(f"horizon exceeds the DP budget {exact.MAX_HORIZON}")
    if cmd == "embed":
        _require(cfg["method"] in embedding.METHODS,
                 f"method must be one of {embedding.METHODS}")
        _require(cfg["p"] > 0 or k >= 2, "p = 0 needs k >= 2")
        _require(cfg["res"] > 0 and 0 < cfg["shell"] < 1, "need res > 0 and 0 < shell < 1")
    if cmd == "limit":
        _require(cfg["quantity"] in ("H", "eta"), "quantity must be H or eta")
        _require(all(t >= 0 for t in cfg["t"]), "t values must be non-negative")
        _require(cfg["grid_step"] is None or cfg["grid_step"] > 0, "grid step must be > 0")


# --------------------------------------------------------------------------
# commands: each returns (rows, summary)
# --------------------------------------------------------------------------

def _mc(cfg, threads, task):
    return run_replicates(task, cfg["seed"], cfg["replicates"], threads)


def cmd_simulate(cfg, threads):
    mp = MemoryParam(cfg["p"], demo=cfg["demo"])
    pos = _mc(cfg, threads, lambda g: walk.path_matrix(mp, cfg["k"], cfg["n"], len(g), g,
                                                        cfg["mode"]))
    rows = [{"replicate": r, "position": int(row[-1]),
             "zeros": int(np.count_nonzero(row[1:] == 0)),
             "max_abs": int(np.max(np.abs(row)))} for r, row in enumerate(pos)]
    z = np.array([r["zeros"] for r in rows], dtype=float)
    return rows, {"mean_zeros": float(z.mean()),
                  "mean_position": float(pos[:, -1].mean())}


def cmd_zeros(cfg, threads):
    n = cfg["n"]
    z = _mc(cfg, threads, lambda g: walk.zero_counts(cfg["p"], cfg["k"], [n], len(g), g))[:, 0]
    scaled = z / math.sqrt(n)
    rows = [{"replicate": r, "zeros": int(v), "scaled": float(s)}
            for r, (v, s) in enumerate(zip(z, scaled))]
    summary = {"mean_scaled": float(scaled.mean()),
               "se": float(scaled.std(ddof=1) / math.sqrt(z.size)) if z.size > 1 else None,
               "limit_mean": limits.mean_H(cfg["p"], 1.0)}
    if cfg["exact"] and n <= exact.MAX_HORIZON:
        summary["exact_mean_scaled"] = stats.exact_zero_mean(cfg["p"], n, cfg["k"])
    return rows, summary


def cmd_return_tail(cfg, threads):
    cap = cfg["cap"]

    def task(g):
        smp = walk.first_returns(cfg["p"], cfg["k"], cap, len(g), g)
        return smp.values, smp.censored

    vals, cens = _mc(cfg, threads, task)
    smp = walk.ReturnSamples(float(cfg["p"]), cfg["k"], cap, vals, cens)
    # return times are even, so the survival curve only moves at even n
    grid = 2 * np.round(np.geomspace(1, cap // 2, cfg["points"])).astype(np.int64)
    grid = np.unique(grid)
    est = stats.survival_curve(smp, grid)
    rows = [{"n": int(n), "survival": float(s), "se": float(e),
             "t1_statistic": stats.t1_statistic(cfg["p"], cfg["k"], int(n), s).value
             if n >= 2 and (cfg["p"] > 0 or cfg["k"] >= 2) else None}
            for n, s, e in zip(est.n_grid, est.survival, est.se)]
    summary = {"censored_fraction": est.censored_fraction,
               "expected_slope": 2 * cfg["p"] - 1.5}
    try:
        fit = stats.fit_tail_exponent(est)
        summary.update(fitted_slope=fit.fitted_slope, slope_se=fit.slope_se)
    except ValueError as exc:
        summary["fit_error"] = str(exc)
    return rows, summary


def cmd_exact(cfg, threads):
    tab = exact.exact_table(cfg["p"], cfg["k"], cfg["horizon"], cfg["killed"], keep_mass=False)
    rows = [{"n": m, "survival": float(tab.survival[m]), "p_zero": float(tab.p_zero[m])}
            for m in range(tab.horizon + 1)]
    if cfg["killed"]:
        summary = {"truncated_mean_return": tab.truncated_mean_return()}
    else:
        summary = {"expected_zeros": tab.expected_zeros(tab.horizon)}
    return rows, summary


def cmd_embed(cfg, threads):
    n = cfg["n"]

    def task(g):
        b = embedding.sample_embedded_paths(
            cfg["p"], cfg["k"], n, len(g), g, cfg["method"], res=cfg["res"],
            shell=cfg["shell"], max_steps=cfg["max_steps"])
        return b.times[:, -1], b.values[:, -1], b.compensator[:, -1], b.positions[:, -1]

    T, M, V, S = _mc(cfg, threads, task)
    rows = [{"replicate": r, "time": float(T[r]), "value": float(M[r]),
             "compensator": float(V[r]), "position": int(S[r])} for r in range(T.size)]
    from .coeffs import sequence

    seq = sequence(cfg["p"])
    x = T + V
    return rows, {"mean_time": float(T.mean()), "mean_compensator": float(V.mean()),
                  "A_increment": seq.A(cfg["k"] + n) - seq.A(cfg["k"]),
                  "se_time_plus_compensator":
                      float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else None}


def cmd_limit(cfg, threads):
    ts = sorted(float(t) for t in cfg["t"])
    step = cfg["grid_step"]
    fn = limits.sample_H_levels if cfg["quantity"] == "H" else limits.sample_eta_levels
    out = _mc(cfg, threads, lambda g: fn(cfg["p"], ts, len(g), g, step))
    rows = [{"replicate": r, "t": t, "value": float(out[r, i])}
            for r in range(out.shape[0]) for i, t in enumerate(ts)]
    summary = {"mean": [float(v) for v in out.mean(axis=0)], "t": ts}
    if cfg["quantity"] == "H":
        summary["limit_mean"] = [limits.mean_H(cfg["p"], t) for t in ts]
    summary["grid_step"] = step if step is not None else limits.default_grid_step(cfg["p"])
    return rows, summary


def cmd_verify(cfg, threads):
    res = verify.run_suite(cfg["suite"], cfg["seed"])
    rows = [{"check": k, "passed": v} for k, v in res.checks.items()]
    return rows, res.report()


COMMANDS = {"simulate": cmd_simulate, "zeros": cmd_zeros, "return-tail": cmd_return_tail,
            "exact": cmd_exact, "embed": cmd_embed, "limit": cmd_limit, "verify": cmd_verify}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _bool_flag(sp, name, help):
    sp.add_argument(f"--{name}", dest=name.replace("-", "_"), action="store_true", help=help)
    sp.add_argument(f"--no-{name}", dest=name.replace("-", "_"), action="store_false")


def build_parser():
    parser = argparse.ArgumentParser(prog="erwlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"erwlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON or TOML file with config values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker threads (default $ERWLAB_THREADS)")
        sp.add_argument("--format", choices=FORMATS)
        sp.add_argument("--out", help="output path, '-' for stdout")
        if name == "verify":
            sp.add_argument("suite", choices=sorted(verify.SUITES))
            continue
        sp.add_argument("--p", type=float)
        sp.add_argument("--k", type=int)
        if name in ("simulate", "zeros", "embed"):
            sp.add_argument("--n", type=int)
        if name != "exact":
            sp.add_argument("--replicates", type=int)
    sps = sub.choices
    sps["simulate"].add_argument("--mode", choices=walk.MODES)
    _bool_flag(sps["simulate"], "demo", "allow 3/4 <= p < 1 (qualitative transience demo)")
    _bool_flag(sps["zeros"], "exact", "also report the exact DP mean")
    sps["return-tail"].add_argument("--cap", type=int)
    sps["return-tail"].add_argument("--points", type=int, help="survival grid size")
    sps["exact"].add_argument("--horizon", type=int)
    _bool_flag(sps["exact"], "killed", "kill mass at zero (survival of R)")
    sps["embed"].add_argument("--method", choices=embedding.METHODS)
    sps["embed"].add_argument("--res", type=float)
    sps["embed"].add_argument("--shell", type=float)
    sps["embed"].add_argument("--max-steps", dest="max_steps", type=int)
    sps["limit"].add_argument("--t", type=float, nargs="+")
    sps["limit"].add_argument("--quantity", choices=("H", "eta"))
    sps["limit"].add_argument("--grid-step", dest="grid_step", type=float)
    return parser


def execute(argv):
    """Parse, validate and run; returns (config, rows, summary, threads, seconds)."""
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    config_file = ns.pop("config", None)
    cfg = resolve_config(command, ns, config_file)
    # the thread count never changes results, so it stays out of the record
    threads = cfg.pop("threads")
    validate(cfg)
    threads = default_threads() if threads is None else threads
    _require(threads >= 1, "threads must be >= 1")
    cfg["backend"] = resolve(None)
    cfg["version"] = __version__
    t0 = time.perf_counter()
    rows, summary = COMMANDS[command](cfg, threads)
    return cfg, rows, summary, threads, time.perf_counter() - t0


def _render(cfg, rows, summary):
    data_cfg = {k: v for k, v in cfg.items() if k not in ("out",)}
    return dumps(data_cfg, rows, summary, cfg["format"]).encode()


def run_to_bytes(argv) -> bytes:
    """Run a campaign in-process and return the bytes it would write."""
    cfg, rows, summary, _, _ = execute(list(argv))
    return _render(cfg, rows, summary)


def main(argv=None) -> int:
    try:
        cfg, rows, summary, threads, secs = execute(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except ResourceError as exc:
        print(f"erwlab: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, TypeError, OSError) as exc:
        print(f"erwlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    data = _render(cfg, rows, summary)
    if cfg["out"] == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(cfg["out"]).write_bytes(data)
    print(f"erwlab: {cfg['command']} done in {secs:.3f}s with {threads} thread(s)",
          file=sys.stderr)
    if cfg["command"] == "verify":
        return EXIT_OK if summary["passed"] else EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
