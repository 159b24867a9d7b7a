"""Command-line entry point: ``hopfdeg <command> --config run.json``.

Exit codes: 0 success, 1 configuration error, 2 inconclusive invariant.
Every command prints exactly one JSON line on stdout; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .experiments import EXPERIMENTS
from .invariants import (
    InconclusiveError,
    SupportError,
    brouwer_degree_count,
    brouwer_degree_count_auto,
    brouwer_degree_integral,
    hopf_invariant_linking,
    hopf_invariant_whitehead,
    sample_pullback,
)
from .geometry import make_quadrature
from .mapzoo import from_descriptor
from .sobolev import SeminormSpec, fractional_seminorm, fractional_seminorm_mc, gradient_energy

COMMANDS = ("gen-map", "degree", "hopf", "seminorm", "experiment")
SCHEMA_VERSION = 1


class ConfigError(Exception):
    pass


def load_schema() -> dict:
    text = resources.files("hopfdeg").joinpath("schema/run_config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, default=_jsonable) + "\n")
    sys.stdout.flush()


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def resolve_config(command: str, args) -> dict:
    """Read, validate and merge the config file with command-line overrides."""
    if args.config is None:
        raise ConfigError("--config is required")
    try:
        if args.config == "-":
            cfg = json.load(sys.stdin)
        else:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {e.message}") from e
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for command {cfg['command']!r}, not {command!r}")
    cfg = dict(cfg)
    cfg["command"] = command
    out = dict(cfg.get("output", {}))
    if args.out is not None:
        out["dir"] = args.out
    if args.format is not None:
        out["format"] = args.format
    out.setdefault("format", "json")
    cfg["output"] = out
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg["threads"] = args.threads
    cfg.setdefault("threads", 1)
    if command in ("gen-map", "degree", "hopf", "seminorm") and "family" not in cfg:
        raise ConfigError(f"command {command!r} needs a 'family'")
    if command == "experiment" and "experiment" not in cfg:
        raise ConfigError("command 'experiment' needs an 'experiment' name")
    return cfg


def _build_map(cfg):
    try:
        return from_descriptor(cfg["family"])
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"cannot build map from family spec: {e}") from e


def _rng_seed(seed: int) -> int:
    # numpy generators accept arbitrary non-negative ints; keep the u64 as is
    return int(seed)


def _write(out_dir, name, payload: dict, fmt: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        path = os.path.join(out_dir, name + ".csv")
        flat = {k: (json.dumps(v, default=_jsonable) if isinstance(v, (dict, list)) else v)
                for k, v in payload.items()}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(list(flat))
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else
                    ("" if v is None else str(v).lower() if isinstance(v, bool) else str(v))
                    for v in flat.values()])
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        path = os.path.join(out_dir, name + ".json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True, default=_jsonable) + "\n")
    return path


# ---------------------------------------------------------------------------
# commands

def cmd_gen_map(cfg) -> tuple[dict, int]:
    f = _build_map(cfg)
    desc = f.descriptor()
    out = {"command": "gen-map", "descriptor": desc, "m": f.m, "ell": f.ell, "sphere_valued": f.sphere_valued}
    if "expected_hopf" in f.meta:
        out["expected_hopf"] = f.meta["expected_hopf"]
    if f.tag == "bubble":
        out["expected_degree"] = int(f.params["d"])
    return out, 0


def cmd_degree(cfg) -> tuple[dict, int]:
    f = _build_map(cfg)
    if f.ell != f.m + 1:
        raise ConfigError("degree needs a map S^n -> S^n")
    prm = cfg.get("params", {})
    rule = make_quadrature(f.m, prm["resolution"]) if "resolution" in prm else None
    a = brouwer_degree_integral(f, rule)
    if "y" in prm:
        c = brouwer_degree_count(f, prm["y"], rule)
    else:
        c = brouwer_degree_count_auto(f, seed=_rng_seed(cfg["seed"]), rule=rule)
    agree = (not a.inconclusive) and a.rounded == c.rounded
    out = {"command": "degree", "family": f.descriptor(), "integral": a.to_dict(), "count": c.to_dict(),
           "rounded": c.rounded, "agreement": agree}
    return out, 0 if agree else 2


def cmd_hopf(cfg) -> tuple[dict, int]:
    f = _build_map(cfg)
    if (f.m, f.ell) != (3, 3):
        raise ConfigError("hopf needs a map S^3 -> S^2")
    prm = cfg.get("params", {})
    N = prm.get("N", 96)
    s = sample_pullback(f, prm.get("L"), N)
    w = hopf_invariant_whitehead(f, sample=s)
    lk = hopf_invariant_linking(f, prm.get("p_value"), prm.get("q_value"), L=s.L, N=N, sample_F=s.F)
    agree = (not w.inconclusive) and (not lk.inconclusive) and w.rounded == lk.rounded
    out = {"command": "hopf", "family": f.descriptor(), "whitehead": w.to_dict(), "linking": lk.to_dict(),
           "rounded": lk.rounded, "agreement": agree}
    return out, 0 if agree else 2


def cmd_seminorm(cfg) -> tuple[dict, int]:
    f = _build_map(cfg)
    prm = cfg.get("params", {})
    if "s" not in prm:
        raise ConfigError("seminorm needs params.s")
    s = prm["s"]
    p = prm.get("p", f.m / s)
    method = prm.get("method", "quadrature" if f.m == 1 else "mc")
    out = {"command": "seminorm", "family": f.descriptor(), "s": s, "p": p, "m": f.m}
    if s >= 1:
        rule = make_quadrature(f.m, prm.get("resolution", {1: 2048, 2: 64, 3: 48}[f.m]))
        e = gradient_energy(f, p, rule)
        out.update({"method": "gradient-energy", "value": e ** (1 / p), "pth_power": e})
        return out, 0
    spec = SeminormSpec(s, p, "sphere", f.m)
    if method == "both":
        raise ConfigError("seminorm method must be 'quadrature' or 'mc'")
    if method == "quadrature":
        rule = make_quadrature(f.m, prm.get("resolution", {1: 2048, 2: 48, 3: 12}[f.m]))
        est = fractional_seminorm(f, spec, rule)
    else:
        est = fractional_seminorm_mc(f, spec, seed=_rng_seed(cfg["seed"]), n_samples=prm.get("n_samples", 100000))
    out.update(est.to_dict())
    return out, 0


PLOT_SCRIPT = '''"""Plot a hopfdeg experiment CSV on log-log axes.

usage: python {name} [file.csv]
The first column is the family parameter; every other numeric column is drawn
against it.  Requires matplotlib.
"""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path, newline="", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
cols = list(rows[0])
x = [float(r[cols[0]]) for r in rows]
for c in cols[1:]:
    try:
        y = [abs(float(r[c])) for r in rows]
    except ValueError:
        continue
    if all(v > 0 for v in y):
        plt.loglog(x, y, "o-", label=c)
plt.xlabel(cols[0])
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def cmd_experiment(cfg) -> tuple[dict, int]:
    name = cfg["experiment"]
    fn = EXPERIMENTS[name]
    opts = dict(cfg.get("options", {}))
    allowed = set(inspect.signature(fn).parameters)
    bad = sorted(set(opts) - allowed)
    if bad:
        raise ConfigError(f"options not accepted by {name}: {bad}")
    try:
        rep = fn(**opts, threads=cfg["threads"], seed=cfg["seed"])
    except ValueError as e:
        raise ConfigError(str(e)) from e
    out = {"command": "experiment", "experiment": name, "checks": rep.checks,
           "regressions": {k: {"slope": v.slope, "ci_low": v.ci_low, "ci_high": v.ci_high}
                           for k, v in rep.regressions.items()},
           "ratios": rep.ratios, "members": len(rep.rows), "threads": cfg["threads"]}
    od = cfg["output"].get("dir")
    if od:
        csv_path, json_path = rep.write(od)
        out["csv"], out["json"] = csv_path, json_path
        if cfg["output"].get("plot"):
            ppath = os.path.join(od, f"plot_{name}.py")
            with open(ppath, "w", encoding="utf-8") as fh:
                fh.write(PLOT_SCRIPT.format(name=os.path.basename(ppath), csv=os.path.basename(csv_path)))
            out["plot_script"] = ppath
    return out, 0


HANDLERS = {"gen-map": cmd_gen_map, "degree": cmd_degree, "hopf": cmd_hopf,
            "seminorm": cmd_seminorm, "experiment": cmd_experiment}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON, validated against the shipped schema); '-' reads stdin")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="format of written result files")
    common.add_argument("--threads", type=int, help="worker threads for experiment members")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
    ap = argparse.ArgumentParser(prog="hopfdeg", description="Degrees, Hopf invariants and fractional seminorms of sphere maps.")
    ap.add_argument("--version", action="version", version=f"hopfdeg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"gen-map": "build a family member and print its descriptor",
             "degree": "Brouwer degree by integral and by preimage count",
             "hopf": "Hopf invariant by the Whitehead integral and by fiber linking",
             "seminorm": "fractional Sobolev seminorm on the sphere",
             "experiment": "run a parameter sweep and write CSV + JSON"}
    for c in COMMANDS:
        sub.add_parser(c, parents=[common], help=helps[c])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        if args.dry_run:
            _emit({"dry_run": True, "config": cfg})
            return 0
        out, code = HANDLERS[args.command](cfg)
    except ConfigError as e:
        print(f"hopfdeg: configuration error: {e}", file=sys.stderr)
        return 1
    except (InconclusiveError, SupportError) as e:
        print(f"hopfdeg: inconclusive: {e}", file=sys.stderr)
        _emit({"command": args.command, "inconclusive": True, "error": str(e)})
        return 2
    except ValueError as e:
        print(f"hopfdeg: configuration error: {e}", file=sys.stderr)
        return 1
    od = cfg["output"].get("dir")
    if od and args.command != "experiment":
        out["file"] = _write(od, args.command.replace("-", "_"), out, cfg["output"]["format"])
    if code == 2:
        print("hopfdeg: the two methods disagree or the result is inconclusive", file=sys.stderr)
    _emit(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
