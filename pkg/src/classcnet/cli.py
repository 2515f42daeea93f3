"""Command-line runner: ``classcnet <command> [flags]``.

A JSON file given with ``--config`` supplies defaults for any flag (keys
are the long flag names with dashes or underscores); flags on the command
line win.  Reports go to stdout as JSON with a ``schema_version`` field and,
with ``--out DIR``, to ``DIR/report.json`` plus per-command CSV files.

Exit codes: 0 success, 1 configuration, 2 numerical, 3 verification
failure, 4 resource ceiling.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import config, fixtures, lattice, quantum, smatrix, trails, verification
from ._random import spawn
from .errors import (ConditioningError, ConfigError, DegeneratePrefixError, GraphParseError,
                     NonProbabilisticNodeError, ParameterError, ResourceError, StatisticsError)
from .matrixkit import su2_scalar_decompose
from .netgraph import build_l_lattice, l_lattice_theta, load, require_valid, validate

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3, 4

STOCHASTIC = {"green", "mean-green", "dos", "conductance", "walk", "lattice", "verify"}

log = logging.getLogger("classcnet")


# -- configuration ------------------------------------------------------------------


def _parse_z(text) -> complex:
    if isinstance(text, (list, tuple)):
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float)):
        return complex(text)
    parts = str(text).split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"--z expects RE,IM, got {text!r}")


def _float_list(text):
    if isinstance(text, list):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for these flags")
    common.add_argument("--seed", type=int, help="master seed (required for stochastic commands)")
    common.add_argument("--out", help="directory for report.json and CSV files")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--z", help="spectral parameter RE,IM")
    common.add_argument("--graph", help="graph JSON path, fixture:NAME or lattice:L,P[,open]")
    common.add_argument("--tolerance-scale", type=float, help="multiply every numerical tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="classcnet", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a graph document")

    s = sub.add_parser("green", parents=[common], help="Green block for one disorder draw")
    s.add_argument("--e1", type=int)
    s.add_argument("--e2", type=int)

    s = sub.add_parser("mean-green", parents=[common], help="quenched mean Green block vs trail sum")
    s.add_argument("--e1", type=int)
    s.add_argument("--e2", type=int)
    s.add_argument("--streams", type=int)

    s = sub.add_parser("dos", parents=[common], help="smoothed density of states for one disorder draw")
    s.add_argument("--delta", type=float)
    s.add_argument("--points", type=int)
    s.add_argument("--normalized", action="store_true", default=None)

    s = sub.add_parser("conductance", parents=[common], help="mean point conductance vs open-trail sum")
    s.add_argument("--e-in", type=int)
    s.add_argument("--e-out", type=int)

    s = sub.add_parser("trails", parents=[common], help="enumerate trails with weights")
    s.add_argument("--e", type=int, help="root edge (closed trails)")
    s.add_argument("--e-in", type=int)
    s.add_argument("--e-out", type=int)
    s.add_argument("--ceiling", type=int)

    s = sub.add_parser("walk", parents=[common], help="history-dependent walk statistics")
    s.add_argument("--e", type=int, help="start edge")
    s.add_argument("--walks", type=int)

    s = sub.add_parser("analyze-s", parents=[common], help="sign and reducibility report for an S-matrix")
    s.add_argument("--matrix", help="JSON file or inline JSON with a square matrix")
    s.add_argument("--node", type=int, help="analyze this node of --graph instead")

    s = sub.add_parser("lattice", parents=[common], help="L-lattice loop statistics and scans")
    s.add_argument("--mode", choices=["hull", "fractal", "scan"])
    s.add_argument("--L", type=int, dest="L")
    s.add_argument("--p", help="comma-separated p values")
    s.add_argument("--walks", type=int)
    s.add_argument("--ceiling", type=int)

    s = sub.add_parser("verify", parents=[common], help="run the named identity and equivalence checks")
    s.add_argument("--scale", type=float, help="sample-count factor (1.0 = full size)")
    s.add_argument("--only", help="comma-separated check names")
    return p


DEFAULTS = {
    "workers": 1, "samples": 100_000, "z": "0.6,0", "streams": 8, "delta": 0.1, "points": 256,
    "normalized": False, "ceiling": trails.DEFAULT_CEILING, "walks": 10_000, "mode": "hull",
    "L": 64, "p": "0.5", "scale": 1.0, "tolerance_scale": 1.0,
}


PATH_KEYS = ("graph", "matrix", "out")


def _is_path(v) -> bool:
    return isinstance(v, str) and not v.startswith(("fixture:", "lattice:", "["))


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags; resolve paths."""
    cfg = dict(DEFAULTS)
    if args.config:
        path = os.path.abspath(args.config)
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key == "command":
                if v != args.command:
                    raise ConfigError(f"config is for command {v!r}, not {args.command!r}")
                continue
            if key in PATH_KEYS and _is_path(v):
                # relative to the config file
                v = os.path.join(os.path.dirname(path), v)
            cfg[key] = v
    for k, v in vars(args).items():
        if v is not None and k != "config":
            cfg[k] = v
    cfg["command"] = args.command
    for key in PATH_KEYS:
        if _is_path(cfg.get(key)):
            cfg[key] = os.path.abspath(cfg[key])
            if key != "out" and not os.path.exists(cfg[key]):
                raise ConfigError(f"{key} path does not exist: {cfg[key]}")
    if args.command in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError(f"'{args.command}' is stochastic and needs --seed")
    cfg["z"] = _parse_z(cfg["z"])
    if cfg["workers"] < 1 or cfg["samples"] < 2:
        raise ConfigError("--workers must be >= 1 and --samples >= 2")
    if "tolerances" in cfg:
        try:
            config.set_tolerances(**cfg["tolerances"])
        except TypeError as exc:
            raise ConfigError(f"bad tolerance override: {exc}") from None
    if cfg["tolerance_scale"] != 1.0:
        config.set_tolerances(scale=float(cfg["tolerance_scale"]))
    return cfg


FIXTURE_LEADS = {"two_node_cut": (0, 6), "two_node_half_cut": (0, 5), "single_theta_node": (0, 2)}


def load_graph(spec, check: bool = True):
    """Graph from a path, ``fixture:NAME`` or ``lattice:L,P[,open]``."""
    if spec is None:
        raise ConfigError("this command needs --graph")
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        named = dict(fixtures.bundled())
        named.update({
            "two_node_cut": fixtures.two_node_cut(0.3, 1.1)[0],
            "two_node_half_cut": fixtures.two_node_half_cut(0.3, 1.1)[0],
            "single_theta_node": fixtures.single_theta_node(0.7)[0],
            "self_loop_pair": fixtures.self_loop_pair(0.7),
        })
        if name not in named:
            raise ConfigError(f"unknown fixture {name!r}; known: {', '.join(sorted(named))}")
        return named[name]
    if spec.startswith("lattice:"):
        parts = spec.split(":", 1)[1].split(",")
        try:
            L, p = int(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            raise ConfigError("lattice spec is lattice:L,P[,open]") from None
        boundary = parts[2] if len(parts) > 2 else "torus"
        return build_l_lattice(L, l_lattice_theta(p), boundary)
    g = load(spec)
    if check:
        require_valid(g)
    return g


# -- output -------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _emit(cfg, report: dict, files: dict | None = None):
    report = {"schema_version": SCHEMA_VERSION, "command": cfg["command"], **report}
    text = json.dumps(_jsonable(report), indent=1, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if cfg.get("out"):
        os.makedirs(cfg["out"], exist_ok=True)
        with open(os.path.join(cfg["out"], "report.json"), "w") as fh:
            fh.write(text)
        for name, body in (files or {}).items():
            with open(os.path.join(cfg["out"], name), "w") as fh:
                fh.write(body)


def _require(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise ConfigError(f"missing --{k.replace('_', '-')}")


# -- commands -----------------------------------------------------------------------


def cmd_validate(cfg):
    g = load_graph(cfg.get("graph"), check=False)
    issues = validate(g)
    _emit(cfg, {"valid": not issues, "nodes": len(g.nodes), "edges": g.n_edges,
                "violations": [dataclasses.asdict(v) for v in issues]})
    return EXIT_OK if not issues else EXIT_CONFIG


def cmd_green(cfg):
    _require(cfg, "e1", "e2")
    g = load_graph(cfg.get("graph"))
    d = quantum.sample_disorder(g, cfg["seed"])
    blk = quantum.green(g, d, cfg["e1"], cfg["e2"], cfg["z"])
    report = {"e1": cfg["e1"], "e2": cfg["e2"], "z": cfg["z"], "G": blk.entries, "residual": blk.residual}
    if cfg["z"].imag == 0:
        dec = su2_scalar_decompose(blk.entries)
        report["su2_scale"] = None if dec is None else dec[0]
    _emit(cfg, report)
    return EXIT_OK


def cmd_mean_green(cfg):
    _require(cfg, "e1", "e2")
    g = load_graph(cfg.get("graph"))
    e1, e2, z = cfg["e1"], cfg["e2"], cfg["z"]
    mc = quantum.mean_green_mc(g, e1, e2, z, cfg["samples"], cfg["seed"],
                               n_streams=cfg["streams"], workers=cfg["workers"])
    report = {"e1": e1, "e2": e2, "z": z, "samples": cfg["samples"], "n_skipped": mc.n_skipped,
              "mean": mc.mean, "stderr": np.abs(mc.stderr), "trace": mc.trace,
              "trace_stderr": abs(mc.trace_stderr), "mean_det": mc.mean_det,
              "det_stderr": abs(mc.stderr_det)}
    if e1 == e2 and g.is_closed and abs(abs(z) - 1) > 1e-12:
        cl = trails.classical_mean_trace_green(g, e1, z)
        report["classical_trace"] = cl
        report["verdict"] = "agree" if abs(mc.trace - cl) <= 3 * abs(mc.trace_stderr) + 1e-9 else "disagree"
    elif e1 != e2:
        zero = bool(np.all(np.abs(mc.mean) <= 3 * np.abs(mc.stderr) + 1e-12))
        report["verdict"] = "consistent with zero" if zero else "nonzero"
    _emit(cfg, report)
    return EXIT_OK


def cmd_dos(cfg):
    g = load_graph(cfg.get("graph"))
    d = quantum.sample_disorder(g, cfg["seed"])
    n = int(cfg["points"])
    eps = np.arange(n) * (2 * np.pi / n)
    rho = quantum.density_of_states(g, d, eps, cfg["delta"], normalized=bool(cfg["normalized"]))
    total = quantum.dos_sum_rule(g, d, cfg["delta"])
    lines = ["eps,rho"] + [f"{e!r},{r!r}" for e, r in zip(eps.tolist(), rho.tolist())]
    _emit(cfg, {"delta": cfg["delta"], "points": n, "normalized": bool(cfg["normalized"]),
                "integral": total, "states": 2 * g.n_edges,
                "eigenphases": quantum.eigenphases(g, d)},
          {"dos.csv": "\n".join(lines) + "\n"})
    return EXIT_OK


def _default_leads(cfg, g):
    spec = cfg.get("graph") or ""
    if spec.startswith("fixture:") and spec[8:] in FIXTURE_LEADS:
        cfg = {**dict(zip(("e_in", "e_out"), FIXTURE_LEADS[spec[8:]])),
               **{k: v for k, v in cfg.items() if v is not None}}
    e_in = cfg.get("e_in") if cfg.get("e_in") is not None else (g.leads_in[0] if g.leads_in else None)
    e_out = cfg.get("e_out") if cfg.get("e_out") is not None else (g.leads_out[0] if g.leads_out else None)
    if e_in is None or e_out is None:
        raise ConfigError("graph has no leads; give --e-in/--e-out on an open graph")
    return e_in, e_out


def cmd_conductance(cfg):
    g = load_graph(cfg.get("graph"))
    e_in, e_out = _default_leads(cfg, g)
    q, se = quantum.mean_point_conductance_mc(g, e_in, e_out, cfg["samples"], cfg["seed"],
                                              workers=cfg["workers"])
    cl = trails.classical_mean_conductance(g, e_in, e_out, cfg["ceiling"])
    agree = abs(q - cl) <= 3 * se + 1e-9
    _emit(cfg, {"e_in": e_in, "e_out": e_out, "samples": cfg["samples"], "quantum": q,
                "stderr": se, "classical": cl, "verdict": "agree" if agree else "disagree"})
    return EXIT_OK


def cmd_trails(cfg):
    g = load_graph(cfg.get("graph"))
    if cfg.get("e") is not None:
        found = trails.enumerate_closed_trails(g, cfg["e"], cfg["ceiling"])
        head = {"root": cfg["e"], "closed": True}
    else:
        e_in, e_out = _default_leads(cfg, g)
        found = trails.enumerate_open_trails(g, e_in, e_out, cfg["ceiling"])
        head = {"e_in": e_in, "e_out": e_out, "closed": False}
    total = sum(w for _, w in found)
    _emit(cfg, {**head, "count": len(found), "total_weight": total,
                "min_weight": min((w for _, w in found), default=None)},
          {"trails.csv": trails.trails_csv(found)})
    return EXIT_OK


def cmd_walk(cfg):
    g = load_graph(cfg.get("graph"))
    e = cfg.get("e")
    if e is None:
        e = g.leads_in[0] if g.leads_in else g.edges[0].id
    rng = spawn(cfg["seed"], 1)[0]
    n = int(cfg["walks"])
    report = {"start": e, "walks": n}
    if g.is_closed:
        try:
            pvalue, total, counts, expected = verification.walk_chi_square(g, e, n, rng)
            report.update({"chi_square_pvalue": pvalue, "enumerated_weight": total,
                           "trails": len(counts), "counts": counts, "expected": expected})
        except ResourceError:
            report["chi_square_pvalue"] = None
    else:
        exits = {}
        lengths = []
        for _ in range(n):
            t, diag = trails.sample_history_walk(g, e, rng)
            exits[diag.exit_edge] = exits.get(diag.exit_edge, 0) + 1
            lengths.append(len(t.edges))
        report.update({"exit_counts": dict(sorted(exits.items())), "mean_length": float(np.mean(lengths))})
    _emit(cfg, report)
    return EXIT_OK


def _load_matrix(spec):
    try:
        if spec.lstrip().startswith("["):
            data = json.loads(spec)
        else:
            with open(spec) as fh:
                data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"matrix: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if isinstance(data, dict):
        data = data.get("S")
    s = np.asarray(data, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ConfigError("matrix must be square")
    return s


def cmd_analyze_s(cfg):
    if cfg.get("matrix") is not None:
        s = _load_matrix(cfg["matrix"])
    elif cfg.get("node") is not None:
        s = load_graph(cfg.get("graph")).node(cfg["node"]).S
    else:
        raise ConfigError("analyze-s needs --matrix or --graph with --node")
    report = smatrix.analyze(s)
    report.pop("schema_version")
    _emit(cfg, report)
    return EXIT_OK


def cmd_lattice(cfg):
    mode, L = cfg["mode"], int(cfg["L"])
    ps = _float_list(cfg["p"])
    if mode == "hull":
        rows, csv_parts = [], []
        for p, sub in zip(ps, spawn(cfg["seed"], len(ps))):
            st = lattice.hull_loop_statistics(L, p, int(cfg["walks"]), sub, workers=cfg["workers"])
            rows.append({"p": p, "walks": st.sample_count, "mean_length": st.mean_length,
                         "mean_length_stderr": st.mean_length_stderr,
                         "tail_mass_100": st.tail_mass(100)[0]})
            csv_parts.append((p, st))
        body = ["p,loop_id,length,radius"]
        for p, st in csv_parts:
            body += [f"{p!r},{line}" for line in st.to_csv().splitlines()[1:]]
        _emit(cfg, {"mode": mode, "L": L, "rows": rows}, {"loop_stats.csv": "\n".join(body) + "\n"})
    elif mode == "fractal":
        st = lattice.hull_loop_statistics(L, 0.5, int(cfg["walks"]), cfg["seed"], workers=cfg["workers"])
        fit = lattice.fit_hull_dimension(st, 4.0, L / 8)
        _emit(cfg, {"mode": mode, "L": L, "walks": st.sample_count, "d_h": fit.slope,
                    "stderr": fit.stderr, "loops_in_window": fit.n_loops, "window": fit.window},
              {"loop_stats.csv": st.to_csv()})
    else:
        rows = lattice.conductance_vs_p_scan(L, ps, cfg["samples"], cfg["seed"],
                                             ceiling=int(cfg["ceiling"]), workers=cfg["workers"])
        _emit(cfg, {"mode": mode, "L": L,
                    "rows": [{**dataclasses.asdict(r), "agrees": r.agrees} for r in rows]},
              {"scan.csv": lattice.scan_csv(rows)})
    return EXIT_OK


def cmd_verify(cfg):
    only = [s.strip() for s in cfg["only"].split(",")] if cfg.get("only") else None
    known = [n for n, _ in verification.CHECKS]
    if only and set(only) - set(known):
        raise ConfigError(f"unknown checks {sorted(set(only) - set(known))}; known: {', '.join(known)}")
    results = verification.run_checks(cfg["seed"], float(cfg["scale"]), only,
                                      progress=lambda r: print(r.line(), file=sys.stderr, flush=True))
    passed = all(r.passed for r in results)
    _emit(cfg, {"seed": cfg["seed"], "scale": cfg["scale"], "passed": passed,
                "checks": [r.as_dict() for r in results]})
    return EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {
    "validate": cmd_validate, "green": cmd_green, "mean-green": cmd_mean_green, "dos": cmd_dos,
    "conductance": cmd_conductance, "trails": cmd_trails, "walk": cmd_walk,
    "analyze-s": cmd_analyze_s, "lattice": cmd_lattice, "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    saved = config.TOL
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GraphParseError, ParameterError) as exc:
        print(f"classcnet: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConditioningError, DegeneratePrefixError, NonProbabilisticNodeError, StatisticsError) as exc:
        print(f"classcnet: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ResourceError as exc:
        print(f"classcnet: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    finally:
        config.set_tolerances(**dataclasses.asdict(saved))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
