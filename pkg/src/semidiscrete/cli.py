"""Command-line entry point.

    semidiscrete {solve,refine,hedonic,exact,asymptotics,render}
                 [--config PATH] [--preset NAME] [--out DIR] [--seed N]

The configuration is one JSON document. Measures are given as
``{"path": ...}``, ``{"grid": {"d": 2, "k": 20}}``,
``{"random": {"n": 50, "d": 2}}``, an inline measure object, or (for the
target only) ``{"pushforward": {"kind": "paper_phi", "lambda": 0.2}}``
applied to the source. Centers are ``{"explicit": [[...], ...]}``,
``{"random_seeded": true}`` or ``{"kmeans++": true}`` together with ``m``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .cost import CenterSet, CostSpec, ground_matrix
from .errors import SemiDiscreteError, ValidationError
from .measures import (DiscreteMeasure, MapSpec, grid_uniform, measure_from_dict,
                       pushforward_gradient_map, read_measure, uniform_random)
from .optimizer import SolveOptions, maximize_dual, maximize_hedonic
from .oracle import asymptotic_sweep, exact_ot, gap, kmeans_pp
from .partition import make_plan, plan_cost
from .refinement import RefineOptions, refine_loop
from .svg import FigureSpec, disagreement, render_partitions

log = logging.getLogger("semidiscrete")

COMMANDS = ("solve", "refine", "hedonic", "exact", "asymptotics", "render")
PAPER_LAMBDAS = (0.0, 0.05, 0.1, 0.2, 0.5, 1.2)


def preset(name: str) -> dict:
    """Built-in configurations.

    ``paper-square`` and ``paper-square@LAMBDA``: 20x20 grid on the unit
    square, target is its image under the gradient map with that lambda
    (default 0.2), 10 centers, quadratic cost.
    """
    base, _, arg = name.partition("@")
    if base != "paper-square":
        raise ValidationError(f"unknown preset {name!r}")
    try:
        lam = float(arg) if arg else 0.2
    except ValueError:
        raise ValidationError(f"bad lambda in preset {name!r}") from None
    return {
        "mu": {"grid": {"d": 2, "k": 20}},
        "nu": {"pushforward": {"kind": "paper_phi", "lambda": lam}},
        "cost": {"sigma": 2.0, "scale": "auto"},
        "m": 10,
        "centers": {"kmeans++": True},
        "refine": {"rounds": 30},
        "figure": {"sides": ["source", "target", "pullback"], "palette_seed": 0},
    }


# ------------------------------------------------------------- config

def _measure(spec, rng: np.random.Generator, base: Optional[DiscreteMeasure] = None,
             where: str = "measure") -> DiscreteMeasure:
    if not isinstance(spec, dict):
        raise ValidationError(f"{where}: expected an object")
    if "path" in spec:
        return read_measure(spec["path"])
    if "grid" in spec:
        g = spec["grid"]
        return grid_uniform(int(g.get("d", 2)), int(g["k"]))
    if "random" in spec:
        r = spec["random"]
        return uniform_random(int(r["n"]), int(r.get("d", 2)), rng)
    if "pushforward" in spec:
        if base is None:
            raise ValidationError(f"{where}: pushforward needs a source measure")
        p = spec["pushforward"]
        return pushforward_gradient_map(base, MapSpec(p.get("kind", "paper_phi"),
                                                      float(p.get("lambda", 0.0))))
    if "points" in spec:
        return measure_from_dict(spec)
    raise ValidationError(f"{where}: unrecognized measure description")


def _centers(cfg: dict, mu: DiscreteMeasure, nu: DiscreteMeasure,
             rng: np.random.Generator) -> CenterSet:
    spec = cfg.get("centers", {"kmeans++": True})
    if "explicit" in spec:
        return CenterSet(np.asarray(spec["explicit"], dtype=float))
    m = int(cfg.get("m", 0))
    if m < 1:
        raise ValidationError("m must be >= 1")
    pts = np.vstack([mu.points, nu.points])
    w = np.concatenate([mu.weights, nu.weights])
    if spec.get("random_seeded"):
        uniq = np.unique(pts, axis=0)
        if uniq.shape[0] < m:
            raise ValidationError(f"only {uniq.shape[0]} distinct atoms for {m} centers")
        return CenterSet(uniq[np.sort(rng.choice(uniq.shape[0], m, replace=False))])
    if spec.get("kmeans++"):
        return kmeans_pp(pts, w, m, rng)
    raise ValidationError("unrecognized centers description")


class Run:
    """Resolved inputs of one invocation."""

    def __init__(self, cfg: dict, seed: int):
        self.cfg = cfg
        self.seed = seed
        rng = np.random.default_rng(seed)
        if "mu" not in cfg:
            raise ValidationError("config needs a source measure 'mu'")
        self.mu = _measure(cfg["mu"], rng, where="mu")
        self.nu = _measure(cfg.get("nu", {"pushforward": {"kind": "identity"}}), rng,
                           base=self.mu, where="nu")
        if self.mu.dim != self.nu.dim:
            raise ValidationError("source and target dimensions differ")
        self.spec = CostSpec.from_config(cfg.get("cost", {}))
        self.spec2 = CostSpec.from_config(cfg["cost2"]) if "cost2" in cfg else None
        self.opts = SolveOptions.from_config(cfg.get("solve", {}))
        self.rng = rng

    def centers(self) -> CenterSet:
        return _centers(self.cfg, self.mu, self.nu, self.rng)


def _load_config(args) -> dict:
    cfg = {}
    if args.preset:
        cfg.update(preset(args.preset))
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ValidationError("config must be a JSON object")
        cfg.update(user)
    if not cfg:
        raise ValidationError("give --config or --preset")
    return cfg


# -------------------------------------------------------------- output

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


class Writer:
    def __init__(self, out: Path):
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def text(self, name: str, body: str):
        (self.out / name).write_text(body)
        self.files.append(name)

    def json(self, name: str, obj):
        self.text(name, _dump(obj))


def _manifest(cmd: str, cfg: dict, seed: int, files: list) -> dict:
    canon = json.dumps({"command": cmd, "config": cfg}, sort_keys=True, default=_jsonable)
    return {
        "command": cmd,
        "config": cfg,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "seed": seed,
        "files": sorted(files),
        "versions": {"semidiscrete": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }


def _write_solution(w: Writer, run: Run, rep, Z: CenterSet, report: dict):
    A, B = rep.source_partition, rep.target_partition
    w.text("partition_source.csv", A.to_csv())
    w.text("partition_target.csv", B.to_csv())
    plan = make_plan(A, B, run.mu, run.nu)
    w.text("plan.csv", plan.to_csv())
    report.update(rep.summary())
    report["residual"] = plan.residual
    report["plan_cost"] = plan_cost(plan, run.mu, run.nu, run.spec, Z, spec2=run.spec2)
    report["centers"] = Z.centers.tolist()
    return A, B


def _maybe_gap(run: Run, Z: CenterSet, report: dict):
    if run.cfg.get("oracle"):
        report["gap"] = gap(run.mu, run.nu, Z, run.spec, run.opts).to_dict()


def _figures(w: Writer, run: Run, Z: CenterSet, A, B, report: dict, force: bool = False):
    if run.mu.dim != 2 and not force:
        return
    fcfg = run.cfg.get("figure", {})
    sides = tuple(fcfg.get("sides", ("source", "target", "pullback")))
    if run.mu.n != run.nu.n:
        sides = tuple(s for s in sides if s != "pullback")
    spec = FigureSpec(sides=sides, palette_seed=int(fcfg.get("palette_seed", 0)),
                      size=int(fcfg.get("size", 480)))
    for side, svg in render_partitions(run.mu, run.nu, Z, A, B, spec).items():
        w.text(f"figure_{side}.svg", svg)
    if run.mu.n == run.nu.n:
        report["pullback_disagreement"] = disagreement(A, B)


def cmd_solve(run: Run, w: Writer) -> dict:
    Z = run.centers()
    rep = maximize_dual(run.mu, run.nu, Z, run.spec, run.opts, run.spec2)
    report = {"command": "solve"}
    _write_solution(w, run, rep, Z, report)
    _maybe_gap(run, Z, report)
    return report


def cmd_refine(run: Run, w: Writer) -> dict:
    Z0 = run.centers()
    r = run.cfg.get("refine", {})
    ropts = RefineOptions(rounds=int(r.get("rounds", 20)),
                          saturation_tol=r.get("saturation_tol", 1e-7),
                          reseed=bool(r.get("reseed", False)),
                          stop_on_cell_death=bool(r.get("stop_on_cell_death", False)))
    traj = refine_loop(run.mu, run.nu, Z0, run.spec, ropts, run.opts, run.spec2)
    w.json("trajectory.json", traj.to_dict())
    Z = traj.final_centers
    report = {"command": "refine", "rounds": len(traj.value_history),
              "stopped_reason": traj.stopped_reason, "initial_centers": Z0.centers.tolist()}
    A, B = _write_solution(w, run, traj.reports[-1], Z, report)
    _maybe_gap(run, Z, report)
    _figures(w, run, Z, A, B, report)
    return report


def cmd_hedonic(run: Run, w: Writer) -> dict:
    Z = run.centers()
    rep = maximize_hedonic(run.mu, run.nu, Z, run.spec, run.spec2, run.opts)
    A, B = rep.source_partition, rep.target_partition
    w.text("partition_source.csv", A.to_csv())
    w.text("partition_target.csv", B.to_csv())
    report = {"command": "hedonic", **rep.summary(),
              "null_mass_source": float(A.cell_masses[-1]),
              "null_mass_target": float(B.cell_masses[-1]),
              "centers": Z.centers.tolist()}
    return report


def cmd_exact(run: Run, w: Writer) -> dict:
    budget = int(run.cfg.get("budget", 10**6))
    C = ground_matrix(run.mu.points, run.nu.points, run.spec)
    res = exact_ot(run.mu, run.nu, C, budget)
    lines = ["source_index,target_index,mass"]
    for i, k in zip(*np.nonzero(res.plan)):
        lines.append(f"{i},{k},{float(res.plan[i, k])!r}")
    w.text("plan.csv", "\n".join(lines) + "\n")
    report = {"command": "exact", "exact_value": res.value}
    if "centers" in run.cfg or "m" in run.cfg:
        Z = run.centers()
        report["gap"] = gap(run.mu, run.nu, Z, run.spec, run.opts, budget).to_dict()
    return report


def cmd_asymptotics(run: Run, w: Writer) -> dict:
    a = run.cfg.get("asymptotics", {})
    m_list = [int(v) for v in a.get("m_list", [4, 8, 16, 32, 64])]
    seeds = [int(v) for v in a.get("seeds", [run.seed, run.seed + 1, run.seed + 2])]
    res = asymptotic_sweep(run.mu, run.nu, run.spec, m_list,
                           rounds=int(a.get("rounds", 30)), seeds=seeds, opts=run.opts)
    w.text("sweep.csv", res.to_csv())
    return {"command": "asymptotics", "slope": res.slope,
            "rows": [list(r) for r in res.rows],
            "best_seed": {str(k): v for k, v in res.seeds.items()}}


def cmd_render(run: Run, w: Writer) -> dict:
    Z = run.centers()
    rep = maximize_dual(run.mu, run.nu, Z, run.spec, run.opts, run.spec2)
    report = {"command": "render", "value": rep.value, "centers": Z.centers.tolist()}
    _figures(w, run, Z, rep.source_partition, rep.target_partition, report, force=True)
    return report


HANDLERS = {"solve": cmd_solve, "refine": cmd_refine, "hedonic": cmd_hedonic,
            "exact": cmd_exact, "asymptotics": cmd_asymptotics, "render": cmd_render}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semidiscrete",
                                 description="Semi-discrete optimal transport solver")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--preset", help="built-in configuration, e.g. paper-square@0.2")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed (default: config or 0)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if seed < 0:
            raise ValidationError("seed must be nonnegative")
        run = Run(cfg, seed)
        w = Writer(Path(args.out))
        report = HANDLERS[args.command](run, w)
        report["seed"] = seed
        w.json("report.json", report)
        w.json("manifest.json", _manifest(args.command, cfg, seed, w.files + ["manifest.json"]))
        log.info("wrote %d files to %s", len(w.files), w.out)
    except (SemiDiscreteError, ValueError, KeyError, TypeError) as exc:
        name = type(exc).__name__
        if not isinstance(exc, SemiDiscreteError):
            # malformed configuration values surface as validation failures
            name = "ValidationError"
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        print(json.dumps({"error": name, "message": msg}, sort_keys=True), file=sys.stderr)
        return 2
    print(_dump({k: report[k] for k in sorted(report)
                 if k in ("command", "value", "slope", "exact_value", "stopped_reason")}),
          end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
