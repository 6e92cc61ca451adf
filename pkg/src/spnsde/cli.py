"""Command-line front end.

    spnsde semiflows --model sir_exp1
    spnsde ode  --model sir_exp2 --t-final 100 --step 0.01
    spnsde sde  --model sir_exp2 --t-final 100 --step 0.01 --runs 5000 --seed 7
    spnsde ssa  --model sir_exp2 --t-final 100 --runs 10000
    spnsde ctmc --model cycle --t-final 1 --cap 100000
    spnsde compare sde ssa --model cycle --t-final 1 --runs 2000

``--model`` takes a model document path or a bundled name. Exit codes:
1 usage, 2 invalid model, 3 engine failure. The ensemble worker count is
read from $SPNSDE_WORKERS and never changes the results.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as spnio
from .core import ModelError, ScalingFamily, SpnModel, instantiate
from .ensemble import DEFAULT_SEED, Ensemble
from .exact import (StateCapExceeded, build_reachability, marginal, marginal_means,
                    ssa_ensemble, transient_uniformization)
from .fluid import IntegrationError, solve_ode
from .jumpsde import SdeRunConfig, SolverFault, solve_ensemble
from .models import CATALOG, bundled_path
from .stats import EmpiricalPmf, MeanCI, histogram, mean_ci, total_variation
from .structural import (BoundsError, classify_density_dependence, minimal_psemiflows,
                         place_bounds)

log = logging.getLogger("spnsde")

EXIT_USAGE, EXIT_MODEL, EXIT_ENGINE = 1, 2, 3
ENGINES = ("ode", "sde", "ssa", "ctmc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_model(source: str, scale: int | None = None) -> SpnModel:
    path = Path(source)
    if path.exists():
        model = spnio.parse_model_file(path)
    elif source in CATALOG:
        shipped = bundled_path(source)
        model = spnio.parse_model_file(shipped) if shipped.is_file() else CATALOG[source]()
    else:
        raise ModelError(f"no model file or bundled model named {source!r}")
    if scale is not None:
        model = instantiate(ScalingFamily.of(model, scale))
    return model


@dataclass
class EngineResult:
    """What every engine reports at t_final, per place."""

    engine: str
    places: tuple[str, ...]
    means: np.ndarray
    cis: list[MeanCI | None]
    pmfs: list[EmpiricalPmf]
    lows: np.ndarray
    highs: np.ndarray
    trace: tuple[np.ndarray, np.ndarray] | None = None
    endpoints: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _from_ensemble(ens: Ensemble, lo, hi) -> EngineResult:
    final = ens.final_states
    cis = [mean_ci(final[:, i]) if ens.runs >= 2 else None for i in range(final.shape[1])]
    pmfs = [histogram(final[:, i], int(lo[i]), int(hi[i])) for i in range(final.shape[1])]
    trace = (ens.times, ens.mean_path()) if ens.times.size > 1 else None
    return EngineResult(ens.engine, ens.places, final.mean(axis=0), cis, pmfs,
                        final.min(axis=0), final.max(axis=0), trace, final,
                        {"seed": ens.seed, "runs": ens.runs, "diagnostics": ens.diagnostics})


def _bounds(model: SpnModel):
    basis = minimal_psemiflows(model)
    return basis, place_bounds(model, basis)


def run_engine(name: str, model: SpnModel, args) -> EngineResult:
    if name == "ode":
        traj = solve_ode(model, args.t_final, args.step)
        x = traj.states[-1]
        pmfs = [EmpiricalPmf.from_dict({int(np.floor(v + 0.5)): 1.0}) for v in x]
        return EngineResult("ode", model.places, x, [None] * len(x), pmfs, x, x,
                            (traj.times, traj.states), extra={"clamps": traj.clamps})
    if name == "sde":
        basis, bounds = _bounds(model)
        cfg = SdeRunConfig(step=args.step, runs=args.runs, t_final=args.t_final,
                           seed=args.seed, trace_every=args.trace_every)
        ens = solve_ensemble(model, basis, bounds, cfg)
        return _from_ensemble(ens, bounds.min, bounds.max)
    if name == "ssa":
        grid = None
        if args.trace_every:
            grid = SdeRunConfig(step=min(args.trace_every, args.t_final), runs=1,
                                t_final=args.t_final, trace_every=args.trace_every).sample_times()
        ens = ssa_ensemble(model, args.t_final, args.runs, args.seed, sample_times=grid)
        lo = np.zeros(model.n_places, dtype=np.int64)
        hi = np.full(model.n_places, np.iinfo(np.int64).max)
        return _from_ensemble(ens, lo, hi)
    if name == "ctmc":
        rg = build_reachability(model, args.cap)
        dist = transient_uniformization(rg, args.t_final, args.tol)
        pmfs = [marginal(dist, rg, i) for i in range(model.n_places)]
        means = marginal_means(dist, rg)
        return EngineResult("ctmc", model.places, means, [None] * model.n_places, pmfs,
                            np.array([p.support[0] for p in pmfs]),
                            np.array([p.support[-1] for p in pmfs]),
                            extra={"states": rg.n_states})
    raise UsageError(f"unknown engine {name!r}")


def _summary_rows(res: EngineResult):
    for i, p in enumerate(res.places):
        ci = res.cis[i] if res.cis[i] is not None else float(res.means[i])
        yield p, ci, res.lows[i], res.highs[i]


def _structured(res: EngineResult, args) -> dict:
    out = {"engine": res.engine, "model": args.model, "t_final": args.t_final}
    if res.engine in ("sde", "ssa"):
        out["seed"] = args.seed
        out["runs"] = args.runs
    out["summary"] = [
        {"place": p, "mean": float(res.means[i]),
         "ci_halfwidth": 0.0 if res.cis[i] is None else res.cis[i].halfwidth,
         "min": float(res.lows[i]), "max": float(res.highs[i])}
        for i, p in enumerate(res.places)
    ]
    out["pmf"] = [spnio.pmf_record(p, res.pmfs[i]) for i, p in enumerate(res.places)]
    if "diagnostics" in res.extra:
        out["diagnostics"] = res.extra["diagnostics"]
    return out


def _write(out_dir: Path | None, name: str, text: str) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def cmd_engine(args) -> int:
    model = load_model(args.model, args.N)
    res = run_engine(args.command, model, args)
    out_dir = Path(args.out) if args.out else None
    if res.engine in ("sde", "ssa"):
        print(f"# seed={args.seed} runs={args.runs}")
    if args.format == "json":
        text = spnio.json_text(_structured(res, args))
        _write(out_dir, "summary.json", text)
        sys.stdout.write(text)
    else:
        text = spnio.summary_csv(_summary_rows(res))
        _write(out_dir, "summary.csv", text)
        sys.stdout.write(text)
    if out_dir is not None:
        if res.engine != "ode":
            for i, p in enumerate(res.places):
                _write(out_dir, f"pmf_{p}.csv", spnio.pmf_csv(res.pmfs[i]))
        if res.trace is not None:
            _write(out_dir, "trace.csv", spnio.trajectory_csv(*res.trace, res.places))
        if res.endpoints is not None:
            rows = ([r, *row] for r, row in enumerate(res.endpoints.tolist()))
            _write(out_dir, "endpoints.csv", spnio.csv_text(["run", *res.places], rows))
    return 0


def cmd_ode(args) -> int:
    model = load_model(args.model, args.N)
    traj = solve_ode(model, args.t_final, args.step)
    text = spnio.trajectory_csv(traj.times, traj.states, model.places)
    if args.out:
        Path(args.out).write_text(text)
        sys.stdout.write(spnio.trajectory_csv(traj.times[-1:], traj.states[-1:], model.places))
    else:
        sys.stdout.write(text)
    if traj.clamps:
        log.warning("%d negative coordinates clamped to 0", traj.clamps)
    return 0


def cmd_semiflows(args) -> int:
    model = load_model(args.model, args.N)
    basis = minimal_psemiflows(model)
    report = classify_density_dependence(model, basis)
    bounds = None
    try:
        bounds = place_bounds(model, basis, "exact" if args.bounds == "exact" else "semiflow", cap=args.cap)
    except BoundsError as exc:
        log.warning("%s", exc)
    if args.format == "json":
        doc = {
            "places": list(model.places),
            "semiflows": [{"vector": list(v), "constant": c} for v, c in zip(basis.vectors, basis.constants)],
            "classification": report.classification.value,
            "covered": report.covered,
            "nonunit_arcs": [list(a) for a in report.nonunit_arcs],
        }
        if bounds is not None:
            doc["bounds"] = {"min": bounds.min.tolist(), "max": bounds.max.tolist(),
                             "provenance": list(bounds.provenance)}
        sys.stdout.write(spnio.json_text(doc))
        return 0
    w = max(len(p) for p in model.places)
    print(f"{len(basis)} minimal P-semiflow(s); classification: {report.classification.value}")
    print(" ".join(f"{p:>{w}}" for p in model.places) + "  | constant")
    for v, c in zip(basis.vectors, basis.constants):
        print(" ".join(f"{x:>{w}}" for x in v) + f"  | {c}")
    if bounds is not None:
        print(f"bounds ({bounds.provenance[0]}):")
        for p, lo, hi in zip(model.places, bounds.min, bounds.max):
            print(f"  {p:<{w}}  [{lo}, {hi}]")
    return 0


def cmd_compare(args) -> int:
    a, b = args.engine_a, args.engine_b
    for e in (a, b):
        if e not in ENGINES:
            raise UsageError(f"unknown engine {e!r}; choose from {', '.join(ENGINES)}")
    model = load_model(args.model, args.N)
    ra, rb = run_engine(a, model, args), run_engine(b, model, args)
    rows = []
    for i, p in enumerate(model.places):
        ca, cb = ra.cis[i], rb.cis[i]
        ia = ca or MeanCI(float(ra.means[i]), 0.0, 0.95, 0)
        ib = cb or MeanCI(float(rb.means[i]), 0.0, 0.95, 0)
        rows.append({
            "place": p,
            f"mean_{a}": float(ra.means[i]),
            f"mean_{b}": float(rb.means[i]),
            "mean_difference": float(ra.means[i] - rb.means[i]),
            "ci_overlap": ia.overlaps(ib),
            "total_variation": total_variation(ra.pmfs[i], rb.pmfs[i]),
        })
    report = {"engines": [a, b], "model": args.model, "t_final": args.t_final,
              "seed": args.seed, "places": rows}
    text = spnio.json_text(report)
    if args.out:
        _write(Path(args.out), "compare.json", text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spnsde", description="Fluid, diffusion and exact analysis of stochastic Petri nets")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, engine=True):
        p.add_argument("--model", required=True, help="model document path or bundled name")
        p.add_argument("--N", type=int, default=None, help="instantiate the model's family at N * alpha")
        if engine:
            p.add_argument("--t-final", type=float, required=True)
            p.add_argument("--out", default=None, help="output directory (file for ode)")

    p = sub.add_parser("semiflows", help="minimal P-semiflows, bounds, density-dependence class")
    common(p, engine=False)
    p.add_argument("--bounds", choices=("semiflow", "exact"), default="semiflow")
    p.add_argument("--cap", type=int, default=1_000_000)
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("ode", help="fluid limit, RK4 trajectory CSV")
    common(p)
    p.add_argument("--step", type=float, default=0.01)

    def stochastic(p, *, step=False):
        if step:
            p.add_argument("--step", type=float, default=0.01)
        p.add_argument("--runs", type=int, default=1000)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--trace-every", type=float, default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("sde", help="jump-diffusion ensemble")
    common(p)
    stochastic(p, step=True)

    p = sub.add_parser("ssa", help="Gillespie ensemble")
    common(p)
    stochastic(p)

    p = sub.add_parser("ctmc", help="transient CTMC marginals by uniformization")
    common(p)
    p.add_argument("--cap", type=int, default=1_000_000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("compare", help="compare two engines at t_final")
    p.add_argument("engine_a")
    p.add_argument("engine_b")
    common(p)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--cap", type=int, default=1_000_000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(trace_every=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help and argparse usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"semiflows": cmd_semiflows, "ode": cmd_ode, "compare": cmd_compare}
    handler = handlers.get(args.command, cmd_engine)
    try:
        for name in ("t_final", "step", "trace_every"):
            v = getattr(args, name, None)
            if v is not None and v < 0:
                raise UsageError(f"--{name.replace('_', '-')} must be nonnegative")
        if getattr(args, "runs", 1) < 1:
            raise UsageError("--runs must be >= 1")
        return handler(args)
    except UsageError as exc:
        print(f"spnsde: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"spnsde: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (StateCapExceeded, SolverFault, IntegrationError, BoundsError, ValueError) as exc:
        print(f"spnsde: engine failure: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
