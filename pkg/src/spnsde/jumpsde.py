"""Jump-diffusion approximation on the bounded fluid state space.

Transitions that touch a place sitting on one of its bounds are kept
discrete: they fire as jumps of the marking-change vector with the
floored infinite-server intensity. The remaining transitions are
fluidified and advanced by Euler-Maruyama with one independent Brownian
channel each. After every step the state is clamped into the place box
and the P-semiflow invariants are restored exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import SpnModel
from .ensemble import DEFAULT_SEED, Ensemble, configure_workers, run_seeds
from .fluid import fluid_speeds
from .structural import PlaceBounds, SemiflowBasis


class SolverFault(RuntimeError):
    """Internal inconsistency, e.g. a jump leaving the box or an infeasible invariant."""


@dataclass(frozen=True)
class SdeRunConfig:
    step: float
    runs: int
    t_final: float
    seed: int = DEFAULT_SEED
    trace_every: float | None = None
    jumps: bool = True
    noise: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.step > self.t_final:
            raise ValueError("step must not exceed t_final")
        if self.trace_every is not None and not self.trace_every > 0:
            raise ValueError("trace_every must be positive")

    def sample_times(self) -> np.ndarray:
        if self.trace_every is None:
            return np.array([float(self.t_final)])
        n = int(math.floor(self.t_final / self.trace_every + 1e-9))
        grid = np.arange(n + 1) * self.trace_every
        return np.unique(np.append(grid[grid < self.t_final], self.t_final))


def choose_dependents(basis: SemiflowBasis, n_places: int) -> np.ndarray:
    """Per semiflow, the place recomputed from the others during normalization.

    Largest coefficient first, ties by declaration order, skipping places
    already taken or that would make the dependent block singular.
    """
    nu = basis.matrix(n_places).astype(np.float64)
    chosen: list[int] = []
    for k, v in enumerate(nu):
        order = sorted((i for i in range(n_places) if v[i] > 0), key=lambda i: (-v[i], i))
        for i in order:
            if i in chosen:
                continue
            trial = chosen + [i]
            if np.linalg.matrix_rank(nu[: k + 1][:, trial]) == len(trial):
                chosen.append(i)
                break
        else:
            raise SolverFault(f"no admissible dependent place for semiflow {k}")
    return np.array(chosen, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class _Arrays:
    """Everything the jitted step needs, in kernel-ready dtypes."""

    inputs: np.ndarray
    inc: np.ndarray
    rates: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    eps: np.ndarray
    nu: np.ndarray
    consts: np.ndarray
    dep: np.ndarray
    dep_inv: np.ndarray

    @classmethod
    def build(cls, model: SpnModel, basis: SemiflowBasis, bounds: PlaceBounds,
              dependents=None) -> "_Arrays":
        nu = basis.matrix(model.n_places).astype(np.float64)
        consts = np.array(basis.constants, dtype=np.float64)
        lo = bounds.min.astype(np.float64)
        hi = bounds.max.astype(np.float64)
        for v, c in zip(nu, consts):
            if not (v @ lo <= c <= v @ hi):
                raise SolverFault("invariant constant incompatible with the place bounds")
        dep = choose_dependents(basis, model.n_places) if dependents is None \
            else np.asarray(dependents, dtype=np.int64)
        if len(set(dep.tolist())) != len(dep) or len(dep) != len(nu):
            raise ValueError("need one distinct dependent place per semiflow")
        if len(dep):
            block = nu[:, dep]
            if np.any(np.diag(block) == 0):
                raise ValueError("dependent place must have a nonzero semiflow coefficient")
            dep_inv = np.linalg.inv(block)
            if np.allclose(block, np.diag(np.diag(block))):
                dep_inv = np.diag(1.0 / np.diag(block))
        else:
            dep_inv = np.zeros((0, 0))
        c = np.ascontiguousarray
        return cls(c(model.input), c(model.incidence), c(model.rates), lo, hi,
                   bounds.tolerance(), c(nu), consts, dep, c(dep_inv))

    def kernel_args(self):
        return (self.inputs, self.inc, self.rates, self.lo, self.hi, self.eps, self.nu,
                self.consts, self.dep, self.dep_inv)


def _diag_vector(model: SpnModel) -> np.ndarray:
    return np.zeros(model.n_transitions + _kernels.N_EXTRA_DIAG, dtype=np.int64)


def _diag_dict(model: SpnModel, diag: np.ndarray) -> dict:
    n_t = model.n_transitions
    extra = diag[n_t:]
    return {
        "jumps": dict(zip(model.transitions, diag[:n_t].tolist())),
        "sigma_clamps": int(extra[_kernels.DIAG_SIGMA_CLAMPS]),
        "box_clamps": int(extra[_kernels.DIAG_BOX_CLAMPS]),
        "fallback_projections": int(extra[_kernels.DIAG_FALLBACKS]),
        "steps": int(extra[_kernels.DIAG_STEPS]),
    }


# ---- single-step building blocks -------------------------------------------------

def diffusion_columns(model: SpnModel, x, active) -> list[tuple[int, np.ndarray]]:
    """sqrt(sigma(t, x)) * L(., t) for each active transition, sigma clamped at 0."""
    sig = np.maximum(fluid_speeds(model, x), 0.0)
    return [(t, math.sqrt(sig[t]) * model.incidence[:, t].astype(np.float64))
            for t in sorted(active)]


def jump_intensities(model: SpnModel, x) -> np.ndarray:
    out = np.empty(model.n_transitions)
    _kernels.floor_intensities(model.input, model.rates, np.asarray(x, dtype=np.float64), out)
    return out


def jump_intensity(model: SpnModel, x, t: int) -> float:
    """lambda(t) * min_j floor(x_j / I(p_j, t))."""
    return float(jump_intensities(model, x)[t])


def sample_next_jump(intensities, step: float, rng: np.random.Generator) -> tuple[int | None, float]:
    """Competing exponentials with frozen rates over at most ``step``.

    ``intensities`` is either a sequence indexed by transition or a
    mapping transition -> rate. Returns (winner, tau) when the first event
    falls before ``step``, else (None, step).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if isinstance(intensities, dict):
        keys = sorted(intensities)
        mu = np.array([intensities[k] for k in keys], dtype=np.float64)
    else:
        mu = np.asarray(intensities, dtype=np.float64)
        keys = list(range(mu.size))
    total = float(mu.sum())
    if total <= 0.0:
        return None, step
    tau = rng.exponential(1.0 / total)
    if tau >= step:
        return None, step
    return keys[_kernels.pick(mu, total, rng.random())], float(tau)


def apply_jump(x, model: SpnModel, t: int, bounds: PlaceBounds | None = None) -> np.ndarray:
    y = np.asarray(x, dtype=np.float64) + model.incidence[:, t]
    lo = np.zeros(model.n_places) if bounds is None else bounds.min
    eps = 1e-9 if bounds is None else bounds.tolerance()
    if np.any(y < lo - eps) or (bounds is not None and np.any(y > bounds.max + eps)):
        raise SolverFault(f"jump of {model.transitions[t]!r} leaves the box: {y.tolist()}")
    return y


def em_substep(model: SpnModel, x, interior, h: float, xi) -> np.ndarray:
    """x + sum_{t interior} L(t) (sigma(t,x) h + sqrt(sigma(t,x) h) xi_t).

    ``xi`` holds one standard-normal draw per transition (entries of
    non-interior transitions are ignored).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x0 = np.asarray(x, dtype=np.float64)
    mask = np.zeros(model.n_transitions, dtype=np.bool_)
    mask[list(interior)] = True
    sig = fluid_speeds(model, x0)
    out = x0.copy()
    _kernels.em_increment(x0, model.incidence, sig, mask, float(h),
                          np.asarray(xi, dtype=np.float64), out, np.zeros(_kernels.N_EXTRA_DIAG, np.int64))
    return out


def normalize(x, basis: SemiflowBasis, bounds: PlaceBounds, dependents=None,
              model: SpnModel | None = None) -> np.ndarray:
    """Clamp into [MIN, MAX], then recompute one dependent place per semiflow.

    Falls back to a projection onto the invariant subspace within the box
    when a recomputed place lands outside its bounds.
    """
    n_p = len(bounds.min)
    nu = basis.matrix(n_p).astype(np.float64)
    lo, hi = bounds.min.astype(np.float64), bounds.max.astype(np.float64)
    for v, c in zip(nu, basis.constants):
        if not (v @ lo <= c <= v @ hi):
            raise SolverFault("invariant constant incompatible with the place bounds")
    dep = choose_dependents(basis, n_p) if dependents is None else np.asarray(dependents, np.int64)
    if len(set(dep.tolist())) != len(dep) or any(nu[k, d] == 0 for k, d in enumerate(dep)):
        raise ValueError("dependents must be distinct with nonzero coefficients")
    block = nu[:, dep] if len(dep) else np.zeros((0, 0))
    if len(dep) and np.allclose(block, np.diag(np.diag(block))):
        dep_inv = np.diag(1.0 / np.diag(block))
    else:
        dep_inv = np.linalg.inv(block) if len(dep) else np.zeros((0, 0))
    y = np.array(x, dtype=np.float64)
    status = _kernels.normalize(y, lo, hi, bounds.tolerance(), np.ascontiguousarray(nu),
                                np.array(basis.constants, dtype=np.float64), dep,
                                np.ascontiguousarray(dep_inv), np.zeros(_kernels.N_EXTRA_DIAG, np.int64))
    if status == _kernels.STATUS_INFEASIBLE:
        raise SolverFault("cannot restore the invariants inside the box")
    return y


# ---- runs ------------------------------------------------------------------------

@dataclass
class RunTrace:
    """Every step of one run: times[k] follows step k; fired is -1 for no jump."""

    times: np.ndarray
    states: np.ndarray
    fired: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def trace_run(model: SpnModel, basis: SemiflowBasis, bounds: PlaceBounds,
              config: SdeRunConfig, run_index: int = 0) -> RunTrace:
    """Step-by-step record of one run.

    Same random stream and step sequence as run ``run_index`` of
    :func:`solve_ensemble`; meant for inspection, not speed.
    """
    arr = _Arrays.build(model, basis, bounds)
    _kernels.seed(run_seeds(config.seed, 1, offset=run_index)[0])
    diag = _diag_vector(model)
    x = model.initial_marking.astype(np.float64)
    times, states, fired = [0.0], [x.copy()], [-1]
    u = 0.0
    for target in config.sample_times():
        while u < target:
            remaining = target - u
            h_max = remaining if remaining <= config.step * (1.0 + 1e-9) else config.step
            h, t, status = _kernels.sde_step(x, h_max, *arr.kernel_args(), config.jumps,
                                             config.noise, diag)
            if status == _kernels.STATUS_INFEASIBLE:
                raise SolverFault(f"normalization infeasible at t={u}")
            u = target if (t < 0 and h_max == remaining) else u + h
            times.append(u)
            states.append(x.copy())
            fired.append(t)
    return RunTrace(np.array(times), np.array(states), np.array(fired), _diag_dict(model, diag))


def _run_kernel(model, arr: _Arrays, config: SdeRunConfig, seeds: np.ndarray):
    times = config.sample_times()
    runs = seeds.size
    out = np.zeros((runs, times.size, model.n_places))
    diag = np.zeros((runs, model.n_transitions + _kernels.N_EXTRA_DIAG), dtype=np.int64)
    status = np.zeros(runs, dtype=np.int64)
    _kernels.sde_ensemble(seeds, model.initial_marking.astype(np.float64), times,
                          float(config.step), *arr.kernel_args(), config.jumps, config.noise,
                          out, diag, status)
    if np.any(status == _kernels.STATUS_INFEASIBLE):
        bad = int(np.nonzero(status == _kernels.STATUS_INFEASIBLE)[0][0])
        raise SolverFault(f"run {bad}: cannot restore the invariants inside the box")
    return times, out, diag


def solve_run(model: SpnModel, basis: SemiflowBasis, bounds: PlaceBounds,
              config: SdeRunConfig, run_index: int = 0) -> np.ndarray:
    """State at ``t_final`` of run ``run_index``."""
    arr = _Arrays.build(model, basis, bounds)
    _, out, _ = _run_kernel(model, arr, config, run_seeds(config.seed, 1, offset=run_index))
    return out[0, -1]


def solve_ensemble(model: SpnModel, basis: SemiflowBasis, bounds: PlaceBounds,
                   config: SdeRunConfig, workers: int | None = None) -> Ensemble:
    """``config.runs`` independent runs; identical output for any worker count."""
    arr = _Arrays.build(model, basis, bounds)
    configure_workers(workers)
    times, out, diag = _run_kernel(model, arr, config, run_seeds(config.seed, config.runs))
    return Ensemble(model.places, times, out, config.seed, "sde", config=config,
                    diagnostics=_diag_dict(model, diag.sum(axis=0)))
