"""Ground-truth engines: reachability graph, transient solution by
uniformization, and Gillespie direct-method simulation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.stats import poisson

from . import _kernels
from .core import SpnModel
from .ensemble import DEFAULT_SEED, Ensemble, configure_workers, run_seeds
from .stats import EmpiricalPmf

log = logging.getLogger(__name__)


class StateCapExceeded(RuntimeError):
    """The reachability set is larger than the allowed cap; use SSA instead."""


@dataclass(frozen=True, eq=False)
class ReachabilityGraph:
    states: np.ndarray  # (S, n_p) int64, row 0 is the initial marking
    src: np.ndarray
    dst: np.ndarray
    rate: np.ndarray
    places: tuple[str, ...]
    _index: dict = field(default=None, repr=False)  # type: ignore[assignment]

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def index(self) -> dict[tuple[int, ...], int]:
        if self._index is None:
            object.__setattr__(self, "_index", {tuple(int(v) for v in s): i for i, s in enumerate(self.states)})
        return self._index

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.rate.tolist()))

    def generator(self) -> sparse.csr_matrix:
        n = self.n_states
        q = sparse.csr_matrix((self.rate, (self.src, self.dst)), shape=(n, n))
        exit_rates = np.asarray(q.sum(axis=1)).ravel()
        return (q - sparse.diags(exit_rates)).tocsr()


def _encoder(model: SpnModel):
    """Injective int64 code for markings, when structural bounds allow one."""
    from .structural import check_coverage, minimal_psemiflows, place_bounds

    basis = minimal_psemiflows(model)
    if not check_coverage(model, basis):
        return None
    radix = place_bounds(model, basis).max.astype(object) + 1
    total = 1
    for r in radix:
        total *= int(r)
    if total >= 2**62:
        return None
    weights = np.ones(model.n_places, dtype=np.int64)
    for i in range(model.n_places - 2, -1, -1):
        weights[i] = weights[i + 1] * int(radix[i + 1])
    return weights


def build_reachability(model: SpnModel, cap: int = 1_000_000) -> ReachabilityGraph:
    """Breadth-first closure of the initial marking under enabled firings.

    Raises :class:`StateCapExceeded` past ``cap`` states.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    inputs, inc, rates = model.input, model.incidence, model.rates
    weights = _encoder(model)
    m0 = model.initial_marking.astype(np.int64)

    def keys_of(rows: np.ndarray) -> list:
        if weights is not None:
            return (rows @ weights).tolist()
        return [tuple(r) for r in rows.tolist()]

    seen = {keys_of(m0[None, :])[0]: 0}
    chunks = [m0[None, :]]
    frontier = m0[None, :]
    n = 1
    while frontier.shape[0]:
        succ = [frontier[np.all(frontier >= inputs[:, t], axis=1)] + inc[:, t]
                for t in range(model.n_transitions)]
        succ = np.concatenate(succ, axis=0)
        if weights is not None:
            _, first = np.unique(succ @ weights, return_index=True)
            rows = succ[first]
        else:
            rows = np.unique(succ, axis=0)
        keys = keys_of(rows)
        fresh = [i for i, k in enumerate(keys) if k not in seen]
        if n + len(fresh) > cap:
            raise StateCapExceeded(f"reachability set exceeds cap of {cap} states; use SSA instead")
        for i in fresh:
            seen[keys[i]] = n
            n += 1
        frontier = rows[fresh]
        chunks.append(frontier)
    states = np.concatenate(chunks, axis=0)

    if weights is not None:
        all_codes = states @ weights
        order = np.argsort(all_codes)
        sorted_codes = all_codes[order]

        def lookup(rows):
            return order[np.searchsorted(sorted_codes, rows @ weights)]
    else:
        def lookup(rows):
            return np.array([seen[k] for k in keys_of(rows)], dtype=np.int64)

    src, dst, rate = [], [], []
    idx = np.arange(states.shape[0])
    for t in range(model.n_transitions):
        col = inputs[:, t]
        positive = col > 0
        deg = np.min(states[:, positive] // col[positive], axis=1)
        ok = deg > 0
        if not ok.any():
            continue
        src.append(idx[ok])
        dst.append(lookup(states[ok] + inc[:, t]))
        rate.append(rates[t] * deg[ok])
    if src:
        src_a, dst_a, rate_a = np.concatenate(src), np.concatenate(dst), np.concatenate(rate)
    else:
        src_a = dst_a = np.zeros(0, dtype=np.int64)
        rate_a = np.zeros(0)
    # transitions with equal incidence columns share one CTMC edge
    q = sparse.coo_matrix((rate_a, (src_a, dst_a)), shape=(states.shape[0],) * 2).tocsr()
    q.sum_duplicates()
    q = q.tocoo()
    order = np.lexsort((q.col, q.row))
    states.setflags(write=False)
    return ReachabilityGraph(states, q.row[order].astype(np.int64), q.col[order].astype(np.int64),
                             q.data[order], model.places)


@dataclass(frozen=True, eq=False)
class StateDistribution:
    probabilities: np.ndarray
    time: float


def transient_uniformization(rg: ReachabilityGraph, t: float, tol: float = 1e-10,
                             rate_factor: float = 1.05) -> StateDistribution:
    """pi(t) = sum_k Poisson(k; Lambda t) pi(0) P^k, with P = I + Q / Lambda.

    The Poisson series is truncated on both sides so that the neglected
    mass is below ``tol``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = rg.n_states
    pi = np.zeros(n)
    pi[0] = 1.0
    q = rg.generator()
    exit_max = float(-q.diagonal().min()) if n else 0.0
    if t == 0 or exit_max == 0.0:
        return StateDistribution(pi, float(t))
    lam = rate_factor * exit_max
    pt = (sparse.identity(n, format="csr") + q / lam).T.tocsr()
    mean = lam * t
    left = int(poisson.ppf(tol / 2, mean))
    right = int(poisson.isf(tol / 2, mean)) + 1
    ks = np.arange(left, right + 1)
    w = poisson.pmf(ks, mean)
    out = np.zeros(n)
    v = pi
    for k in range(right + 1):
        if k >= left:
            out += w[k - left] * v
        v = pt @ v
    out /= out.sum()
    log.debug("uniformization: Lambda=%g, terms %d..%d", lam, left, right)
    return StateDistribution(out, float(t))


def marginal(dist: StateDistribution, rg: ReachabilityGraph, place: int | str) -> EmpiricalPmf:
    if isinstance(place, str):
        place = rg.places.index(place)
    col = rg.states[:, place]
    support = np.unique(col)
    mass = np.bincount(np.searchsorted(support, col), weights=dist.probabilities,
                       minlength=support.size)
    return EmpiricalPmf.from_arrays(support, mass, sample_count=0)


def marginal_means(dist: StateDistribution, rg: ReachabilityGraph) -> np.ndarray:
    return dist.probabilities @ rg.states


@dataclass(frozen=True, eq=False)
class SsaTrajectory:
    jump_times: np.ndarray
    states: np.ndarray  # states[0] is the initial marking, states[k] follows jump k
    transitions: np.ndarray
    seed: int

    def state_at(self, u: float) -> np.ndarray:
        k = int(np.searchsorted(self.jump_times, u, side="right"))
        return self.states[k]


def ssa_run(model: SpnModel, t_final: float, seed: int = DEFAULT_SEED,
            run_index: int = 0) -> SsaTrajectory:
    """One Gillespie sample path up to ``t_final`` or absorption.

    Uses the same stream as run ``run_index`` of :func:`ssa_ensemble` with
    the same seed, so its endpoint equals that run's endpoint.
    """
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    _kernels.seed(run_seeds(seed, 1, offset=run_index)[0])
    m = model.initial_marking.astype(np.float64)
    a = np.empty(model.n_transitions)
    inputs = model.input
    times, states, fired = [], [m.astype(np.int64)], []
    u = 0.0
    while True:
        dt, j = _kernels.ssa_step(m, inputs, model.rates, a)
        if j < 0 or u + dt > t_final:
            break
        u += dt
        m = m + model.incidence[:, j]
        times.append(u)
        states.append(m.astype(np.int64))
        fired.append(j)
    return SsaTrajectory(np.array(times), np.array(states), np.array(fired, dtype=np.int64), seed)


def ssa_ensemble(model: SpnModel, t_final: float, runs: int, seed: int = DEFAULT_SEED,
                 sample_times=None, workers: int | None = None) -> Ensemble:
    """Independent SSA runs; run r is driven by a stream derived from (seed, r)."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    times = _sample_grid(t_final, sample_times)
    configure_workers(workers)
    seeds = run_seeds(seed, runs)
    out = np.zeros((runs, times.size, model.n_places), dtype=np.int64)
    counts = np.zeros((runs, model.n_transitions), dtype=np.int64)
    _kernels.ssa_ensemble(seeds, model.initial_marking.astype(np.int64), times,
                          np.ascontiguousarray(model.input), np.ascontiguousarray(model.incidence),
                          np.ascontiguousarray(model.rates), out, counts)
    diag = {"firings": dict(zip(model.transitions, counts.sum(axis=0).tolist()))}
    return Ensemble(model.places, times, out, seed, "ssa", config={"t_final": t_final, "runs": runs},
                    diagnostics=diag)


def _sample_grid(t_final: float, sample_times) -> np.ndarray:
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    if sample_times is None:
        return np.array([float(t_final)])
    times = np.unique(np.append(np.asarray(sample_times, dtype=np.float64), t_final))
    if times[0] < 0 or times[-1] > t_final:
        raise ValueError("sample times must lie in [0, t_final]")
    return times
