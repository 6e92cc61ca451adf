"""Structural analysis: P-semiflows, place bounds, density-dependence class,
and the boundary split that drives the jump-diffusion solver."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import reduce
from math import gcd

import numpy as np

from . import _kernels
from .core import SpnModel


@dataclass(frozen=True)
class SemiflowBasis:
    vectors: tuple[tuple[int, ...], ...]
    constants: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vectors)

    def matrix(self, n_places: int) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, n_places), dtype=np.int64)
        return np.array(self.vectors, dtype=np.int64)


def _normalized(row: list[int]) -> list[int]:
    g = reduce(gcd, (abs(v) for v in row), 0)
    return [v // g for v in row] if g > 1 else row


def farkas(incidence) -> list[tuple[int, ...]]:
    """Minimal-support nonnegative integer solutions of ``nu @ incidence == 0``.

    Classic Farkas elimination on the augmented matrix [L | Id], one
    transition column at a time, with gcd reduction and support-minimality
    pruning. Exact integer arithmetic throughout.
    """
    L = [[int(v) for v in row] for row in np.asarray(incidence)]
    n_p = len(L)
    n_t = len(L[0]) if n_p else 0
    rows = [(L[i][:], [1 if k == i else 0 for k in range(n_p)]) for i in range(n_p)]
    for col in range(n_t):
        keep = [r for r in rows if r[0][col] == 0]
        pos = [r for r in rows if r[0][col] > 0]
        neg = [r for r in rows if r[0][col] < 0]
        for a_l, a_y in pos:
            for b_l, b_y in neg:
                ca, cb = -b_l[col], a_l[col]
                new_l = [ca * x + cb * y for x, y in zip(a_l, b_l)]
                new_y = [ca * x + cb * y for x, y in zip(a_y, b_y)]
                g = reduce(gcd, (abs(v) for v in new_l + new_y), 0)
                if g > 1:
                    new_l = [v // g for v in new_l]
                    new_y = [v // g for v in new_y]
                keep.append((new_l, new_y))
        rows = _prune(keep)
    vectors = {tuple(_normalized(y)) for _, y in rows}
    return sorted(_prune_vectors(vectors), key=_support_key)


def _support(y) -> frozenset[int]:
    return frozenset(i for i, v in enumerate(y) if v)


def _support_key(y):
    # lexicographic on support sets, then on the vector itself
    return (sorted(_support(y)), tuple(y))


def _prune(rows):
    supports = [_support(y) for _, y in rows]
    out, seen = [], set()
    for k, (l_row, y) in enumerate(rows):
        s = supports[k]
        if any(supports[j] < s for j in range(len(rows))):
            continue
        key = tuple(_normalized(l_row + y))
        if key in seen:
            continue
        seen.add(key)
        out.append((l_row, y))
    return out


def _prune_vectors(vectors):
    vs = list(vectors)
    sup = [_support(v) for v in vs]
    return [v for k, v in enumerate(vs) if not any(sup[j] < sup[k] for j in range(len(vs)))]


def minimal_psemiflows(model: SpnModel) -> SemiflowBasis:
    vectors = farkas(model.incidence)
    m0 = [int(v) for v in model.initial_marking]
    consts = tuple(sum(a * b for a, b in zip(v, m0)) for v in vectors)
    return SemiflowBasis(tuple(vectors), consts)


def check_coverage(model: SpnModel, basis: SemiflowBasis) -> bool:
    covered = [False] * model.n_places
    for v in basis.vectors:
        for i, c in enumerate(v):
            if c > 0:
                covered[i] = True
    return all(covered)


class Dependence(str, Enum):
    DENSITY_DEPENDENT = "density-dependent"
    NEARLY_DENSITY_DEPENDENT = "nearly-density-dependent"
    NOT_COVERED = "not-covered"


@dataclass(frozen=True)
class DependenceReport:
    classification: Dependence
    covered: bool
    nonunit_arcs: tuple[tuple[str, str], ...]


def classify_density_dependence(model: SpnModel, basis: SemiflowBasis) -> DependenceReport:
    covered = check_coverage(model, basis)
    nonunit = tuple(
        (model.places[i], model.transitions[j])
        for i, j in zip(*np.nonzero(model.input > 1))
    )
    if not covered:
        cls = Dependence.NOT_COVERED
    elif nonunit:
        cls = Dependence.NEARLY_DENSITY_DEPENDENT
    else:
        cls = Dependence.DENSITY_DEPENDENT
    return DependenceReport(cls, covered, nonunit)


class BoundsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlaceBounds:
    min: np.ndarray
    max: np.ndarray
    provenance: tuple[str, ...]  # "semiflow" or "reachability" per place

    def tolerance(self) -> np.ndarray:
        """Per-place distance within which a fluid coordinate counts as on a bound."""
        return 1e-9 * np.maximum(1.0, self.max.astype(np.float64))


def place_bounds(model: SpnModel, basis: SemiflowBasis, mode: str = "semiflow",
                 cap: int = 1_000_000) -> PlaceBounds:
    """MIN/MAX per place.

    ``mode="semiflow"`` uses the structural bound min_eta floor(m0.nu / nu_j)
    with MIN = 0; ``mode="exact"`` scans the reachability set (at most ``cap``
    states).
    """
    n_p = model.n_places
    if mode == "semiflow":
        if not check_coverage(model, basis):
            raise BoundsError("semiflow bounds need every place covered by a P-semiflow")
        hi = np.full(n_p, np.iinfo(np.int64).max, dtype=np.int64)
        for v, c in zip(basis.vectors, basis.constants):
            for j, nu_j in enumerate(v):
                if nu_j:
                    hi[j] = min(hi[j], c // nu_j)
        return PlaceBounds(np.zeros(n_p, dtype=np.int64), hi, ("semiflow",) * n_p)
    if mode == "exact":
        from .exact import build_reachability

        rg = build_reachability(model, cap)
        return PlaceBounds(rg.states.min(axis=0), rg.states.max(axis=0), ("reachability",) * n_p)
    raise ValueError(f"unknown bounds mode {mode!r}")


@dataclass(frozen=True, eq=False)
class BoundarySplit:
    star_places: frozenset[int]
    star_transitions: frozenset[int]
    interior_transitions: frozenset[int]
    theta: np.ndarray


class OutsideBox(ValueError):
    pass


def boundary_split(state, bounds: PlaceBounds, model: SpnModel) -> BoundarySplit:
    x = np.asarray(state, dtype=np.float64)
    lo = bounds.min.astype(np.float64)
    hi = bounds.max.astype(np.float64)
    eps = bounds.tolerance()
    if (x < lo - eps).any() or (x > hi + eps).any():
        raise OutsideBox(f"state {x.tolist()} outside the box [{lo.tolist()}, {hi.tolist()}]")
    at = np.empty(model.n_places, dtype=np.bool_)
    _kernels.boundary_mask(x, lo, hi, eps, at)
    th = np.empty(model.n_transitions, dtype=np.int64)
    _kernels.theta(model.incidence, at, th)
    star = frozenset(int(t) for t in np.nonzero(th)[0])
    th.setflags(write=False)
    return BoundarySplit(
        star_places=frozenset(int(p) for p in np.nonzero(at)[0]),
        star_transitions=star,
        interior_transitions=frozenset(range(model.n_transitions)) - star,
        theta=th,
    )
