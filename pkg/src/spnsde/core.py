"""Stochastic Petri net data model and marking dynamics.

All transitions follow infinite-server semantics: the intensity of a
transition is its rate times its enabling degree in the current marking.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np


class ModelError(ValueError):
    """Raised for a malformed model description.

    ``path`` locates the offending field (e.g. ``transitions[2].rate``).
    """

    def __init__(self, message: str, path: str = "", where: str = ""):
        self.message = message
        self.path = path
        self.where = where
        text = f"{path}: {message}" if path else message
        super().__init__(f"{where}: {text}" if where else text)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpnModel:
    places: tuple[str, ...]
    transitions: tuple[str, ...]
    input: np.ndarray  # n_p x n_t, int64
    output: np.ndarray  # n_p x n_t, int64
    initial_marking: np.ndarray  # n_p, int64
    rates: np.ndarray  # n_t, float64
    alpha: np.ndarray | None = None
    name: str = ""
    notes: str = ""
    incidence: np.ndarray = field(init=False)

    def __post_init__(self):
        for attr, dtype in (("input", np.int64), ("output", np.int64),
                            ("initial_marking", np.int64), ("rates", np.float64)):
            object.__setattr__(self, attr, _frozen(np.asarray(getattr(self, attr), dtype=dtype)))
        if self.alpha is not None:
            object.__setattr__(self, "alpha", _frozen(np.asarray(self.alpha, dtype=np.int64)))
        object.__setattr__(self, "incidence", _frozen(self.output - self.input))

    @property
    def n_places(self) -> int:
        return len(self.places)

    @property
    def n_transitions(self) -> int:
        return len(self.transitions)

    def place_index(self, name: str) -> int:
        return self.places.index(name)

    def transition_index(self, name: str) -> int:
        return self.transitions.index(name)

    def with_initial_marking(self, m0) -> "SpnModel":
        return replace(self, initial_marking=np.asarray(m0, dtype=np.int64))

    def to_document(self) -> dict[str, Any]:
        """Inverse of :func:`validate_model`."""
        doc: dict[str, Any] = {}
        if self.name:
            doc["name"] = self.name
        doc["places"] = list(self.places)
        trs = []
        for j, t in enumerate(self.transitions):
            trs.append({
                "name": t,
                "rate": float(self.rates[j]),
                "input": {p: int(self.input[i, j]) for i, p in enumerate(self.places) if self.input[i, j]},
                "output": {p: int(self.output[i, j]) for i, p in enumerate(self.places) if self.output[i, j]},
            })
        doc["transitions"] = trs
        doc["initial_marking"] = {p: int(v) for p, v in zip(self.places, self.initial_marking) if v}
        if self.alpha is not None:
            doc["alpha"] = {p: int(v) for p, v in zip(self.places, self.alpha) if v}
        if self.notes:
            doc["notes"] = self.notes
        return doc

    def __eq__(self, other):
        if not isinstance(other, SpnModel):
            return NotImplemented
        same_alpha = (self.alpha is None and other.alpha is None) or (
            self.alpha is not None and other.alpha is not None
            and np.array_equal(self.alpha, other.alpha))
        return (self.places == other.places and self.transitions == other.transitions
                and np.array_equal(self.input, other.input)
                and np.array_equal(self.output, other.output)
                and np.array_equal(self.initial_marking, other.initial_marking)
                and np.array_equal(self.rates, other.rates) and same_alpha)

    __hash__ = None  # type: ignore[assignment]


def _names(raw, path: str) -> tuple[str, ...]:
    if not isinstance(raw, (list, tuple)):
        raise ModelError("expected a list of names", path)
    names = []
    for k, n in enumerate(raw):
        if not isinstance(n, str) or not n:
            raise ModelError("name must be a non-empty string", f"{path}[{k}]")
        names.append(n)
    seen = set()
    for k, n in enumerate(names):
        if n in seen:
            raise ModelError(f"duplicate name {n!r}", f"{path}[{k}]")
        seen.add(n)
    return tuple(names)


def _count_map(raw, places: Sequence[str], path: str, *, positive: bool) -> np.ndarray:
    out = np.zeros(len(places), dtype=np.int64)
    if raw is None:
        return out
    if not isinstance(raw, Mapping):
        raise ModelError("expected a mapping of place name to count", path)
    for name, v in raw.items():
        if name not in places:
            raise ModelError(f"unknown place {name!r}", f"{path}.{name}")
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ModelError(f"count must be an integer, got {v!r}", f"{path}.{name}")
        if v < 0:
            raise ModelError(f"negative multiplicity {v}", f"{path}.{name}")
        if positive and v == 0:
            raise ModelError("arc multiplicity must be positive", f"{path}.{name}")
        out[places.index(name)] = int(v)
    return out


def validate_model(doc: Mapping[str, Any]) -> SpnModel:
    """Assemble an :class:`SpnModel` from a model document.

    Matrices follow the declared place and transition order. Raises
    :class:`ModelError` with a field path on any violation.
    """
    if not isinstance(doc, Mapping):
        raise ModelError("model document must be a mapping")
    if "places" not in doc:
        raise ModelError("missing key", "places")
    places = _names(doc["places"], "places")
    if not places:
        raise ModelError("no places", "places")
    raw_trs = doc.get("transitions")
    if not raw_trs:
        raise ModelError("no transitions", "transitions")
    if not isinstance(raw_trs, (list, tuple)):
        raise ModelError("expected a list of transition records", "transitions")

    names, rates, cols_in, cols_out = [], [], [], []
    for j, tr in enumerate(raw_trs):
        path = f"transitions[{j}]"
        if not isinstance(tr, Mapping):
            raise ModelError("transition must be a mapping", path)
        name = tr.get("name")
        if not isinstance(name, str) or not name:
            raise ModelError("missing transition name", f"{path}.name")
        if name in names:
            raise ModelError(f"duplicate name {name!r}", f"{path}.name")
        if name in places:
            raise ModelError(f"name {name!r} used for both a place and a transition", f"{path}.name")
        rate = tr.get("rate")
        if isinstance(rate, bool) or not isinstance(rate, (int, float)):
            raise ModelError(f"rate must be a number, got {rate!r}", f"{path}.rate")
        if not np.isfinite(rate) or rate <= 0:
            raise ModelError(f"non-positive rate {rate}", f"{path}.rate")
        unknown = set(tr) - {"name", "rate", "input", "output"}
        if unknown:
            raise ModelError(f"unknown keys {sorted(unknown)}", path)
        i_col = _count_map(tr.get("input"), places, f"{path}.input", positive=True)
        o_col = _count_map(tr.get("output"), places, f"{path}.output", positive=True)
        if not i_col.any():
            # infinite-server intensity is undefined without input places
            raise ModelError(f"transition {name!r} has no input places", f"{path}.input")
        if np.array_equal(i_col, o_col):
            raise ModelError(f"transition {name!r} does not change the marking", path)
        names.append(name)
        rates.append(float(rate))
        cols_in.append(i_col)
        cols_out.append(o_col)

    m0 = _count_map(doc.get("initial_marking"), places, "initial_marking", positive=False)
    alpha = None
    if doc.get("alpha") is not None:
        alpha = _count_map(doc["alpha"], places, "alpha", positive=False)
    return SpnModel(
        places=places,
        transitions=tuple(names),
        input=np.stack(cols_in, axis=1),
        output=np.stack(cols_out, axis=1),
        initial_marking=m0,
        rates=np.array(rates),
        alpha=alpha,
        name=str(doc.get("name", "")),
        notes=str(doc.get("notes", "")),
    )


def enabling_degree(model: SpnModel, m, t: int) -> int:
    """min over input places of floor(m(p) / I(p, t)); 0 when disabled."""
    col = model.input[:, t]
    m = np.asarray(m)
    inputs = col > 0
    return int(np.min(m[inputs] // col[inputs]))


def transition_intensity(model: SpnModel, m, t: int) -> float:
    return float(model.rates[t]) * enabling_degree(model, m, t)


def state_rate(model: SpnModel, m, m2) -> float:
    delta = np.asarray(m2, dtype=np.int64) - np.asarray(m, dtype=np.int64)
    if not delta.any():
        return 0.0
    total = 0.0
    for t in range(model.n_transitions):
        if np.array_equal(model.incidence[:, t], delta):
            total += transition_intensity(model, m, t)
    return total


class DisabledTransition(ValueError):
    pass


def fire(model: SpnModel, m, t: int) -> np.ndarray:
    if enabling_degree(model, m, t) < 1:
        raise DisabledTransition(f"transition {model.transitions[t]!r} is disabled in {list(m)}")
    return np.asarray(m, dtype=np.int64) + model.incidence[:, t]


@dataclass(frozen=True, eq=False)
class ScalingFamily:
    """Models sharing a net whose initial markings grow as ``N * alpha``."""

    base: SpnModel
    alpha: np.ndarray
    N: int = 1

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.int64)
        if a.shape != (self.base.n_places,) or (a < 0).any():
            raise ModelError("alpha must be a nonnegative vector over places", "alpha")
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        object.__setattr__(self, "alpha", _frozen(a))

    @classmethod
    def of(cls, model: SpnModel, N: int = 1) -> "ScalingFamily":
        if model.alpha is None:
            raise ModelError("model declares no alpha vector", "alpha")
        return cls(model, model.alpha, N)


def instantiate(family: ScalingFamily) -> SpnModel:
    return replace(family.base, initial_marking=int(family.N) * family.alpha, alpha=family.alpha)
