"""Bundled example nets.

The SIR and client-server nets are reconstructions: only their place and
transition names and the rates are known, so the arc structure recorded in
each model's ``notes`` is a modelling choice.
"""
from __future__ import annotations

from importlib import resources
from typing import Callable

import numpy as np

from .core import ModelError, SpnModel, validate_model

SIR_PLACES = ("Outside", "S", "I", "R")
SIR_RATES = {
    "exp1": (0.5, 0.5, 1.0, 0.5, 0.02, 0.1, 0.02),
    "exp2": (1.0, 0.01, 1.0, 0.5, 0.02, 0.1, 0.02),
}
SIR_ALPHA = {"exp1": ((1, 1, 1, 1), 50), "exp2": ((1, 0, 0, 0), 200)}

SIR_NOTES = """\
Arc structure reconstructed with unit multiplicities.
BecomeI is S + I -> 2 I: infection needs an infected member and keeps the
population constant. ArriveS/ArriveI move a member from Outside into S/I;
LeaveS/LeaveI/LeaveR move one back. Every transition moves one token, so
(1,1,1,1) is the only minimal P-semiflow."""

CLIENT_SERVER_NOTES = """\
Arc structure reconstructed with unit multiplicities.
request: Sidle + Clocal -> Slog + Cwaiting (synchronisation);
log: Slog -> Sidle; endLocCl: Cwaiting -> Clocal (named endLocC in the
rate table); breakS: Sidle -> Sbroken; breakC: Clocal -> Cbroken;
breakDS: Sidle + Sbroken -> 2 Sbroken and breakDC: Clocal + Cbroken ->
2 Cbroken (contagion, as for BecomeI); fixS: Sbroken -> Sidle;
fixC: Cbroken -> Clocal. Servers and clients are each conserved."""


def _tr(name, rate, inp, out):
    return {"name": name, "rate": float(rate), "input": dict(inp), "output": dict(out)}


def sir_document(config: str = "exp1") -> dict:
    if config not in SIR_RATES:
        raise ValueError(f"unknown SIR configuration {config!r}")
    r = SIR_RATES[config]
    alpha, n = SIR_ALPHA[config]
    return {
        "name": f"sir_{config}",
        "places": list(SIR_PLACES),
        "transitions": [
            _tr("ArriveS", r[0], {"Outside": 1}, {"S": 1}),
            _tr("ArriveI", r[1], {"Outside": 1}, {"I": 1}),
            _tr("BecomeI", r[2], {"S": 1, "I": 1}, {"I": 2}),
            _tr("BecomeR", r[3], {"I": 1}, {"R": 1}),
            _tr("LeaveS", r[4], {"S": 1}, {"Outside": 1}),
            _tr("LeaveI", r[5], {"I": 1}, {"Outside": 1}),
            _tr("LeaveR", r[6], {"R": 1}, {"Outside": 1}),
        ],
        "initial_marking": {p: n * a for p, a in zip(SIR_PLACES, alpha) if a},
        "alpha": {p: a for p, a in zip(SIR_PLACES, alpha) if a},
        "notes": SIR_NOTES,
    }


def sir(config: str = "exp1") -> SpnModel:
    """SIR-like epidemic net; ``exp1`` starts at 50 per place, ``exp2`` with 200 Outside."""
    return validate_model(sir_document(config))


def client_server_document() -> dict:
    return {
        "name": "client_server",
        "places": ["Sidle", "Slog", "Sbroken", "Clocal", "Cwaiting", "Cbroken"],
        "transitions": [
            _tr("request", 1.0, {"Sidle": 1, "Clocal": 1}, {"Slog": 1, "Cwaiting": 1}),
            _tr("endLocCl", 0.2, {"Cwaiting": 1}, {"Clocal": 1}),
            _tr("log", 12.0, {"Slog": 1}, {"Sidle": 1}),
            _tr("breakS", 0.0007, {"Sidle": 1}, {"Sbroken": 1}),
            _tr("breakC", 0.00002, {"Clocal": 1}, {"Cbroken": 1}),
            _tr("breakDS", 0.8, {"Sidle": 1, "Sbroken": 1}, {"Sbroken": 2}),
            _tr("breakDC", 1.4, {"Clocal": 1, "Cbroken": 1}, {"Cbroken": 2}),
            _tr("fixS", 0.001, {"Sbroken": 1}, {"Sidle": 1}),
            _tr("fixC", 0.001, {"Cbroken": 1}, {"Clocal": 1}),
        ],
        "initial_marking": {"Sidle": 120, "Clocal": 10000},
        "notes": CLIENT_SERVER_NOTES,
    }


def client_server() -> SpnModel:
    return validate_model(client_server_document())


def cycle_document(l1: float = 1.0, l2: float = 2.0, m0=(100, 0)) -> dict:
    return {
        "name": "cycle",
        "places": ["A", "B"],
        "transitions": [
            _tr("t1", l1, {"A": 1}, {"B": 1}),
            _tr("t2", l2, {"B": 1}, {"A": 1}),
        ],
        "initial_marking": {"A": int(m0[0]), "B": int(m0[1])},
        "alpha": {"A": 1},
    }


def cycle(l1: float = 1.0, l2: float = 2.0, m0=(100, 0)) -> SpnModel:
    """Two places exchanging tokens: A --t1--> B --t2--> A."""
    return validate_model(cycle_document(l1, l2, m0))


def closed_queue_network(r: int, mu, routing, N: int) -> SpnModel:
    """Closed network of r infinite-server queues, all N customers start at queue 1.

    Queue i serves at rate mu[i] per customer and routes to j with
    probability routing[i][j]; each (i, j) with positive probability
    becomes one transition Qi -> Qj.
    """
    mu = np.asarray(mu, dtype=np.float64)
    P = np.asarray(routing, dtype=np.float64)
    if r < 2 or mu.shape != (r,) or P.shape != (r, r):
        raise ModelError("need r >= 2, r service rates and an r x r routing matrix", "routing")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0) or np.any(np.diag(P) != 0):
        raise ModelError("routing rows must be probability vectors with zero diagonal", "routing")
    if np.any(mu <= 0):
        raise ModelError("service rates must be positive", "mu")
    places = [f"Q{i + 1}" for i in range(r)]
    trs = [
        _tr(f"t{i + 1}_{j + 1}", mu[i] * P[i, j], {places[i]: 1}, {places[j]: 1})
        for i in range(r) for j in range(r) if P[i, j] > 0
    ]
    return validate_model({
        "name": f"closed_queues_{r}",
        "places": places,
        "transitions": trs,
        "initial_marking": {places[0]: int(N)},
        "alpha": {places[0]: 1},
    })


CATALOG: dict[str, Callable[[], SpnModel]] = {
    "sir_exp1": lambda: sir("exp1"),
    "sir_exp2": lambda: sir("exp2"),
    "client_server": client_server,
    "cycle": cycle,
}


def bundled_path(name: str):
    """Path of the shipped model document for a catalog entry."""
    return resources.files("spnsde") / "nets" / f"{name}.yaml"
