"""Deterministic fluid limit: transition speeds, drift field and a fixed-step RK4."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import SpnModel


class IntegrationError(RuntimeError):
    pass


def fluid_speeds(model: SpnModel, x) -> np.ndarray:
    out = np.empty(model.n_transitions)
    _kernels.fluid_speeds(model.input, model.rates, np.asarray(x, dtype=np.float64), out)
    return out


def fluid_speed(model: SpnModel, x, t: int) -> float:
    """lambda(t) * min_j x_j / I(p_j, t), the enabling degree without the floor."""
    return float(fluid_speeds(model, x)[t])


def drift(model: SpnModel, x, transitions=None) -> np.ndarray:
    """sum_t sigma(t, x) L(., t), optionally restricted to ``transitions``."""
    sig = fluid_speeds(model, x)
    if transitions is not None:
        mask = np.zeros(model.n_transitions, dtype=bool)
        mask[list(transitions)] = True
        sig = np.where(mask, sig, 0.0)
    return model.incidence @ sig


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n_p)
    places: tuple[str, ...]
    clamps: int = 0

    def at(self, place: str) -> np.ndarray:
        return self.states[:, self.places.index(place)]


def solve_ode(model: SpnModel, t_final: float, step: float, x0=None) -> Trajectory:
    """Classical RK4 at a fixed step from the initial marking.

    The last step is shortened to land on ``t_final``. Coordinates pushed
    below zero by truncation error are reset to zero and counted in
    ``Trajectory.clamps``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    x = np.asarray(model.initial_marking if x0 is None else x0, dtype=np.float64).copy()
    n_steps = int(np.ceil(t_final / step - 1e-9)) if t_final > 0 else 0
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, model.n_places))
    times[0], states[0] = 0.0, x
    clamps = 0

    def f(y):
        return drift(model, y)

    u = 0.0
    for k in range(1, n_steps + 1):
        h = min(step, t_final - u) if k < n_steps else t_final - u
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t={u + h}")
        neg = x < 0
        if neg.any():
            clamps += int(neg.sum())
            x[neg] = 0.0
        u = k * step if k < n_steps else t_final
        times[k], states[k] = u, x
    return Trajectory(times, states, model.places, clamps)
