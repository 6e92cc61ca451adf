"""Run-ensemble containers and reproducible per-run seeding."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np

DEFAULT_SEED = 42
WORKERS_ENV = "SPNSDE_WORKERS"


def run_seeds(seed: int, runs: int, offset: int = 0) -> np.ndarray:
    """One 32-bit seed per run, a pure function of (seed, run index)."""
    return np.array(
        [np.random.SeedSequence([int(seed), r]).generate_state(1, np.uint32)[0]
         for r in range(offset, offset + runs)],
        dtype=np.uint32,
    )


def configure_workers(workers: int | None = None) -> int:
    """Set the numba thread count from ``workers`` or $SPNSDE_WORKERS.

    Results never depend on this number; only wall time does.
    """
    if workers is None:
        raw = os.environ.get(WORKERS_ENV)
        workers = int(raw) if raw else numba.config.NUMBA_NUM_THREADS
    workers = max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(workers)
    return workers


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Endpoint states of independent runs, plus optional sampled paths.

    ``samples`` has shape (runs, len(times), n_places); ``final_states`` is
    its last time slice.
    """

    places: tuple[str, ...]
    times: np.ndarray
    samples: np.ndarray
    seed: int
    engine: str
    config: Any = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def final_states(self) -> np.ndarray:
        return self.samples[:, -1, :]

    @property
    def runs(self) -> int:
        return self.samples.shape[0]

    def column(self, place: str | int) -> np.ndarray:
        idx = place if isinstance(place, int) else self.places.index(place)
        return self.final_states[:, idx]

    def mean_path(self) -> np.ndarray:
        return self.samples.mean(axis=0)
