"""Poincare recurrence estimates for the quasi-periodic coherence signal.

The per-particle frequency is twice the smallest gap between that
particle's couplings; the recurrence time of the whole signal is
2*pi over the smallest gap between those frequencies. Because the
resulting distribution is extremely heavy-tailed, ensemble summaries
carry the median and the log10 mean alongside mean and std.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .model import SpinSystem, SystemConfig, build_system, derive_seed

DEGENERATE_SENTINEL = float("inf")


@dataclass(frozen=True)
class RecurrenceEstimate:
    """Recurrence-time estimate for one system (gt units)."""

    period: float
    frequencies: np.ndarray
    minimizing_pair: tuple[int, int]
    degenerate: bool


@dataclass(frozen=True)
class RecurrenceStats:
    """Ensemble summary of recurrence times over random configurations."""

    config: SystemConfig
    samples: int
    mean: float
    std: float
    median: float
    log10_mean: float
    degenerate_fraction: float


def particle_frequency(system: SpinSystem, particle: int) -> float:
    """Characteristic frequency of one particle: twice the minimum gap
    between its couplings to two distinct other particles."""
    n = system.n_particles
    if n < 3:
        raise ValueError(f"need N >= 3 for coupling gaps, got N={n}")
    if not 0 <= particle < n:
        raise IndexError(f"particle index {particle} out of range [0, {n})")
    g = np.delete(system.couplings[particle], particle)
    gaps = np.diff(np.sort(g))
    freq = 2.0 * float(gaps.min())
    if freq == 0.0:
        raise ValueError(f"particle {particle} has degenerate (equal) couplings")
    return freq


def _all_frequencies(system: SpinSystem) -> np.ndarray:
    g = system.couplings
    n = g.shape[0]
    # Sort each row excluding the diagonal zero, then take adjacent gaps.
    off = np.sort(g[~np.eye(n, dtype=bool)].reshape(n, n - 1), axis=1)
    return 2.0 * np.diff(off, axis=1).min(axis=1)


def recurrence_time(system: SpinSystem) -> RecurrenceEstimate:
    """Estimate the recurrence period 2*pi / min_{i != i'} |w_i - w_i'|.

    Degenerate systems (any zero frequency gap, possible with tied
    uniform-random couplings) get an infinite sentinel instead of an error.
    """
    if system.n_particles < 3:
        raise ValueError(f"need N >= 3, got N={system.n_particles}")
    freqs = _all_frequencies(system)
    order = np.argsort(freqs)
    gaps = np.diff(freqs[order])
    k = int(np.argmin(gaps))
    pair = (int(order[k]), int(order[k + 1]))
    min_gap = float(gaps[k])
    if min_gap == 0.0 or np.any(freqs == 0.0):
        return RecurrenceEstimate(
            period=DEGENERATE_SENTINEL, frequencies=freqs,
            minimizing_pair=pair, degenerate=True,
        )
    return RecurrenceEstimate(
        period=2.0 * np.pi / min_gap, frequencies=freqs,
        minimizing_pair=pair, degenerate=False,
    )


def recurrence_stats(
    cell: SystemConfig, samples: int, master_seed: int
) -> RecurrenceStats:
    """Recurrence-time statistics over independent random configurations.

    Degenerate draws are excluded from the numeric summaries and reported
    as a separate fraction.
    """
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    periods = []
    n_degenerate = 0
    for i in range(samples):
        system = build_system(
            dataclasses.replace(cell, rng_seed=derive_seed(master_seed, i))
        )
        est = recurrence_time(system)
        if est.degenerate:
            n_degenerate += 1
        else:
            periods.append(est.period)
    arr = np.array(periods)
    if arr.size == 0:
        mean = std = median = log10_mean = float("nan")
    else:
        mean = float(arr.mean())
        std = float(arr.std())
        median = float(np.median(arr))
        log10_mean = float(np.log10(arr).mean())
    return RecurrenceStats(
        config=cell,
        samples=samples,
        mean=mean,
        std=std,
        median=median,
        log10_mean=log10_mean,
        degenerate_fraction=n_degenerate / samples,
    )
