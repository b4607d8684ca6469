"""Closed-form reduced-density-matrix dynamics.

Under the pairwise sigma_z x sigma_z Hamiltonian each single-particle
reduced density matrix keeps its diagonal and its off-diagonal element
evolves as

    z_l(t) = a_l b_l* prod_{k != l} (|a_k|^2 e^{-2i g_lk t} + |b_k|^2 e^{+2i g_lk t}).

Everything here (system coherence Xi(t), subsystem variants, entropies,
trajectory sampling) is built on that product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SpinSystem

LN2 = float(np.log(2.0))

# Radicand of the eigenvalue square root may leave [0, 1] by round-off; this
# much is silently clamped, anything worse is a hard error.
EIGENVALUE_CLAMP = 1e-12

# Upper bound on n_samples * N for trajectory sampling.
DEFAULT_MAX_ELEMENTS = 50_000_000

# Target element count per vectorized time chunk (memory/speed trade-off).
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled time series of the decoherence function.

    times: (n,) grid starting at 0 with uniform step (gt units).
    xi: (n,) values of Xi(t).
    coherences: optional (n, N) per-particle |z_l(t)|.
    entropy: optional (n,) total subsystem entropy S_tot(t) in nats.
    """

    times: np.ndarray
    xi: np.ndarray
    coherences: np.ndarray | None = None
    entropy: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def _is_equal_superposition(system: SpinSystem) -> bool:
    return bool(
        np.all(np.abs(np.abs(system.amp_a) ** 2 - 0.5) < 1e-15)
        and np.all(np.abs(np.abs(system.amp_b) ** 2 - 0.5) < 1e-15)
    )


def coherence(system: SpinSystem, particle: int, t: float) -> complex:
    """Off-diagonal element z_l(t) of particle `particle` (0-based)."""
    n = system.n_particles
    if not 0 <= particle < n:
        raise IndexError(f"particle index {particle} out of range [0, {n})")
    a, b = system.amp_a, system.amp_b
    g = system.couplings[particle]
    phase = np.exp(-2j * g * t)
    factors = np.abs(a) ** 2 * phase + np.abs(b) ** 2 * np.conj(phase)
    factors[particle] = 1.0
    return complex(a[particle] * np.conj(b[particle]) * np.prod(factors))


def coherence_magnitudes(system: SpinSystem, times: np.ndarray) -> np.ndarray:
    """|z_l(t)| for all particles at each time; shape (len(times), N).

    Vectorized over time in chunks. Equal superpositions use the real
    closed form |z_l| = 0.5 * prod |cos(2 g_lk t)|.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = system.n_particles
    g = system.couplings
    ab_mod = np.abs(system.amp_a * np.conj(system.amp_b))
    out = np.empty((times.size, n))
    chunk = max(1, _CHUNK_ELEMENTS // (n * n))
    equal = _is_equal_superposition(system)
    if not equal:
        pa = (np.abs(system.amp_a) ** 2)[None, None, :]
        pb = (np.abs(system.amp_b) ** 2)[None, None, :]
    diag = np.arange(n)
    for start in range(0, times.size, chunk):
        tc = times[start:start + chunk]
        ang = 2.0 * tc[:, None, None] * g[None, :, :]
        if equal:
            factors = np.abs(np.cos(ang))
        else:
            ph = np.exp(-1j * ang)
            factors = np.abs(pa * ph + pb * np.conj(ph))
        factors[:, diag, diag] = 1.0
        out[start:start + chunk] = ab_mod[None, :] * factors.prod(axis=2)
    return out


def xi(system: SpinSystem, t: float) -> float:
    """Whole-system decoherence function Xi(t) = (1/N) sum_l |z_l(t)|."""
    return float(coherence_magnitudes(system, np.array([t]))[0].mean())


def xi_subset(system: SpinSystem, subset, t: float) -> float:
    """Decoherence function of a subsystem: mean |z_l(t)| over l in subset."""
    subset = np.asarray(sorted(set(subset)), dtype=int)
    if subset.size == 0:
        raise ValueError("subset must be non-empty")
    if subset.min() < 0 or subset.max() >= system.n_particles:
        raise IndexError("subset contains out-of-range particle indices")
    mags = coherence_magnitudes(system, np.array([t]))[0]
    return float(mags[subset].mean())


def y_complement(system: SpinSystem, t: float) -> float:
    """Entropy-like complement Y(t) = (1/N) sum |a_k b_k*| - Xi(t)."""
    ceiling = float(np.abs(system.amp_a * np.conj(system.amp_b)).mean())
    return ceiling - xi(system, t)


def eigenvalue_pair(a: complex, b: complex, z: complex) -> tuple[float, float]:
    """Eigenvalues (lam+, lam-) of the 2x2 reduced density matrix
    [[|a|^2, z], [z*, |b|^2]]."""
    radicand = 1.0 - 4.0 * (abs(a) ** 2 * abs(b) ** 2 - abs(z) ** 2)
    if radicand < -EIGENVALUE_CLAMP or radicand > 1.0 + EIGENVALUE_CLAMP:
        raise ValueError(f"eigenvalue radicand {radicand} outside [0, 1]")
    radicand = min(max(radicand, 0.0), 1.0)
    root = 0.5 * np.sqrt(radicand)
    return 0.5 + root, 0.5 - root


def _qubit_entropies(pq: np.ndarray, z_abs: np.ndarray) -> np.ndarray:
    """Single-qubit entropies (nats) from |a|^2|b|^2 products and |z|;
    broadcasts over leading axes."""
    radicand = 1.0 - 4.0 * (pq - z_abs**2)
    bad = (radicand < -EIGENVALUE_CLAMP) | (radicand > 1.0 + EIGENVALUE_CLAMP)
    if np.any(bad):
        raise ValueError("eigenvalue radicand outside [0, 1] beyond round-off")
    root = 0.5 * np.sqrt(np.clip(radicand, 0.0, 1.0))
    lam = np.stack([0.5 + root, 0.5 - root], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0.0, -lam * np.log(np.where(lam > 0.0, lam, 1.0)), 0.0)
    return terms.sum(axis=-1)


def particle_entropies(system: SpinSystem, z_abs: np.ndarray) -> np.ndarray:
    """Per-particle entropies (nats) from precomputed |z_l| values."""
    pq = np.abs(system.amp_a) ** 2 * np.abs(system.amp_b) ** 2
    return _qubit_entropies(pq, np.asarray(z_abs, dtype=float))


def entropy_total(system: SpinSystem, t: float) -> float:
    """Total subsystem entropy S_tot(t) = sum_l S(rho_l) in nats."""
    z_abs = coherence_magnitudes(system, np.array([t]))[0]
    pq = np.abs(system.amp_a) ** 2 * np.abs(system.amp_b) ** 2
    return float(_qubit_entropies(pq, z_abs).sum())


def sample_trajectory(
    system: SpinSystem,
    dt: float = 0.05,
    n_samples: int = 2001,
    include_coherences: bool = False,
    include_entropy: bool = False,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
) -> Trajectory:
    """Sample Xi(t) on the uniform grid t_i = i * dt, i = 0..n_samples-1."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    if n_samples * system.n_particles > max_elements:
        raise ValueError(
            f"trajectory of {n_samples} samples x {system.n_particles} particles "
            f"exceeds the element cap {max_elements}"
        )
    times = dt * np.arange(n_samples)
    z_abs = coherence_magnitudes(system, times)
    entropy = None
    if include_entropy:
        pq = np.abs(system.amp_a) ** 2 * np.abs(system.amp_b) ** 2
        entropy = _qubit_entropies(pq[None, :], z_abs).sum(axis=1)
    return Trajectory(
        times=times,
        xi=z_abs.mean(axis=1),
        coherences=z_abs if include_coherences else None,
        entropy=entropy,
    )
