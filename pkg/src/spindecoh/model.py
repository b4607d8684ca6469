"""Spin-system construction.

Builds the static ingredients of a run: N spin-1/2 particles placed
uniformly at random in a D-dimensional box, a symmetric coupling matrix
derived from an eta / r**epsilon potential (or drawn uniformly at random),
and per-particle superposition amplitudes (a_k, b_k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AMPLITUDE_MODES = ("equal-superposition", "random-complex")
COUPLING_MODES = ("potential", "uniform-random")

# Particles closer than this fraction of the box side are resampled so that
# 1/r couplings stay finite.
MIN_SEPARATION_FACTOR = 1e-9
MAX_PLACEMENT_ATTEMPTS = 1000


class PlacementError(RuntimeError):
    """Could not place a particle after the maximum number of resamples."""


class SingularCouplingError(ValueError):
    """Two particles coincide, giving an infinite coupling."""


def splitmix64(x: int) -> int:
    """One SplitMix64 output step; used to mix seeds deterministically."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-member seed for ensemble run `index`: splitmix64(master ^ mixed index).

    The mixing keeps nearby master seeds / indices statistically independent
    and is documented here so results can be reproduced elsewhere.
    """
    return splitmix64((master_seed & 0xFFFFFFFFFFFFFFFF) ^ splitmix64(index))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class SystemConfig:
    """Parameters defining one random spin system."""

    n_particles: int
    dimension: int = 3
    density: float = 1.0
    eta: float = 1.0
    epsilon: float = 1.0
    amplitude_mode: str = "equal-superposition"
    coupling_mode: str = "potential"
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not self.density > 0:
            raise ValueError(f"density must be positive, got {self.density}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.amplitude_mode not in AMPLITUDE_MODES:
            raise ValueError(f"unknown amplitude_mode {self.amplitude_mode!r}")
        if self.coupling_mode not in COUPLING_MODES:
            raise ValueError(f"unknown coupling_mode {self.coupling_mode!r}")


@dataclass(frozen=True)
class SpinSystem:
    """An assembled system: positions, amplitudes and coupling matrix.

    Immutable after construction (arrays are marked read-only), so instances
    are safe to share across threads.
    """

    positions: np.ndarray      # (N, D)
    amp_a: np.ndarray          # (N,) complex
    amp_b: np.ndarray          # (N,) complex
    couplings: np.ndarray      # (N, N) symmetric, zero diagonal
    eta: float
    epsilon: float
    dimension: int

    def __post_init__(self):
        for arr in (self.positions, self.amp_a, self.amp_b, self.couplings):
            arr.setflags(write=False)

    @property
    def n_particles(self) -> int:
        return self.amp_a.shape[0]


def box_side(n_particles: int, density: float, dimension: int) -> float:
    """Side length l = (N / rho)**(1/D) of the box holding N particles at
    density rho."""
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    if not density > 0:
        raise ValueError(f"density must be positive, got {density}")
    if dimension not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dimension}")
    return (n_particles / density) ** (1.0 / dimension)


def place_particles(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw N positions uniformly in the box, resampling any particle that
    lands closer than MIN_SEPARATION_FACTOR * l to an earlier one."""
    n, d = config.n_particles, config.dimension
    side = box_side(n, config.density, d)
    min_sep = MIN_SEPARATION_FACTOR * side
    positions = np.empty((n, d))
    for i in range(n):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            candidate = rng.random(d) * side
            if i == 0:
                break
            dist = np.linalg.norm(positions[:i] - candidate, axis=1)
            if dist.min() >= min_sep:
                break
        else:
            raise PlacementError(
                f"could not place particle {i} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
        positions[i] = candidate
    return positions


def build_couplings(positions: np.ndarray, eta: float, epsilon: float) -> np.ndarray:
    """Coupling matrix g_ij = eta / |r_i - r_j|**epsilon (symmetric, zero
    diagonal)."""
    diff = positions[:, None, :] - positions[None, :, :]
    r = np.linalg.norm(diff, axis=2)
    n = r.shape[0]
    off = ~np.eye(n, dtype=bool)
    if n > 1 and r[off].min() == 0.0:
        raise SingularCouplingError("coincident particles give an infinite coupling")
    g = np.zeros_like(r)
    g[off] = eta / r[off] ** epsilon
    return g


def _draw_amplitudes(config: SystemConfig, rng: np.random.Generator):
    n = config.n_particles
    if config.amplitude_mode == "equal-superposition":
        a = np.full(n, 1.0 / np.sqrt(2.0), dtype=complex)
        b = a.copy()
    else:
        # |a|^2 uniform on [0,1], independent uniform phases.
        w = rng.random(n)
        phase_a = rng.random(n) * 2.0 * np.pi
        phase_b = rng.random(n) * 2.0 * np.pi
        a = np.sqrt(w) * np.exp(1j * phase_a)
        b = np.sqrt(1.0 - w) * np.exp(1j * phase_b)
    return a, b


def build_system(config: SystemConfig) -> SpinSystem:
    """Assemble a SpinSystem from a config; deterministic given the seed."""
    rng = make_rng(config.rng_seed)
    positions = place_particles(config, rng)
    if config.coupling_mode == "potential":
        couplings = build_couplings(positions, config.eta, config.epsilon)
    else:
        n = config.n_particles
        couplings = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        couplings[iu] = rng.random(len(iu[0]))
        couplings += couplings.T
    a, b = _draw_amplitudes(config, rng)
    return SpinSystem(
        positions=positions,
        amp_a=a,
        amp_b=b,
        couplings=couplings,
        eta=config.eta,
        epsilon=config.epsilon,
        dimension=config.dimension,
    )
