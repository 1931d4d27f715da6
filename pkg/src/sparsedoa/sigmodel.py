"""Narrowband signal model for partially calibrated subarrays.

Directions are normalized as ``theta = sin(angle)`` with half-wavelength
sensor spacing, so a sensor at integer position ``n`` responds to a source
at ``theta`` with phase ``exp(j*pi*n*theta)`` and ``theta`` lives in
``[-1, 1)``.  Each subarray sees the same source waveforms but applies its
own unknown phase offset, which models uncalibrated local oscillators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, TypeIILayout

__all__ = [
    "SourceSet",
    "Scenario",
    "SnapshotBatch",
    "steering_vector",
    "steering_matrix",
    "exact_covariance",
    "simulate_snapshots",
    "sample_covariance",
    "noise_power_for_snr",
]


def _position_array(positions) -> np.ndarray:
    if isinstance(positions, ArrayGeometry):
        return positions.position_array().astype(np.float64)
    return np.asarray(list(positions), dtype=np.float64)


def _check_direction_range(thetas) -> np.ndarray:
    th = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    if np.any(th < -1.0) or np.any(th > 1.0):
        raise ValueError("normalized directions must lie in [-1, 1]")
    return th


@dataclass(frozen=True)
class SourceSet:
    """Far-field sources: strictly increasing directions with positive powers."""

    thetas: tuple[float, ...]
    powers: tuple[float, ...]

    def __post_init__(self):
        thetas = tuple(float(t) for t in self.thetas)
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "powers", powers)
        if not thetas:
            raise ValueError("a source set needs at least one source")
        if len(powers) != len(thetas):
            raise ValueError("one power per direction required")
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise ValueError("directions must be strictly increasing (no duplicates)")
        _check_direction_range(thetas)
        if any(p <= 0 for p in powers):
            raise ValueError("source powers must be positive")

    @classmethod
    def equal_power(cls, thetas, power: float = 1.0) -> "SourceSet":
        thetas = tuple(float(t) for t in thetas)
        return cls(thetas, (float(power),) * len(thetas))

    @property
    def count(self) -> int:
        return len(self.thetas)

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.thetas, dtype=np.float64)

    @property
    def power_array(self) -> np.ndarray:
        return np.asarray(self.powers, dtype=np.float64)


def steering_vector(positions, theta: float) -> np.ndarray:
    """Steering vector ``exp(j*pi*position*theta)`` at the given positions.

    Accepts an :class:`ArrayGeometry` or a raw position sequence, so the same
    routine serves physical sensors and virtual (coarray) positions.
    """
    pos = _position_array(positions)
    th = _check_direction_range(theta)
    if th.size != 1:
        raise ValueError("steering_vector takes a single direction")
    return np.exp(1j * np.pi * pos * th[0])


def steering_matrix(positions, directions) -> np.ndarray:
    """Stack steering vectors column-wise, one per source direction.

    Args:
        positions: :class:`ArrayGeometry` or sequence of positions.
        directions: :class:`SourceSet` or sequence of directions; column
            order follows the input order.
    """
    thetas = directions.thetas if isinstance(directions, SourceSet) else tuple(
        float(t) for t in directions
    )
    if not thetas:
        raise ValueError("at least one source direction is required")
    if len(set(thetas)) != len(thetas):
        raise ValueError("duplicate source directions")
    pos = _position_array(positions)
    th = _check_direction_range(thetas)
    return np.exp(1j * np.pi * pos[:, None] * th[None, :])


def exact_covariance(positions, sources: SourceSet, noise_power: float) -> np.ndarray:
    """Ensemble covariance ``A diag(p) A^H + noise_power * I``."""
    if noise_power < 0:
        raise ValueError("noise power must be non-negative")
    a = steering_matrix(positions, sources)
    r = (a * sources.power_array) @ a.conj().T + noise_power * np.eye(a.shape[0])
    return (r + r.conj().T) / 2.0


@dataclass(frozen=True)
class Scenario:
    """One simulation setting: layout, sources, noise level, snapshot count."""

    layout: TypeIILayout
    sources: SourceSet
    noise_power: float
    snapshots: int
    seed: int | None = None

    def __post_init__(self):
        if self.noise_power < 0:
            raise ValueError("noise power must be non-negative")
        if self.snapshots < 1:
            raise ValueError("need at least one snapshot")


@dataclass(frozen=True)
class SnapshotBatch:
    """Simulated data: one ``n_sensors x snapshots`` matrix per subarray."""

    matrices: tuple[np.ndarray, ...]
    phase_shifts: np.ndarray


def _complex_gaussian(rng: np.random.Generator, shape, variance) -> np.ndarray:
    """Circular complex Gaussian draws; real/imag parts are N(0, variance/2)."""
    scale = np.sqrt(np.asarray(variance, dtype=np.float64) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_snapshots(
    scenario: Scenario,
    rng: np.random.Generator | None = None,
    phases=None,
    pin_reference_phase: bool = False,
) -> SnapshotBatch:
    """Draw one batch of snapshots for every subarray of the scenario.

    The source waveforms are shared across subarrays at each snapshot; noise
    is drawn independently per subarray.  Each subarray's data is rotated by
    its own phase offset ``exp(-j*phi_l)``; the offsets are drawn uniformly
    from [0, 2*pi) per batch unless ``phases`` pins them.  Rotating the whole
    observation (noise included) leaves the noise statistics unchanged, since
    circular Gaussian noise is rotation invariant, and makes every covariance
    computed downstream independent of the offsets.

    Args:
        scenario: what to simulate.
        rng: generator to consume; defaults to one seeded from the scenario.
            Signal, noise, and phase draws come from independent child
            streams spawned off this generator, so pinning ``phases`` never
            shifts the signal or noise realizations.
        phases: optional per-subarray phase offsets overriding the draw.
        pin_reference_phase: zero the first subarray's drawn offset, for
            experiments that treat subarray 0 as the calibration reference.
    """
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    signal_rng, noise_rng, phase_rng = rng.spawn(3)

    layout = scenario.layout
    n_sub = layout.n_subarrays
    n_snap = scenario.snapshots
    sources = scenario.sources

    waveforms = _complex_gaussian(
        signal_rng, (sources.count, n_snap), 1.0
    ) * np.sqrt(sources.power_array)[:, None]

    if phases is None:
        offsets = phase_rng.uniform(0.0, 2.0 * np.pi, n_sub)
        if pin_reference_phase:
            offsets[0] = 0.0
    else:
        offsets = np.asarray(phases, dtype=np.float64)
        if offsets.shape != (n_sub,):
            raise ValueError(f"expected {n_sub} phase offsets, got shape {offsets.shape}")

    matrices = []
    for l in range(n_sub):
        a_l = steering_matrix(layout.subarray_positions(l), sources)
        noise = _complex_gaussian(noise_rng, (a_l.shape[0], n_snap), scenario.noise_power)
        matrices.append(np.exp(-1j * offsets[l]) * (a_l @ waveforms + noise))
    return SnapshotBatch(tuple(matrices), offsets)


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    """Biased sample covariance ``X X^H / T`` of one snapshot matrix.

    The product is re-symmetrized so the result is exactly Hermitian; raw
    matrix products differ between mirrored entries by rounding noise.
    """
    x = np.asarray(snapshots)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("snapshot matrix must be 2-D with at least one snapshot")
    r = x @ x.conj().T / x.shape[1]
    return (r + r.conj().T) / 2.0


def noise_power_for_snr(snr_db: float, signal_power: float = 1.0) -> float:
    """Noise power giving the requested per-source SNR in dB."""
    return float(signal_power) * 10.0 ** (-float(snr_db) / 10.0)
