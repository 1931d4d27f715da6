"""MUSIC-style direction estimators for partially calibrated subarrays.

All estimators score candidate directions on a uniform grid over [-1, 1) by
how close a steering vector comes to the span of per-subarray signal
subspaces, then read off the largest spectrum peaks.

``gca_music`` merges the subarrays in the coarray domain: the per-subarray
signal-subspace projectors are placed on the diagonal of one block
projector, so a direction scores high only where every subarray's smoothed
covariance agrees.  ``avca_music`` averages the per-subarray reciprocal
spectra instead, and ``g_music`` works directly on the physical sensor
covariances, which caps it at ``n_sensors - 1`` sources per subarray.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coarray import SubspaceDecomposition, signal_subspace
from .errors import TooManySourcesError
from .geometry import TypeIILayout

__all__ = [
    "SpectrumGrid",
    "DoaEstimate",
    "MergedProjector",
    "gca_music",
    "g_music",
    "avca_music",
    "gca_spectrum",
    "avca_spectrum",
    "find_peaks",
    "DENOMINATOR_FLOOR",
]

#: Denominators are clamped here before inversion so exact nulls stay finite.
DENOMINATOR_FLOOR = 1e-30


@dataclass(frozen=True)
class SpectrumGrid:
    """Spectrum values over a direction grid."""

    thetas: np.ndarray
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.thetas.size

    @property
    def step(self) -> float:
        return float(self.thetas[1] - self.thetas[0])


@dataclass(frozen=True)
class DoaEstimate:
    """Estimated directions, ascending, with peak diagnostics."""

    thetas: np.ndarray
    algorithm: str
    peak_values: np.ndarray
    degraded: bool = False
    eigen_gaps: tuple[float, ...] | None = None


@dataclass(frozen=True)
class MergedProjector:
    """Block-diagonal signal-subspace projector over all subarrays."""

    bases: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return sum(b.shape[0] for b in self.bases)

    @property
    def rank(self) -> int:
        return sum(b.shape[1] for b in self.bases)

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        row = 0
        for basis in self.bases:
            size = basis.shape[0]
            out[row : row + size, row : row + size] = basis @ basis.conj().T
            row += size
        return out

    def complement(self) -> np.ndarray:
        return np.eye(self.dim) - self.matrix()

    def complement_form(self, stacked: np.ndarray) -> float:
        """Quadratic form ``b^H (I - P) b`` computed block by block."""
        total = 0.0
        row = 0
        for basis in self.bases:
            block = stacked[row : row + basis.shape[0]]
            total += np.vdot(block, block).real - np.sum(
                np.abs(basis.conj().T @ block) ** 2
            )
            row += basis.shape[0]
        return float(total)


def grid_thetas(grid_size: int) -> np.ndarray:
    """Uniform direction grid: ``grid_size`` points covering [-1, 1)."""
    if grid_size < 3:
        raise ValueError("grid needs at least 3 points for peak finding")
    return -1.0 + (2.0 / grid_size) * np.arange(grid_size)


@lru_cache(maxsize=64)
def _cached_steering(positions: tuple[int, ...], grid_size: int) -> np.ndarray:
    block = _steering_block(np.asarray(positions, dtype=np.float64), grid_thetas(grid_size))
    block.setflags(write=False)
    return block


def _steering_block(positions: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.pi * positions[:, None] * np.asarray(thetas)[None, :])


def _check_subspaces(subspaces: tuple[SubspaceDecomposition, ...]) -> tuple[int, int]:
    if not subspaces:
        raise ValueError("need at least one subarray decomposition")
    dims = {s.dimension for s in subspaces}
    counts = {s.n_sources for s in subspaces}
    if len(dims) != 1 or len(counts) != 1:
        raise ValueError("subarray decompositions disagree on dimensions")
    return dims.pop(), counts.pop()


def _projection_deficit(basis: np.ndarray, block: np.ndarray, length: int) -> np.ndarray:
    """Per-column ``|a|^2 - |U^H a|^2`` with the exact steering norm."""
    return length - np.sum(np.abs(basis.conj().T @ block) ** 2, axis=0)


def _eigen_gaps(subspaces) -> tuple[float, ...]:
    gaps = []
    for s in subspaces:
        d = s.n_sources
        gaps.append(float(s.eigenvalues[d - 1] - s.eigenvalues[d]))
    return tuple(gaps)


def gca_spectrum(subspaces, thetas) -> np.ndarray:
    """Merged-coarray pseudo-spectrum evaluated at arbitrary directions.

    The value at ``theta`` is ``1 / (b^H (I - P) b)`` where P is the merged
    block projector and b stacks one virtual steering vector per subarray;
    with identical virtual arrays this is the reciprocal of the summed
    per-subarray projection deficits.
    """
    subspaces = tuple(subspaces)
    m, _ = _check_subspaces(subspaces)
    thetas = np.asarray(thetas, dtype=np.float64)
    block = _steering_block(np.arange(m, dtype=np.float64), thetas)
    denom = np.zeros(thetas.shape, dtype=np.float64)
    for s in subspaces:
        denom += _projection_deficit(s.signal_basis, block, m)
    return 1.0 / np.maximum(denom, DENOMINATOR_FLOOR)


def avca_spectrum(subspaces, thetas) -> np.ndarray:
    """Average of the per-subarray reciprocal coarray spectra."""
    subspaces = tuple(subspaces)
    m, _ = _check_subspaces(subspaces)
    thetas = np.asarray(thetas, dtype=np.float64)
    block = _steering_block(np.arange(m, dtype=np.float64), thetas)
    acc = np.zeros(thetas.shape, dtype=np.float64)
    for s in subspaces:
        deficit = _projection_deficit(s.signal_basis, block, m)
        acc += 1.0 / np.maximum(deficit, DENOMINATOR_FLOOR)
    return acc / len(subspaces)


def gca_music(
    subspaces,
    n_sources: int | None = None,
    grid_size: int = 2001,
    refine: bool = True,
) -> tuple[SpectrumGrid, DoaEstimate]:
    """Merged-coarray MUSIC over all subarrays.

    Args:
        subspaces: one :class:`SubspaceDecomposition` per subarray, all on
            the same virtual array and built for the same source count.
        n_sources: optional cross-check against the decompositions.
        grid_size: number of grid points over [-1, 1).
        refine: parabolically interpolate peak locations off the grid.

    Returns:
        ``(SpectrumGrid, DoaEstimate)``.
    """
    subspaces = tuple(subspaces)
    m, d = _check_subspaces(subspaces)
    if n_sources is not None and n_sources != d:
        raise ValueError(f"decompositions hold {d} sources, caller expects {n_sources}")
    bases = tuple(s.signal_basis for s in subspaces)
    grid = grid_thetas(grid_size)
    denom = np.zeros(grid_size, dtype=np.float64)
    block = _cached_steering(tuple(range(m)), grid_size)
    for basis in bases:
        denom += _projection_deficit(basis, block, m)
    spectrum = SpectrumGrid(grid, 1.0 / np.maximum(denom, DENOMINATOR_FLOOR))
    estimate = find_peaks(
        spectrum, d, refine=refine, algorithm="gca", eigen_gaps=_eigen_gaps(subspaces)
    )
    return spectrum, estimate


def avca_music(
    subspaces,
    n_sources: int | None = None,
    grid_size: int = 2001,
    refine: bool = True,
) -> tuple[SpectrumGrid, DoaEstimate]:
    """Average-coarray MUSIC: mean of the per-subarray reciprocal spectra."""
    subspaces = tuple(subspaces)
    m, d = _check_subspaces(subspaces)
    if n_sources is not None and n_sources != d:
        raise ValueError(f"decompositions hold {d} sources, caller expects {n_sources}")
    grid = grid_thetas(grid_size)
    block = _cached_steering(tuple(range(m)), grid_size)
    acc = np.zeros(grid_size, dtype=np.float64)
    for s in subspaces:
        deficit = _projection_deficit(s.signal_basis, block, m)
        acc += 1.0 / np.maximum(deficit, DENOMINATOR_FLOOR)
    spectrum = SpectrumGrid(grid, acc / len(subspaces))
    estimate = find_peaks(
        spectrum, d, refine=refine, algorithm="avca", eigen_gaps=_eigen_gaps(subspaces)
    )
    return spectrum, estimate


def g_music(
    covariances,
    layout: TypeIILayout,
    n_sources: int,
    grid_size: int = 2001,
    refine: bool = True,
) -> tuple[SpectrumGrid, DoaEstimate]:
    """Physical-domain MUSIC with per-subarray subspace blocks.

    Each subarray covariance is eigendecomposed on its own; the composite
    steering vector stacks the physical steering vectors at the subarrays'
    absolute positions.  Because every block is only ``n_sensors`` tall, the
    source count must stay below the per-subarray sensor count.

    Raises:
        TooManySourcesError: if ``n_sources >= layout.base.n_sensors``.
    """
    n = layout.base.n_sensors
    if n_sources >= n:
        raise TooManySourcesError(
            f"physical-domain processing identifies at most {n - 1} sources "
            f"with {n}-sensor subarrays, got {n_sources}"
        )
    covariances = list(covariances)
    if len(covariances) != layout.n_subarrays:
        raise ValueError("one covariance per subarray required")
    decompositions = [signal_subspace(np.asarray(r), n_sources) for r in covariances]
    grid = grid_thetas(grid_size)
    denom = np.zeros(grid_size, dtype=np.float64)
    for l, dec in enumerate(decompositions):
        block = _cached_steering(layout.subarray_positions(l), grid_size)
        denom += _projection_deficit(dec.signal_basis, block, n)
    spectrum = SpectrumGrid(grid, 1.0 / np.maximum(denom, DENOMINATOR_FLOOR))
    estimate = find_peaks(
        spectrum,
        n_sources,
        refine=refine,
        algorithm="gmusic",
        eigen_gaps=_eigen_gaps(decompositions),
    )
    return spectrum, estimate


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; plateaus resolve to their left edge."""
    diffs = np.sign(np.diff(values))
    nonzero = np.flatnonzero(diffs)
    if nonzero.size == 0:
        return np.empty(0, dtype=np.intp)
    # Next nonzero slope at or after each position (0 past the end).
    slot = np.searchsorted(nonzero, np.arange(diffs.size))
    next_slope = np.where(
        slot < nonzero.size, diffs[nonzero[np.minimum(slot, nonzero.size - 1)]], 0
    )
    interior = np.arange(1, values.size - 1)
    is_peak = (diffs[interior - 1] == 1) & (next_slope[interior] == -1)
    return interior[is_peak]


def _parabolic_offset(left: float, center: float, right: float) -> float:
    curvature = left - 2.0 * center + right
    if not np.isfinite(curvature) or curvature >= 0:
        return 0.0
    offset = 0.5 * (left - right) / curvature
    return float(np.clip(offset, -0.5, 0.5))


def find_peaks(
    spectrum: SpectrumGrid,
    n_sources: int,
    refine: bool = True,
    algorithm: str = "music",
    eigen_gaps: tuple[float, ...] | None = None,
) -> DoaEstimate:
    """Pick the ``n_sources`` largest spectrum peaks as direction estimates.

    Strict local maxima are ranked by value (ties keep the leftmost) and the
    top ``n_sources`` are re-sorted by direction.  When fewer local maxima
    exist than sources sought, the estimate falls back to the largest grid
    values anywhere and flags itself degraded.  With ``refine`` each proper
    peak is moved to the vertex of the parabola through its three samples.
    """
    if n_sources < 1:
        raise ValueError("need at least one source")
    values = spectrum.values
    if values.size < 3:
        raise ValueError("grid too small for peak finding")
    peaks = _local_maxima(values)
    degraded = peaks.size < n_sources
    if degraded:
        order = np.argsort(-values, kind="stable")
        chosen = np.sort(order[:n_sources])
        thetas = spectrum.thetas[chosen]
        return DoaEstimate(
            thetas, algorithm, values[chosen], degraded=True, eigen_gaps=eigen_gaps
        )
    ranked = peaks[np.argsort(-values[peaks], kind="stable")]
    chosen = np.sort(ranked[:n_sources])
    if refine:
        step = spectrum.step
        thetas = np.array(
            [
                spectrum.thetas[i]
                + step * _parabolic_offset(values[i - 1], values[i], values[i + 1])
                for i in chosen
            ]
        )
    else:
        thetas = spectrum.thetas[chosen]
    return DoaEstimate(thetas, algorithm, values[chosen], degraded=False, eigen_gaps=eigen_gaps)
