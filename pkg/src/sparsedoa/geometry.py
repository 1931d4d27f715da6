"""Sparse linear array geometries, difference coarrays, and multi-subarray layouts.

Sensor positions are non-negative integers in units of the minimum
inter-sensor spacing (half a wavelength for the narrowband model used
elsewhere in this package), canonicalized so the first sensor sits at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "ArrayGeometry",
    "CoarrayProfile",
    "TypeIILayout",
    "build_ula",
    "build_nested2",
    "build_super_nested2",
    "build_mra",
    "difference_coarray",
    "compose_type2",
    "dof_bound",
    "MRA_SENSOR_LIMIT",
]

#: Exhaustive minimum-redundancy search is only practical for small arrays.
MRA_SENSOR_LIMIT = 10

# Lag coverage during searches is tracked in a single Python int bitmask.
_SEARCH_APERTURE_LIMIT = 62


def _as_positions(geometry) -> np.ndarray:
    if isinstance(geometry, ArrayGeometry):
        return geometry.position_array()
    return np.asarray(list(geometry), dtype=np.int64)


@dataclass(frozen=True)
class ArrayGeometry:
    """A sparse linear array in canonical form.

    Positions are strictly increasing integers with ``positions[0] == 0``.
    """

    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if not pos:
            raise ValueError("an array needs at least one sensor")
        if pos[0] != 0:
            raise ValueError("canonical form places the first sensor at position 0")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("sensor positions must be strictly increasing")

    @classmethod
    def canonical(cls, positions) -> "ArrayGeometry":
        """Sort and shift arbitrary integer positions into canonical form."""
        pos = sorted(int(p) for p in positions)
        if not pos:
            raise ValueError("an array needs at least one sensor")
        if len(set(pos)) != len(pos):
            raise ValueError("duplicate sensor positions")
        return cls(tuple(p - pos[0] for p in pos))

    @property
    def n_sensors(self) -> int:
        return len(self.positions)

    @property
    def aperture(self) -> int:
        """Largest position, i.e. the array span in spacing units."""
        return self.positions[-1]

    def position_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=np.int64)


@dataclass(frozen=True)
class CoarrayProfile:
    """Difference coarray of a geometry: the lag set and its weight function."""

    lags: tuple[int, ...]
    weights: dict[int, int]

    def weight(self, lag: int) -> int:
        """Number of sensor pairs realizing ``lag``; 0 for missing lags."""
        return self.weights.get(int(lag), 0)

    @property
    def sdof(self) -> int:
        """Subarray degrees of freedom: the number of distinct lags."""
        return len(self.lags)

    @cached_property
    def contiguous_half(self) -> int:
        """Largest c such that every lag in [-c, c] is present."""
        c = 0
        while (c + 1) in self.weights and -(c + 1) in self.weights:
            c += 1
        return c

    @property
    def is_hole_free(self) -> bool:
        return self.contiguous_half == self.lags[-1]


def difference_coarray(geometry) -> CoarrayProfile:
    """Compute the difference coarray of a geometry.

    Args:
        geometry: :class:`ArrayGeometry` or any sequence of integer positions.

    Returns:
        :class:`CoarrayProfile` with lags sorted ascending and the weight
        (pair multiplicity) of each lag.
    """
    pos = _as_positions(geometry)
    diffs = (pos[:, None] - pos[None, :]).ravel()
    lags, counts = np.unique(diffs, return_counts=True)
    weights = {int(l): int(c) for l, c in zip(lags, counts)}
    return CoarrayProfile(tuple(int(l) for l in lags), weights)


def build_ula(n: int) -> ArrayGeometry:
    """Uniform linear array with ``n`` sensors at 0..n-1."""
    if n < 1:
        raise ValueError(f"sensor count must be positive, got {n}")
    return ArrayGeometry(tuple(range(n)))


def build_nested2(n1: int, n2: int) -> ArrayGeometry:
    """Two-level nested array: a dense level of ``n1`` sensors feeding a
    sparse level of ``n2`` sensors at pitch ``n1 + 1``.

    Positions are ``{0..n1-1} U {k(n1+1)-1 : k = 1..n2}``; the difference
    coarray is hole free with ``2*n2*(n1+1) - 1`` distinct lags.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError(f"both level sizes must be positive, got ({n1}, {n2})")
    inner = range(n1)
    outer = (k * (n1 + 1) - 1 for k in range(1, n2 + 1))
    return ArrayGeometry(tuple(sorted({*inner, *outer})))


def _iter_hole_free(n_sensors: int, aperture: int):
    """Yield n-sensor hole-free geometries spanning exactly {0..aperture}.

    Geometries are emitted in ascending lexicographic order of their position
    tuples.  Mirror images whose first interior position exceeds aperture/2
    are skipped: every solution set is coarray- and weight-equivalent to its
    reflection, and of the two only the lexicographically smaller one (whose
    first interior position is <= aperture/2) is produced, which is the one
    any lexicographic or weight-based selection would pick anyway.

    Coverage is tracked as a bitmask over lags 1..aperture.  Branches are
    pruned when the remaining sensors cannot contribute enough new pairs to
    plug the remaining holes, or when the largest missing lag can no longer
    be realized by any admissible pair.
    """
    if n_sensors == 1:
        if aperture == 0:
            yield (0,)
        return
    if aperture < n_sensors - 1:
        return
    target = (1 << (aperture + 1)) - 2  # bits 1..aperture

    def extend(interior, covered, lo):
        remaining = n_sensors - 2 - len(interior)
        holes = target & ~covered
        missing = holes.bit_count()
        if remaining == 0:
            if missing == 0:
                yield (0, *interior, aperture)
            return
        placed = len(interior) + 2
        if missing > remaining * placed + remaining * (remaining - 1) // 2:
            return
        if holes:
            # The largest missing lag g needs a pair (a, a + g).  When every
            # admissible a lies below the next choosable position, a must be
            # an already-placed sensor whose partner is still choosable.
            g = holes.bit_length() - 1
            a_max = aperture - g
            if a_max < lo and not any(
                a <= a_max and a + g >= lo for a in (0, *interior)
            ):
                return
        hi = aperture - remaining
        if not interior:
            hi = min(hi, aperture // 2)
        for p in range(lo, hi + 1):
            cov = covered | (1 << p) | (1 << (aperture - p))
            for q in interior:
                cov |= 1 << abs(p - q)
            yield from extend(interior + [p], cov, p + 1)

    yield from extend([], 1 << aperture, 1)


def _has_hole_free(n_sensors: int, aperture: int) -> bool:
    """Decide whether some n-sensor array spans {0..aperture} hole free.

    Branches on the ways to realize the largest missing lag (the lag with the
    fewest candidate sensor pairs), which keeps infeasibility proofs small.
    Position sets already explored are skipped via a seen-set.
    """
    if n_sensors == 1:
        return aperture == 0
    if aperture < n_sensors - 1 or aperture > n_sensors * (n_sensors - 1) // 2:
        return False
    target = (1 << (aperture + 1)) - 2
    seen = set()

    def rec(posmask, positions, covered):
        holes = target & ~covered
        if not holes:
            return True
        count = len(positions)
        if count >= n_sensors or posmask in seen:
            return False
        seen.add(posmask)
        remaining = n_sensors - count
        if holes.bit_count() > remaining * count + remaining * (remaining - 1) // 2:
            return False
        g = holes.bit_length() - 1
        for a in range(aperture - g + 1):
            missing_ends = [x for x in (a, a + g) if not posmask & (1 << x)]
            if not missing_ends or count + len(missing_ends) > n_sensors:
                continue
            newmask, newcov = posmask, covered
            newpos = list(positions)
            for x in missing_ends:
                for q in newpos:
                    newcov |= 1 << abs(x - q)
                newpos.append(x)
                newmask |= 1 << x
            if rec(newmask, tuple(newpos), newcov):
                return True
        return False

    init = (1 << 0) | (1 << aperture)
    return rec(init, (0, aperture), 1 << aperture)


@lru_cache(maxsize=None)
def build_mra(n: int) -> ArrayGeometry:
    """Minimum-redundancy array by exhaustive search.

    Finds the ``n``-sensor array of maximal aperture whose difference coarray
    is hole free, i.e. the classical restricted MRA.  Apertures are scanned
    downward from the pair-count bound ``n(n-1)/2``; within the winning
    aperture, ties are broken by the lexicographically smallest position
    tuple.  Results are cached.

    Args:
        n: sensor count, ``1 <= n <= MRA_SENSOR_LIMIT``.

    Raises:
        ValueError: for non-positive ``n`` or ``n`` beyond the search limit.
    """
    if n < 1:
        raise ValueError(f"sensor count must be positive, got {n}")
    if n > MRA_SENSOR_LIMIT:
        raise ValueError(
            f"exhaustive MRA search supports up to {MRA_SENSOR_LIMIT} sensors, got {n}"
        )
    for aperture in range(n * (n - 1) // 2, n - 2, -1):
        if _has_hole_free(n, aperture):
            found = next(_iter_hole_free(n, aperture), None)
            assert found is not None, "feasibility and enumeration disagree"
            return ArrayGeometry(found)
    raise AssertionError("unreachable: the ULA aperture is always feasible")


def _positive_weights(positions: tuple[int, ...], aperture: int) -> tuple[int, ...]:
    counts = [0] * (aperture + 1)
    for i, p in enumerate(positions):
        for q in positions[:i]:
            counts[p - q] += 1
    return tuple(counts[1:])


@lru_cache(maxsize=None)
def build_super_nested2(n1: int, n2: int) -> ArrayGeometry:
    """Second-order super-nested array for the parent nested pair (n1, n2).

    Rearranges the sensors of :func:`build_nested2` ``(n1, n2)`` without
    touching its difference coarray: the result has the same sensor count,
    the same aperture, and an identical (hole-free) lag set, but concentrates
    fewer sensor pairs at small separations, which lowers mutual coupling.
    Among all coarray-preserving rearrangements the builder picks the one
    whose positive-lag weight vector ``(w(1), w(2), ...)`` is
    lexicographically smallest, breaking remaining ties by the smallest
    position tuple, so the construction is deterministic.

    Args:
        n1: dense-level size of the parent nested array, ``n1 >= 3``.
        n2: sparse-level size of the parent nested array, ``n2 >= 2``.

    Raises:
        ValueError: for out-of-range level sizes or parents too large for
            the rearrangement search.
    """
    if n1 < 3 or n2 < 2:
        raise ValueError(
            f"second-order rearrangement needs n1 >= 3 and n2 >= 2, got ({n1}, {n2})"
        )
    parent = build_nested2(n1, n2)
    aperture = parent.aperture
    if aperture > _SEARCH_APERTURE_LIMIT:
        raise ValueError(
            f"rearrangement search supports apertures up to {_SEARCH_APERTURE_LIMIT}, "
            f"got {aperture}"
        )
    best = None
    best_key = None
    for candidate in _iter_hole_free(parent.n_sensors, aperture):
        key = (_positive_weights(candidate, aperture), candidate)
        if best_key is None or key < best_key:
            best, best_key = candidate, key
    assert best is not None  # the parent itself is hole free
    return ArrayGeometry(best)


@dataclass(frozen=True)
class TypeIILayout:
    """Partially calibrated layout: L translated copies of a base subarray.

    Subarray ``l`` (0-based) occupies ``offset_l + base.positions`` with
    ``offset_l = l * (base.aperture + spacing)``, so consecutive copies are
    separated by ``spacing`` empty slots and never overlap.
    """

    base: ArrayGeometry
    n_subarrays: int
    spacing: int

    def __post_init__(self):
        if self.n_subarrays < 1:
            raise ValueError(f"need at least one subarray, got {self.n_subarrays}")
        if self.spacing < 1:
            raise ValueError(f"inter-subarray spacing must be >= 1, got {self.spacing}")

    @property
    def offsets(self) -> tuple[int, ...]:
        pitch = self.base.aperture + self.spacing
        return tuple(l * pitch for l in range(self.n_subarrays))

    def subarray_positions(self, l: int) -> tuple[int, ...]:
        """Absolute positions of subarray ``l`` within the whole array."""
        off = self.offsets[l]
        return tuple(off + p for p in self.base.positions)

    @cached_property
    def whole_array(self) -> ArrayGeometry:
        pos = []
        for l in range(self.n_subarrays):
            pos.extend(self.subarray_positions(l))
        return ArrayGeometry(tuple(sorted(pos)))


def compose_type2(base: ArrayGeometry, n_subarrays: int, spacing: int = 1) -> TypeIILayout:
    """Tile ``n_subarrays`` copies of ``base`` with ``spacing`` empty slots between."""
    return TypeIILayout(base=base, n_subarrays=n_subarrays, spacing=spacing)


def dof_bound(n_subarrays: int, sdof: int, spacing: int, aperture: int) -> int:
    """Distinct-lag count of the whole Type-II array, from subarray quantities.

    For spacing ``mu <= aperture`` the whole-array difference coarray has at
    most ``L*(sdof - 1) + 2*(L - 1)*mu + 1`` distinct lags, achieved with
    equality when the base coarray is hole free.  For ``mu > aperture`` the
    per-pair lag blocks are disjoint and the count is exactly
    ``(2L - 1) * sdof``.

    Args:
        n_subarrays: number of identical subarrays L.
        sdof: distinct-lag count of one subarray (odd by symmetry).
        spacing: empty slots between consecutive subarrays (mu >= 1).
        aperture: base subarray aperture.
    """
    if n_subarrays < 1 or spacing < 1 or aperture < 0:
        raise ValueError("layout parameters must be positive")
    if sdof < 1 or sdof % 2 == 0:
        raise ValueError(f"a difference coarray has an odd lag count, got {sdof}")
    if spacing <= aperture:
        return n_subarrays * (sdof - 1) + 2 * (n_subarrays - 1) * spacing + 1
    return (2 * n_subarrays - 1) * sdof
