"""Flat periodic 6-lattice geometry: minimal-image metric, balls, ball sums.

The torus is R^6 / (period Z)^6 with period = n_per_axis * spacing, sampled at
the n^6 sites x = spacing * k.  Real axes pair into complex coordinates
z^a = x^{2a-1} + i x^{2a} (1-based axis labels; pairs (0,1), (2,3), (4,5) in
0-based code).  Distances are minimal-image, so geodesic balls make sense up to
radius half-period; larger radii would wrap onto themselves and are rejected
unless a caller explicitly asks for the clamped full-lattice variant used for
global integrals.

Two ball-summation routes are kept deliberately distinct:

* single-center sums gather values in a canonical (distance, lexicographic
  offset) order, which makes them bit-for-bit covariant under lattice
  translations of state and center together;
* all-center sums use FFT convolution with the ball indicator, which is fast
  but only translation covariant up to rounding.

Tests compare the two against a brute-force scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Real axis pairs forming the complex coordinates z^1, z^2, z^3.
COMPLEX_PAIRS = ((0, 1), (2, 3), (4, 5))

SiteIndex = tuple[int, int, int, int, int, int]


@dataclass(frozen=True)
class LatticeSpec:
    """Cubic periodic lattice: n_per_axis sites per axis, uniform spacing."""

    n_per_axis: int
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.n_per_axis) != self.n_per_axis or self.n_per_axis < 4:
            raise ValueError(f"n_per_axis must be an integer >= 4, got {self.n_per_axis}")
        object.__setattr__(self, "n_per_axis", int(self.n_per_axis))
        if not (float(self.spacing) > 0.0) or not np.isfinite(self.spacing):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing}")
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def period(self) -> float:
        return self.n_per_axis * self.spacing

    @property
    def half_period(self) -> float:
        return 0.5 * self.period

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * 6

    @property
    def site_count(self) -> int:
        return self.n_per_axis**6

    @property
    def dvol(self) -> float:
        """Volume element per site, spacing^6."""
        return self.spacing**6

    @property
    def volume(self) -> float:
        return self.period**6

    def wrap(self, site) -> SiteIndex:
        """Reduce integer site coordinates mod n_per_axis."""
        if len(site) != 6:
            raise ValueError(f"site must have 6 coordinates, got {len(site)}")
        n = self.n_per_axis
        return tuple(int(c) % n for c in site)

    def site_position(self, site) -> tuple[float, ...]:
        """Physical coordinates of a (wrapped) site."""
        return tuple(self.spacing * c for c in self.wrap(site))


@dataclass(frozen=True)
class Ball:
    """Geodesic ball on the torus; never wraps unless allow_wrap is set.

    allow_wrap admits radii up to the lattice diameter sqrt(6) * half-period;
    with minimal-image distances such a "ball" is just a clamped sublevel set
    and at full radius covers every site exactly once, which is what global
    integrals use.
    """

    center: tuple[float, ...]
    radius: float
    allow_wrap: bool = False

    def __post_init__(self):
        if len(self.center) != 6:
            raise ValueError(f"center must have 6 coordinates, got {len(self.center)}")
        center = tuple(float(c) for c in self.center)
        if not all(np.isfinite(center)):
            raise ValueError("center coordinates must be finite")
        object.__setattr__(self, "center", center)
        if not (float(self.radius) > 0.0) or not np.isfinite(self.radius):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    def validate_against(self, spec: LatticeSpec) -> None:
        cap = spec.half_period * (np.sqrt(6.0) if self.allow_wrap else 1.0)
        if self.radius > cap * (1.0 + 1e-12):
            kind = "lattice diameter" if self.allow_wrap else "half-period"
            raise ValueError(
                f"ball radius {self.radius} exceeds the {kind} bound {cap} "
                f"(period {spec.period})"
            )


def full_ball(spec: LatticeSpec, center=(0.0,) * 6) -> Ball:
    """Clamped ball covering the whole lattice (radius sqrt(6) * half-period).

    The radius carries a relative 1e-12 pad: the farthest-corner distance is
    assembled by summation and can land a few ulps above sqrt(6) * half.
    """
    radius = np.sqrt(6.0) * spec.half_period * (1.0 + 1e-12)
    return Ball(center=center, radius=radius, allow_wrap=True)


def _axis_sq_deltas(spec: LatticeSpec, c: float) -> np.ndarray:
    """Squared minimal-image deltas from coordinate c to every site, one axis.

    Integer-aligned centers take a pure index-arithmetic path so the result is
    bitwise identical for every lattice translate of the center.
    """
    n, h = spec.n_per_axis, spec.spacing
    ci = c / h
    ri = round(ci)
    if ci == ri:  # center sits on the lattice along this axis
        off = (np.arange(n) - int(ri)) % n
        off = np.where(off > n // 2, off - n, off)
        d = off * h
    else:
        half, period = spec.half_period, spec.period
        d = (h * np.arange(n) - c + half) % period - half
    return d * d


def squared_distance_grid(spec: LatticeSpec, center) -> np.ndarray:
    """Minimal-image squared distance from center to every site, shape n^6."""
    n = spec.n_per_axis
    axes = [_axis_sq_deltas(spec, float(c)) for c in center]
    grid = axes[0].reshape((n,) + (1,) * 5)
    for mu in range(1, 6):
        shape = (1,) * mu + (n,) + (1,) * (5 - mu)
        grid = grid + axes[mu].reshape(shape)
    return grid


def ball_mask(spec: LatticeSpec, ball: Ball) -> np.ndarray:
    """Boolean site mask of the ball (closed: distance <= radius)."""
    ball.validate_against(spec)
    d2 = squared_distance_grid(spec, ball.center)
    return d2 <= ball.radius * ball.radius


def sites_in_ball(spec: LatticeSpec, ball: Ball) -> np.ndarray:
    """Sites inside the ball as an (m, 6) int array in lexicographic order."""
    return np.argwhere(ball_mask(spec, ball))


def ball_integral(spec: LatticeSpec, values: np.ndarray, ball: Ball) -> float:
    """spacing^6-weighted sum of a site function over a ball."""
    if values.shape != spec.shape:
        raise ValueError(f"values shape {values.shape} does not match lattice {spec.shape}")
    mask = ball_mask(spec, ball)
    return float(np.add.reduce(values[mask], dtype=np.float64) * spec.dvol)


@lru_cache(maxsize=4)
def _offset_order(n: int, spacing: float):
    """Canonical gather order about the origin: stable sort by squared distance.

    Stability makes ties break by lexicographic (C-order) offset, which is a
    center-independent convention.  Returns (order, d2_sorted), both read-only.
    """
    spec = LatticeSpec(n, spacing)
    d2 = squared_distance_grid(spec, (0.0,) * 6).ravel()
    order = np.argsort(d2, kind="stable")
    d2s = d2[order]
    order.setflags(write=False)
    d2s.setflags(write=False)
    return order, d2s


def shell_distances(spec: LatticeSpec) -> np.ndarray:
    """Sorted squared distances from any site to all sites (center independent)."""
    return _offset_order(spec.n_per_axis, spec.spacing)[1]


def gather_by_shell(spec: LatticeSpec, values: np.ndarray, center_site) -> np.ndarray:
    """Values of a site function in canonical shell order about a lattice site.

    Rolling the array so the center lands at index 0 keys the order on offsets
    rather than absolute sites: for any lattice translation t, gathering the
    translated values about center + t yields this exact float sequence.
    """
    if values.shape != spec.shape:
        raise ValueError(f"values shape {values.shape} does not match lattice {spec.shape}")
    center_site = spec.wrap(center_site)
    order, _ = _offset_order(spec.n_per_axis, spec.spacing)
    rolled = np.roll(values, tuple(-c for c in center_site), axis=tuple(range(6)))
    return rolled.ravel()[order]


def ball_sum_at_site(spec: LatticeSpec, values: np.ndarray, center_site, radius: float) -> float:
    """Canonical-order ball sum (no dvol factor) about a lattice site."""
    gathered = gather_by_shell(spec, values, center_site)
    d2s = shell_distances(spec)
    k = int(np.searchsorted(d2s, radius * radius, side="right"))
    return float(np.add.reduce(gathered[:k], dtype=np.float64))


def sites_within(spec: LatticeSpec, radius: float) -> int:
    """Number of lattice sites within the given distance of any fixed site."""
    d2s = shell_distances(spec)
    return int(np.searchsorted(d2s, radius * radius, side="right"))


def ball_sums_all_sites(
    spec: LatticeSpec, values: np.ndarray, radius: float, values_hat: np.ndarray | None = None
) -> np.ndarray:
    """Ball sums (no dvol factor) about every site at once, via FFT convolution.

    The ball indicator is symmetric under offset negation, so convolution
    equals correlation.  Pass values_hat = rfftn(values) to amortize the
    forward transform over several radii.
    """
    if values.shape != spec.shape:
        raise ValueError(f"values shape {values.shape} does not match lattice {spec.shape}")
    if radius > spec.half_period * (1.0 + 1e-12):
        raise ValueError(f"scan radius {radius} exceeds half-period {spec.half_period}")
    d2 = squared_distance_grid(spec, (0.0,) * 6)
    mask = (d2 <= radius * radius).astype(np.float64)
    if values_hat is None:
        values_hat = np.fft.rfftn(values)
    axes = tuple(range(6))
    return np.fft.irfftn(values_hat * np.fft.rfftn(mask), s=spec.shape, axes=axes)
