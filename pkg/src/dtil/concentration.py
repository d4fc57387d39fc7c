"""Concentration detection, blow-up windows, and synthetic bump fields.

All scans here consume the scale-critical mass of a region: the lattice
integral of the energy density raised to the power 3/2.  That power is what
the window rescaling below leaves invariant (connection and Higgs coefficients
both pick up one factor of the zoom scale, the density scales by the inverse
fourth power, the volume element by the sixth), so thresholding it gives
statements that survive passage to finer and finer bumps.

The detector works on a sequence of snapshots sharing one lattice.  For every
entry and every ladder radius it thresholds ball masses over all centers at
once; the per-entry sets are made exactly nested in the radius by accumulating
clamped shell increments, so the intersection over the ladder is the set at
the smallest radius.  Atom extraction intersects detections over the tail of
the sequence, merges nearby sites by single linkage, and prices each surviving
cluster by its ball mass in the final entry (minus the share carried by an
optional limit snapshot).

Sites are compared and reported in lexicographic order throughout; every
tie-break is lexicographic.  This keeps reports deterministic and translation
covariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import density as state_density
from .fields import FieldState
from .lattice import (
    Ball,
    LatticeSpec,
    ball_mask,
    ball_sums_all_sites,
    gather_by_shell,
    shell_distances,
    sites_in_ball,
    squared_distance_grid,
)
from .su2 import SL2_BASIS, commutator_bracket, frob2, project_su2, project_traceless


def _as_density(entry, spec: LatticeSpec) -> np.ndarray:
    """Energy density of an entry: computed for states, validated for arrays."""
    if isinstance(entry, FieldState):
        if entry.spec != spec:
            raise ValueError("sequence entries must share one lattice")
        return state_density(entry)
    arr = np.asarray(entry, dtype=np.float64)
    if arr.shape != spec.shape:
        raise ValueError(f"density entry shape {arr.shape} does not match lattice {spec.shape}")
    if np.any(arr < 0.0):
        raise ValueError("density entries must be nonnegative")
    return arr


@dataclass
class StateSequence:
    """Ordered snapshots on one lattice.

    Entries are FieldState instances or precomputed density arrays; mixing is
    allowed.  Density entries let detector studies run at resolutions where
    carrying full field data would be wasteful.
    """

    spec: LatticeSpec
    entries: tuple

    def __post_init__(self):
        self.entries = tuple(self.entries)
        if not self.entries:
            raise ValueError("sequence needs at least one entry")
        for entry in self.entries:
            if isinstance(entry, FieldState):
                if entry.spec != self.spec:
                    raise ValueError("sequence entries must share one lattice")
            elif np.asarray(entry).shape != self.spec.shape:
                raise ValueError("density entry shape does not match the lattice")

    @classmethod
    def from_states(cls, states) -> "StateSequence":
        states = tuple(states)
        if not states:
            raise ValueError("sequence needs at least one entry")
        return cls(states[0].spec, states)

    def __len__(self) -> int:
        return len(self.entries)

    def density(self, i: int) -> np.ndarray:
        return _as_density(self.entries[i], self.spec)


def _check_ladder(spec: LatticeSpec, radii) -> tuple:
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise ValueError("radius ladder is empty")
    if radii[0] <= 0.0:
        raise ValueError(f"ladder radii must be positive, got {radii[0]}")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radius ladder must be strictly increasing")
    if radii[-1] > spec.half_period * (1.0 + 1e-12):
        raise ValueError(f"ladder radius {radii[-1]} exceeds half-period {spec.half_period}")
    return radii


def default_radius_ladder(spec: LatticeSpec) -> tuple:
    """Geometric ladder from about two spacings up to the half-period."""
    radii = [spec.half_period]
    while radii[-1] / 2.0 >= 2.0 * spec.spacing:
        radii.append(radii[-1] / 2.0)
    return tuple(reversed(radii))


@dataclass
class ThresholdSets:
    """Detection masks per entry and ladder radius.

    masks[i][j] flags the sites whose ball of radius radii[j] holds mass at
    least epsilon in entry i; the masks are exactly nested along j.
    """

    epsilon: float
    radii: tuple
    masks: tuple
    counts: tuple

    def counts_csv(self) -> str:
        lines = ["entry,radius,count"]
        for i, row in enumerate(self.counts):
            for r, c in zip(self.radii, row):
                lines.append("%d,%.17g,%d" % (i, r, c))
        return "\n".join(lines) + "\n"


def concentration_sets(seq: StateSequence, epsilon: float, radii) -> ThresholdSets:
    """Threshold the scale-critical ball masses of every entry at every radius."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    radii = _check_ladder(seq.spec, radii)
    spec = seq.spec
    masks_all, counts_all = [], []
    for i in range(len(seq)):
        dens32 = seq.density(i) ** 1.5
        hat = np.fft.rfftn(dens32)
        running = None
        row = []
        for r in radii:
            sums = ball_sums_all_sites(spec, dens32, r, values_hat=hat)
            # true ball masses only grow with the radius; clamping the shell
            # increments keeps the detection sets nested despite FFT roundoff
            if running is None:
                running = sums
            else:
                running = running + np.maximum(sums - running, 0.0)
            row.append(spec.dvol * running >= epsilon)
        masks_all.append(tuple(row))
        counts_all.append(tuple(int(np.count_nonzero(m)) for m in row))
    return ThresholdSets(
        epsilon=float(epsilon), radii=radii, masks=tuple(masks_all), counts=tuple(counts_all)
    )


def _wrapped_site_distance(spec: LatticeSpec, a, b) -> float:
    d = np.abs(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64))
    d = np.minimum(d, spec.n_per_axis - d) * spec.spacing
    return float(np.sqrt(np.add.reduce(d * d, dtype=np.float64)))


def _single_linkage(spec: LatticeSpec, sites: np.ndarray, link: float) -> list:
    """Merge sites within the link distance; clusters come back lex-ordered."""
    m = len(sites)
    if m > 20000:
        raise ValueError(
            f"detection set has {m} sites; thresholds this permissive do not "
            "isolate concentration points (raise epsilon or shrink the ladder)"
        )
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    link2 = link * link * (1.0 + 1e-12)
    block = 128  # pairwise deltas in slabs, keeping memory linear in m
    for i0 in range(0, m, block):
        blk = sites[i0 : i0 + block]
        d = np.abs(blk[:, None, :] - sites[None, :, :])
        d = np.minimum(d, spec.n_per_axis - d) * spec.spacing
        close = np.add.reduce(d * d, axis=-1) <= link2
        for bi in range(len(blk)):
            i = i0 + bi
            for j in np.flatnonzero(close[bi, i + 1 :]) + i + 1:
                ri, rj = find(i), find(int(j))
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    grouped: dict = {}
    for i in range(m):
        grouped.setdefault(find(i), []).append(tuple(int(c) for c in sites[i]))
    return [grouped[root] for root in sorted(grouped)]


@dataclass(frozen=True)
class Atom:
    """One stable concentration point.

    mass is the ball mass at the detection radius in the final entry, minus
    the share the limit snapshot carries inside the same ball.
    """

    site: tuple
    position: tuple
    mass: float
    ball_mass: float
    limit_share: float
    cluster_size: int


@dataclass(frozen=True)
class RejectedCluster:
    """A detected cluster that failed a stability gate (never merged away)."""

    site: tuple
    cluster_size: int
    reason: str  # "drift" or "below_epsilon"
    drift: float
    mass: float


@dataclass
class ConcentrationReport:
    epsilon: float
    radii: tuple
    detection_radius: float
    tail_start: int
    counts: tuple
    atoms: tuple
    rejected: tuple
    entry_totals: tuple
    limit_total: float | None

    def counts_csv(self) -> str:
        lines = ["entry,radius,count"]
        for i, row in enumerate(self.counts):
            for r, c in zip(self.radii, row):
                lines.append("%d,%.17g,%d" % (i, r, c))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = [
            "epsilon: %.17g" % self.epsilon,
            "detection_radius: %.17g" % self.detection_radius,
            "tail_start: %d" % self.tail_start,
            "entry_totals: " + ", ".join("%.17g" % t for t in self.entry_totals),
            "limit_total: " + ("" if self.limit_total is None else "%.17g" % self.limit_total),
            "atoms: %d" % len(self.atoms),
            "rejected: %d" % len(self.rejected),
        ]
        for k, atom in enumerate(self.atoms):
            out += [
                "",
                "atom: %d" % k,
                "site: " + " ".join(str(c) for c in atom.site),
                "position: " + " ".join("%.17g" % c for c in atom.position),
                "mass: %.17g" % atom.mass,
                "ball_mass: %.17g" % atom.ball_mass,
                "limit_share: %.17g" % atom.limit_share,
                "cluster_size: %d" % atom.cluster_size,
            ]
        for k, rej in enumerate(self.rejected):
            out += [
                "",
                "rejected_cluster: %d" % k,
                "site: " + " ".join(str(c) for c in rej.site),
                "reason: " + rej.reason,
                "drift: %.17g" % rej.drift,
                "mass: %.17g" % rej.mass,
                "cluster_size: %d" % rej.cluster_size,
            ]
        return "\n".join(out) + "\n"


def extract_atoms(
    seq: StateSequence, epsilon: float, radii=None, limit=None
) -> ConcentrationReport:
    """Locate and price the stable concentration points of a sequence.

    Detections are intersected over the radius ladder (equivalently: taken at
    its smallest radius) and over the tail half of the sequence, clustered by
    single linkage at twice the detection radius, and each cluster is priced
    at the peak site of the final entry.  Clusters whose per-entry peaks drift
    farther than the linkage scale are reported as unstable rather than
    merged; clusters whose mass net of the limit share falls below epsilon are
    reported as faint.  Disjointness of the detection balls makes the stable
    atom count at most total mass / epsilon.
    """
    if len(seq) < 2:
        raise ValueError("atom extraction needs at least two entries")
    spec = seq.spec
    radii = default_radius_ladder(spec) if radii is None else _check_ladder(spec, radii)
    sets = concentration_sets(seq, epsilon, radii)
    r_det = radii[0]
    tail_start = min(len(seq) - 2, len(seq) // 2)
    tail = range(tail_start, len(seq))

    entry_totals = []
    ball_tail = {}
    for i in range(len(seq)):
        dens32 = seq.density(i) ** 1.5
        entry_totals.append(spec.dvol * float(np.add.reduce(dens32, axis=None, dtype=np.float64)))
        if i in tail:
            ball_tail[i] = spec.dvol * ball_sums_all_sites(spec, dens32, r_det)

    if limit is not None:
        limit32 = _as_density(limit, spec) ** 1.5
        limit_total = spec.dvol * float(np.add.reduce(limit32, axis=None, dtype=np.float64))
        ball_limit = spec.dvol * ball_sums_all_sites(spec, limit32, r_det)
    else:
        limit_total = None
        ball_limit = None

    detected = sets.masks[tail_start][0].copy()
    for i in tail:
        detected &= sets.masks[i][0]

    atoms, rejected = [], []
    if detected.any():
        link = 2.0 * r_det
        for cluster in _single_linkage(spec, np.argwhere(detected), link):
            peaks = []
            for i in tail:
                best = cluster[0]
                for site in cluster[1:]:
                    if ball_tail[i][site] > ball_tail[i][best]:
                        best = site
                peaks.append(best)
            drift = max(
                (_wrapped_site_distance(spec, p, q) for p in peaks for q in peaks), default=0.0
            )
            site = peaks[-1]
            raw = float(ball_tail[max(tail)][site])
            share = float(ball_limit[site]) if ball_limit is not None else 0.0
            mass = raw - share
            if drift > link:
                rejected.append(
                    RejectedCluster(site, len(cluster), "drift", drift, mass)
                )
            elif mass < epsilon:
                rejected.append(
                    RejectedCluster(site, len(cluster), "below_epsilon", drift, mass)
                )
            else:
                atoms.append(
                    Atom(
                        site=site,
                        position=spec.site_position(site),
                        mass=mass,
                        ball_mass=raw,
                        limit_share=share,
                        cluster_size=len(cluster),
                    )
                )
    return ConcentrationReport(
        epsilon=float(epsilon),
        radii=radii,
        detection_radius=r_det,
        tail_start=tail_start,
        counts=sets.counts,
        atoms=tuple(atoms),
        rejected=tuple(rejected),
        entry_totals=tuple(entry_totals),
        limit_total=limit_total,
    )


# ---------------------------------------------------------------------------
# zoom windows

def _multilinear_sample(field: np.ndarray, spec: LatticeSpec, axis_coords) -> np.ndarray:
    """Periodic 6-linear interpolation of one matrix field onto a product grid.

    axis_coords are physical coordinates per axis; interpolation is applied
    one axis at a time, so the peak working set stays at two intermediates.
    """
    n, h = spec.n_per_axis, spec.spacing
    out = field
    for ax, coords in enumerate(axis_coords):
        u = np.asarray(coords, dtype=np.float64) / h
        # nudge grid-coincident coordinates onto their site so exact windows
        # resample exactly
        i0 = np.floor(u + 1e-9).astype(np.int64)
        frac = np.clip(u - i0, 0.0, 1.0)
        i0 %= n
        i1 = (i0 + 1) % n
        moved = np.moveaxis(out, ax, 0)
        w_shape = (len(u),) + (1,) * (moved.ndim - 1)
        sampled = moved[i0] * (1.0 - frac).reshape(w_shape) + moved[i1] * frac.reshape(w_shape)
        out = np.moveaxis(sampled, 0, ax)
    return out


def blowup_rescale(
    state: FieldState,
    center,
    scale: float,
    window_radius: float,
    refinement: float = 4.0,
) -> FieldState:
    """Zoomed window copy of a state: pull back under x = center + scale * v.

    The output is a periodic lattice covering v in [-window_radius,
    window_radius) per axis, sampled by periodic 6-linear interpolation, with
    connection and Higgs coefficients both multiplied by the scale: that
    weight makes the integral of density^(3/2) over corresponding regions
    invariant up to interpolation error.  The content is genuinely periodic
    only when the window covers the torus, so downstream analysis should stay
    away from the seam.  refinement sets the output resolution relative to
    the source cells spanned by the window.
    """
    spec = state.spec
    center = tuple(float(c) for c in center)
    if len(center) != 6:
        raise ValueError("window center must have 6 coordinates")
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"zoom scale must be in (0, 1], got {scale}")
    if window_radius <= 0.0:
        raise ValueError(f"window radius must be positive, got {window_radius}")
    if refinement < 1.0:
        raise ValueError(f"refinement must be at least 1, got {refinement}")
    if scale * window_radius > spec.half_period * (1.0 + 1e-12):
        raise ValueError(
            f"window image half-width {scale * window_radius} exceeds half-period {spec.half_period}"
        )
    n_out = int(np.ceil(refinement * 2.0 * scale * window_radius / spec.spacing - 1e-9))
    n_out += n_out % 2  # keep v = 0 on the output grid
    n_out = max(4, n_out)
    out_spec = LatticeSpec(n_out, 2.0 * window_radius / n_out)

    v = -window_radius + out_spec.spacing * np.arange(n_out)
    coords = [center[ax] + scale * v for ax in range(6)]

    out = FieldState.zeros(out_spec)
    if state.A.any():
        for mu in range(6):
            out.A[mu] = project_su2(scale * _multilinear_sample(state.A[mu], spec, coords))
    if state.phi.any():
        out.phi[...] = project_traceless(scale * _multilinear_sample(state.phi, spec, coords))
    return out


@dataclass(frozen=True)
class BlowupScale:
    """Selected zoom center and radius, with the achieved ball mass."""

    site: tuple
    position: tuple
    radius: float
    mass: float
    target: float
    error: float
    within_tolerance: bool


def select_blowup_scale(
    state, search_ball: Ball, epsilon: float, snap_tolerance: float = 0.02
) -> BlowupScale | None:
    """Pick the center and radius whose ball mass best matches epsilon / 2.

    Candidate centers are the lattice sites in the search ball; candidate
    radii are shell midpoints, so each ball holds complete shells and the
    achieved mass is exact.  Returns None when no candidate ball of
    half-period radius reaches 3 epsilon / 4: too little local mass for the
    target to be meaningful.  Ties prefer the smaller error, then the smaller
    radius, then the lexicographically first site.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not isinstance(state, FieldState):
        raise TypeError("select_blowup_scale expects a FieldState")
    spec = state.spec
    candidates = sites_in_ball(spec, search_ball)
    if len(candidates) == 0:
        raise ValueError("search ball contains no lattice sites")
    dens32 = state_density(state) ** 1.5

    in_search = ball_mask(spec, search_ball)
    half_sums = ball_sums_all_sites(spec, dens32, spec.half_period)
    if spec.dvol * float(np.max(half_sums[in_search])) < 0.75 * epsilon:
        return None

    d2s = shell_distances(spec)
    # inclusive end index of each distance shell; distinct shells are h^2
    # quanta apart, far above summation roundoff
    gaps = np.flatnonzero(np.diff(d2s) > 1e-9 * np.maximum(d2s[:-1], 1.0))
    ends = np.append(gaps, len(d2s) - 1)
    r_shell = np.sqrt(d2s[ends])
    keep = r_shell <= spec.half_period * (1.0 + 1e-12)
    ends, r_shell = ends[keep], r_shell[keep]
    r_next = np.append(r_shell[1:], r_shell[-1] if len(r_shell) else 0.0)
    snap_radius = np.minimum(0.5 * (r_shell + r_next), spec.half_period)

    target = 0.5 * epsilon
    best = None
    for site in candidates:
        site = tuple(int(c) for c in site)
        cum = spec.dvol * np.cumsum(gather_by_shell(spec, dens32, site), dtype=np.float64)
        shell_mass = cum[ends]
        j = int(np.searchsorted(shell_mass, target))
        for k in (j - 1, j):
            if 0 <= k < len(shell_mass):
                err = abs(float(shell_mass[k]) - target)
                key = (err, float(snap_radius[k]))
                if best is None or key < best[0]:
                    best = (key, site, k, float(shell_mass[k]))
    (err, radius), site, _, mass = best
    return BlowupScale(
        site=site,
        position=spec.site_position(site),
        radius=radius,
        mass=mass,
        target=target,
        error=err,
        within_tolerance=err <= snap_tolerance * epsilon,
    )


# ---------------------------------------------------------------------------
# synthetic bumps

def _bump_profile(spec: LatticeSpec, center, width: float) -> np.ndarray:
    """Radially decreasing compactly supported profile, 1 at the center."""
    if width <= 0.0:
        raise ValueError(f"bump width must be positive, got {width}")
    d = np.sqrt(squared_distance_grid(spec, tuple(float(c) for c in center)))
    t = np.minimum(d / width, 1.0)
    return np.where(d < width, np.cos(0.5 * np.pi * t) ** 2, 0.0)


def synthetic_bump_density(spec: LatticeSpec, center, width: float, mass: float) -> np.ndarray:
    """Density array whose integral of density^(3/2) equals mass exactly."""
    if mass <= 0.0:
        raise ValueError(f"bump mass must be positive, got {mass}")
    g = _bump_profile(spec, center, width)
    norm = spec.dvol * float(np.add.reduce(g**1.5, axis=None, dtype=np.float64))
    if norm == 0.0:
        raise ValueError("bump support contains no lattice sites")
    return (mass / norm) ** (2.0 / 3.0) * g


def synthetic_bump_state(
    spec: LatticeSpec, center, width: float, mass: float, matrix=None
) -> FieldState:
    """Higgs-only state carrying the profile, mass-calibrated by bisection.

    phi = c * profile * matrix with a nilpotent default matrix; the density is
    then c^2 D1 + c^4 D2 pointwise with fixed nonnegative D1, D2, so the
    density^(3/2) integral is strictly increasing in c and bisection pins it.
    """
    if mass <= 0.0:
        raise ValueError(f"bump mass must be positive, got {mass}")
    m = SL2_BASIS[1] if matrix is None else np.asarray(matrix, dtype=np.complex128)
    g = _bump_profile(spec, center, width)
    state = FieldState.zeros(spec)
    state.phi[...] = g[..., None, None] * m
    d2 = frob2(commutator_bracket(state.phi))
    d1 = np.maximum(state_density(state) - d2, 0.0)

    def mass_at(c: float) -> float:
        dens = c * c * d1 + c**4 * d2
        return spec.dvol * float(np.add.reduce(dens**1.5, axis=None, dtype=np.float64))

    hi = 1.0
    for _ in range(200):
        if mass_at(hi) >= mass:
            break
        hi *= 2.0
    else:
        raise ValueError("bump mass target unreachable: profile density vanishes")
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mass_at(mid) < mass:
            lo = mid
        else:
            hi = mid
    state.phi *= hi
    return state


def synthetic_sequence(spec: LatticeSpec, atoms, widths, kind: str = "density") -> StateSequence:
    """Sequence of superposed bumps at fixed centers and shrinking widths.

    atoms is a list of (center, mass) pairs; widths gives one bump width per
    entry.  Masses of distinct bumps add exactly only while their supports
    stay disjoint, so keep centers farther apart than twice the widths.
    """
    atoms = tuple(atoms)
    widths = tuple(float(w) for w in widths)
    if not atoms or not widths:
        raise ValueError("need at least one bump and one width")
    entries = []
    for w in widths:
        if kind == "density":
            dens = np.zeros(spec.shape)
            for center, mass in atoms:
                dens += synthetic_bump_density(spec, center, w, mass)
            entries.append(dens)
        elif kind == "higgs":
            state = FieldState.zeros(spec)
            for center, mass in atoms:
                state.phi += synthetic_bump_state(spec, center, w, mass).phi
            entries.append(state)
        else:
            raise ValueError(f"unknown bump kind {kind!r}")
    return StateSequence(spec, tuple(entries))
