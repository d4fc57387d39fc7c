"""Empirical local estimates on computed states.

Three read-only scans over the energy density: pointwise-bound probes on
balls (with the implied constants measured, not assumed), the flat-space
radial monotonicity check m(rho) = rho^-2 * ball energy, and the core/tail
decay diagnostic.  All ball quantities use the canonical shell gather, so
every report is exactly translation covariant and deterministic under any
DTIL_THREADS setting (results are assembled in probe order).

The estimates hold for exact solutions; on approximate ones the discretization
and residual both enter, so each report carries the state's residual norms.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import worker_count
from .energy import density
from .fields import FieldState
from .lattice import LatticeSpec, gather_by_shell, shell_distances
from .operators import dt_residuals


def top_density_sites(dens: np.ndarray, spec: LatticeSpec, count: int):
    """The `count` sites of largest density, ties broken lexicographically."""
    if count < 1:
        raise ValueError("count must be positive")
    order = np.argsort(-dens.ravel(), kind="stable")[:count]
    return [tuple(int(c) for c in np.unravel_index(i, spec.shape)) for i in order]


def _check_radii(spec: LatticeSpec, radii) -> tuple:
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise ValueError("radius list is empty")
    if any(r <= 0.0 for r in radii):
        raise ValueError("radii must be positive")
    if max(radii) > spec.half_period * (1.0 + 1e-12):
        raise ValueError(f"radius {max(radii)} exceeds half-period {spec.half_period}")
    return radii


# ---------------------------------------------------------------------------
# Pointwise bounds


@dataclass(frozen=True)
class EpsProbe:
    """One (center, radius) measurement.

    local_energy is rho^-2 times the ball energy; local_energy_32 the ball
    integral of density^{3/2}.  The implied constants make
    sup sqrt(density) = C * rho^-2 * (gauge of smallness) an equality:
    implied_c1 against sqrt(local_energy), implied_c2 against
    local_energy_32^{1/3}.  Gate fields are None when no threshold was given.
    """

    center: tuple
    radius: float
    local_energy: float
    local_energy_32: float
    center_density_sqrt: float
    sup_density_sqrt: float
    implied_c1: float
    implied_c2: float
    applicable: bool | None
    center_bound_holds: bool | None
    center_bound_32_holds: bool | None


@dataclass
class EpsRegularityReport:
    probes: list
    epsilon: float | None
    c_config: float | None
    holomorphic_residual: float
    contracted_residual: float

    def max_implied(self) -> tuple[float, float]:
        c1 = max((p.implied_c1 for p in self.probes), default=0.0)
        c2 = max((p.implied_c2 for p in self.probes), default=0.0)
        return c1, c2

    def all_pass(self) -> bool:
        return all(p.center_bound_holds for p in self.probes if p.applicable)

    def csv_text(self) -> str:
        cols = (
            "c0,c1,c2,c3,c4,c5,radius,local_energy,local_energy_32,"
            "center_density_sqrt,sup_density_sqrt,implied_c1,implied_c2,"
            "applicable,center_bound_holds,center_bound_32_holds"
        )
        lines = [cols]
        for p in self.probes:
            flags = ",".join("" if f is None else str(int(f)) for f in (p.applicable, p.center_bound_holds, p.center_bound_32_holds))
            nums = ",".join(
                "%.17g" % x
                for x in (
                    p.radius,
                    p.local_energy,
                    p.local_energy_32,
                    p.center_density_sqrt,
                    p.sup_density_sqrt,
                    p.implied_c1,
                    p.implied_c2,
                )
            )
            lines.append(",".join(str(c) for c in p.center) + "," + nums + "," + flags)
        return "\n".join(lines) + "\n"


def _probe_center(spec, dens, dens32, d2s, center, radii, epsilon, c_config):
    gathered = gather_by_shell(spec, dens, center)
    cum = np.cumsum(gathered, dtype=np.float64)
    cum32 = np.cumsum(gather_by_shell(spec, dens32, center), dtype=np.float64)
    sups = np.maximum.accumulate(gathered)
    center_sqrt = float(np.sqrt(gathered[0]))
    rows = []
    for rho in radii:
        k = int(np.searchsorted(d2s, rho * rho, side="right"))
        ball = float(cum[k - 1]) * spec.dvol
        local = ball / (rho * rho)
        local32 = float(cum32[k - 1]) * spec.dvol
        sup_sqrt = float(np.sqrt(sups[k - 1]))
        c1 = sup_sqrt * rho * rho / np.sqrt(local) if local > 0.0 else 0.0
        c2 = sup_sqrt * rho * rho / local32 ** (1.0 / 3.0) if local32 > 0.0 else 0.0
        if epsilon is None or c_config is None:
            applicable = holds = holds32 = None
        else:
            applicable = bool(local <= epsilon)
            holds = bool(center_sqrt <= c_config / (rho * rho) * np.sqrt(local))
            holds32 = bool(center_sqrt <= c_config / (rho * rho) * local32 ** (1.0 / 3.0))
        rows.append(
            EpsProbe(center, rho, local, local32, center_sqrt, sup_sqrt, float(c1), float(c2), applicable, holds, holds32)
        )
    return rows


def eps_regularity_scan(
    state: FieldState,
    centers,
    radii,
    epsilon: float | None = None,
    c_config: float | None = None,
) -> EpsRegularityReport:
    """Measure the pointwise-bound ingredients on every (center, radius) pair.

    With epsilon and c_config given, each probe also records whether the
    center bound sqrt(density(y)) <= c_config * rho^-2 * sqrt(local_energy)
    (and its ^{1/3} variant) holds whenever local_energy <= epsilon.
    """
    spec = state.spec
    radii = _check_radii(spec, radii)
    centers = [spec.wrap(c) for c in centers]
    dens = density(state)
    dens32 = dens**1.5
    d2s = shell_distances(spec)
    res = dt_residuals(state.A, state.phi, spec)

    def work(center):
        return _probe_center(spec, dens, dens32, d2s, center, radii, epsilon, c_config)

    workers = min(worker_count(), max(1, len(centers)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(work, centers))
    else:
        chunks = [work(c) for c in centers]
    probes = [p for chunk in chunks for p in chunk]
    return EpsRegularityReport(probes, epsilon, c_config, res.holomorphic_norm, res.contracted_norm)


# ---------------------------------------------------------------------------
# Radial monotonicity (flat metric)


@dataclass(frozen=True)
class MonotonicityViolation:
    index: int
    rho_small: float
    rho_large: float
    m_small: float
    m_large: float
    allowed_drop: float


@dataclass
class MonotonicityReport:
    center: tuple
    radii: tuple
    values: tuple
    c_tol: float
    violations: list
    holomorphic_residual: float
    contracted_residual: float

    def csv_text(self) -> str:
        lines = ["radius,m,violation"]
        flagged = {v.index + 1 for v in self.violations}
        for i, (rho, m) in enumerate(zip(self.radii, self.values)):
            lines.append("%.17g,%.17g,%d" % (rho, m, int(i in flagged)))
        return "\n".join(lines) + "\n"


def monotonicity_scan(state: FieldState, center, radii, c_tol: float = 5.0) -> MonotonicityReport:
    """m(rho) = rho^-2 * ball energy across an increasing radius ladder.

    The discrete ball boundary moves by O(h), so a drop of up to
    c_tol * (h / rho_i) * m(rho_i) between adjacent rungs is tolerated;
    anything larger is recorded as a violation.
    """
    spec = state.spec
    radii = _check_radii(spec, radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    center = spec.wrap(center)
    dens = density(state)
    cum = np.cumsum(gather_by_shell(spec, dens, center), dtype=np.float64)
    d2s = shell_distances(spec)
    values = []
    for rho in radii:
        k = int(np.searchsorted(d2s, rho * rho, side="right"))
        values.append(float(cum[k - 1]) * spec.dvol / (rho * rho))
    violations = []
    for i in range(len(radii) - 1):
        allowed = c_tol * (spec.spacing / radii[i]) * values[i]
        if values[i + 1] < values[i] - allowed:
            violations.append(
                MonotonicityViolation(i, radii[i], radii[i + 1], values[i], values[i + 1], allowed)
            )
    res = dt_residuals(state.A, state.phi, spec)
    return MonotonicityReport(
        center, radii, tuple(values), c_tol, violations, res.holomorphic_norm, res.contracted_norm
    )


# ---------------------------------------------------------------------------
# Core/tail decay diagnostic


@dataclass(frozen=True)
class LiouvilleEntry:
    tau: float
    sigma: float
    core: float
    tail: float
    tail_dominates: bool


@dataclass
class LiouvilleReport:
    center: tuple
    tail_weight: float
    entries: list

    def all_tail_dominated(self) -> bool:
        return all(e.tail_dominates for e in self.entries)

    def csv_text(self) -> str:
        lines = ["tau,sigma,core,tail,tail_dominates"]
        for e in self.entries:
            lines.append("%.17g,%.17g,%.17g,%.17g,%d" % (e.tau, e.sigma, e.core, e.tail, int(e.tail_dominates)))
        return "\n".join(lines) + "\n"


def liouville_diagnostic(
    state: FieldState,
    tau_grid,
    sigma_grid,
    center=(0,) * 6,
    tail_weight: float = 1.0,
) -> LiouvilleReport:
    """Tabulate core sigma^-2 * (energy in B_tau) against the complement term
    tail_weight * (integral of density^{3/2} outside B_tau)^{1/3}.

    A decaying field shows the tail dominating for every grid pair; a core
    that persists as sigma grows signals energy that does not spread out.
    """
    spec = state.spec
    taus = _check_radii(spec, tau_grid)
    sigmas = tuple(float(s) for s in sigma_grid)
    if not sigmas or any(s <= 0.0 for s in sigmas):
        raise ValueError("sigma grid must be positive and non-empty")
    center = spec.wrap(center)
    dens = density(state)
    dens32 = dens**1.5
    cum = np.cumsum(gather_by_shell(spec, dens, center), dtype=np.float64)
    cum32 = np.cumsum(gather_by_shell(spec, dens32, center), dtype=np.float64)
    total32 = float(cum32[-1])
    d2s = shell_distances(spec)
    entries = []
    for tau in taus:
        k = int(np.searchsorted(d2s, tau * tau, side="right"))
        ball = float(cum[k - 1]) * spec.dvol
        outside = max(total32 - float(cum32[k - 1]), 0.0) * spec.dvol
        tail = tail_weight * outside ** (1.0 / 3.0)
        for sigma in sigmas:
            core = ball / (sigma * sigma)
            entries.append(LiouvilleEntry(tau, sigma, core, tail, tail >= core))
    return LiouvilleReport(center, tail_weight, entries)
