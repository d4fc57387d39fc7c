"""Gradient descent on the action and numerical Coulomb gauge fixing.

The flow is plain steepest descent with Armijo backtracking.  Acceptance
demands strict decrease, so the recorded trace is monotone by construction;
when no admissible step exists the flow stops with status "stalled" and
returns the partial trace.

Coulomb fixing iterates sigma = exp(xi) with xi solving the lattice Poisson
problem for the divergence of A.  The centered-difference Laplacian is
diagonal in the Fourier basis with symbol -sum_mu sin(2 pi k_mu / n)^2 / h^2;
its kernel (every k_mu in {0, n/2}) is projected out, which in particular
fixes mean(xi) = 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .energy import energy, energy_gradient
from .fields import FieldState, apply_gauge
from .lattice import LatticeSpec
from .operators import central_diff, dt_residuals
from .su2 import IDENTITY2, SU2_BASIS, frob2, project_su2, project_traceless, su2_exp

ARMIJO_SLOPE = 1e-4
# backtracking below this fraction of the step's starting trial means the
# line search cannot make progress at any representable scale
UNDERFLOW_FRACTION = 1e-18

TRACE_COLUMNS = ("step", "L", "term1", "term2", "term3", "grad_norm", "r1_norm", "r2_norm", "step_size")


@dataclass(frozen=True)
class FlowConfig:
    step_size: float = 0.25
    max_steps: int = 2000
    grad_tol: float = 1e-8
    residual_tol: float = 1e-4
    backtracking: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.grad_tol < 0 or self.residual_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if not 0.0 < self.backtracking < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class FlowTrace:
    """Per-step rows (TRACE_COLUMNS order); row 0 describes the initial state."""

    rows: list = field(default_factory=list)
    status: str = "max_steps"

    @property
    def L(self):
        return [row[1] for row in self.rows]

    def csv_text(self) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        for row in self.rows:
            lines.append("%d," % row[0] + ",".join("%.17g" % x for x in row[1:]))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.write(self.csv_text())


def _trace_row(step, bd, grad_norm, res, step_size):
    return (
        step,
        bd.total,
        bd.curvature_term,
        bd.codifferential_term,
        bd.bracket_term,
        grad_norm,
        res.holomorphic_norm,
        res.contracted_norm,
        step_size,
    )


def minimize(state0: FieldState, cfg: FlowConfig) -> tuple[FieldState, FlowTrace]:
    """Descend the action until the gradient norm reaches cfg.grad_tol.

    Returns the final state and a trace whose L column never increases.
    status is "converged", "max_steps", or "stalled" (line-search underflow).
    """
    state0.validate()
    spec = state0.spec
    state = state0.copy()
    bd = energy(state)
    grad = energy_gradient(state)
    gnorm = grad.norm(spec)
    res = dt_residuals(state.A, state.phi, spec)
    trace = FlowTrace()
    trace.rows.append(_trace_row(0, bd, gnorm, res, 0.0))

    trial = cfg.step_size
    step = 0
    while True:
        if gnorm <= cfg.grad_tol:
            trace.status = "converged"
            break
        if step >= cfg.max_steps:
            trace.status = "max_steps"
            break
        gsq = gnorm * gnorm
        t = trial
        accepted = None
        while t >= UNDERFLOW_FRACTION * trial:
            cand = FieldState(spec, state.A - t * grad.grad_a, state.phi - t * grad.grad_phi)
            cand_bd = energy(cand)
            if cand_bd.total <= bd.total - ARMIJO_SLOPE * t * gsq and cand_bd.total < bd.total:
                accepted = (cand, cand_bd, t)
                break
            t *= cfg.backtracking
        if accepted is None:
            trace.status = "stalled"
            break
        state, bd, used = accepted
        grad = energy_gradient(state)
        gnorm = grad.norm(spec)
        res = dt_residuals(state.A, state.phi, spec)
        step += 1
        trace.rows.append(_trace_row(step, bd, gnorm, res, used))
        trial = used / cfg.backtracking
    return state, trace


# ---------------------------------------------------------------------------
# Coulomb gauge


class CoulombResult(NamedTuple):
    """Unpacks as (transform, state, final_norm).

    transform is the pointwise product of the applied exp(xi) factors; state
    is the result of applying them in sequence (the two differ by the O(h^2)
    discrete chain rule, so the state is authoritative).  Convergence is
    final_norm <= tol; otherwise the best iterate seen is returned.
    """

    transform: np.ndarray
    state: FieldState
    final_norm: float


def connection_divergence(A: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """sum_mu D_mu A_mu with centered differences (the Coulomb residual)."""
    out = central_diff(A[0], 0, spec.spacing)
    for mu in range(1, 6):
        out += central_diff(A[mu], mu, spec.spacing)
    return out


def divergence_norm(A: np.ndarray, spec: LatticeSpec) -> float:
    d = connection_divergence(A, spec)
    return float(np.sqrt(spec.dvol * np.add.reduce(frob2(d), axis=None, dtype=np.float64)))


def _laplace_factor(spec: LatticeSpec) -> np.ndarray:
    """-1/symbol of the centered-difference Laplacian; 0 on its kernel bins."""
    n = spec.n_per_axis
    k = np.arange(n)
    s = np.sin(2.0 * np.pi * k / n) / spec.spacing
    s[(2 * k) % n == 0] = 0.0  # exact zeros at k = 0 and (even n) k = n/2
    s2 = s * s
    denom = np.zeros((n,) * 6)
    for mu in range(6):
        denom = denom + s2.reshape((1,) * mu + (n,) + (1,) * (5 - mu))
    with np.errstate(divide="ignore"):
        factor = np.where(denom > 0.0, -1.0 / np.where(denom > 0.0, denom, 1.0), 0.0)
    return factor


def _poisson_solve(rhs: np.ndarray, spec: LatticeSpec, factor: np.ndarray) -> np.ndarray:
    axes = tuple(range(6))
    hat = np.fft.fftn(rhs, axes=axes)
    hat *= factor[..., None, None]
    return np.fft.ifftn(hat, axes=axes)


def coulomb_fix(state: FieldState, tol: float, max_iters: int) -> CoulombResult:
    """Drive the divergence of A to zero by iterated gauge transformations.

    Each pass solves Laplace(xi) = div A and applies exp(xi); for small A one
    pass removes the linear part of the divergence and the loop converges
    rapidly.  Constant and Nyquist modes of xi are flat directions of the
    lattice Laplacian and stay untouched.
    """
    state.validate()
    spec = state.spec
    if tol < 0:
        raise ValueError("tol must be non-negative")
    factor = _laplace_factor(spec)
    cur = state.copy()
    total = np.broadcast_to(IDENTITY2, spec.shape + (2, 2)).copy()
    norm = divergence_norm(cur.A, spec)
    best = (norm, cur, total)
    iters = 0
    while norm > tol and iters < max_iters:
        xi = project_su2(_poisson_solve(connection_divergence(cur.A, spec), spec, factor))
        sig = su2_exp(xi)
        cur = apply_gauge(sig, cur)
        total = sig @ total
        norm = divergence_norm(cur.A, spec)
        iters += 1
        if norm < best[0]:
            best = (norm, cur, total)
    return CoulombResult(best[2], best[1], best[0])


# ---------------------------------------------------------------------------
# Seeded initial data


def band_modes(kmax: int):
    """Lexicographic half-space representatives with 0 < |k|_inf <= kmax."""
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    modes = []
    for k in itertools.product(range(-kmax, kmax + 1), repeat=6):
        if any(k) and k > tuple(-c for c in k):
            modes.append(k)
    return tuple(modes)


def _mode_phases(spec: LatticeSpec, k) -> tuple[np.ndarray, np.ndarray]:
    n = spec.n_per_axis
    theta = np.zeros(spec.shape)
    grid = 2.0 * np.pi / n * np.arange(n)
    for mu, km in enumerate(k):
        if km:
            theta = theta + (km * grid).reshape((1,) * mu + (n,) + (1,) * (5 - mu))
    return np.cos(theta), np.sin(theta)


def band_limited_connection(spec: LatticeSpec, amplitude: float, seed: int, kmax: int = 1) -> np.ndarray:
    """Random smooth connection, band limited to |k|_inf <= kmax, exactly transverse.

    Coefficients are drawn per mode in a fixed order, so the same seed
    describes the same smooth field at every resolution; only the
    transversality projection (built from the centered-difference symbol)
    depends on n.  Nyquist frequencies are excluded by kmax < n/2.
    """
    n = spec.n_per_axis
    if 2 * kmax >= n:
        raise ValueError(f"kmax {kmax} reaches Nyquist on an n={n} lattice")
    rng = np.random.default_rng(seed)
    modes = band_modes(kmax)
    scale = amplitude / np.sqrt(len(modes))
    A = np.zeros((6,) + spec.shape + (2, 2), dtype=np.complex128)
    for k in modes:
        cos_c = rng.standard_normal((6, 3))
        sin_c = rng.standard_normal((6, 3))
        s = np.array([np.sin(2.0 * np.pi * km / n) / spec.spacing for km in k])
        s2 = float(s @ s)
        if s2 > 0.0:  # remove the longitudinal part of both quadratures
            cos_c -= np.outer(s, s @ cos_c) / s2
            sin_c -= np.outer(s, s @ sin_c) / s2
        cth, sth = _mode_phases(spec, k)
        for mu in range(6):
            coeff = np.tensordot(cos_c[mu], SU2_BASIS, axes=(0, 0))
            A[mu] += scale * cth[..., None, None] * coeff
            coeff = np.tensordot(sin_c[mu], SU2_BASIS, axes=(0, 0))
            A[mu] += scale * sth[..., None, None] * coeff
    return project_su2(A)


def band_limited_higgs(spec: LatticeSpec, amplitude: float, seed: int, kmax: int = 1) -> np.ndarray:
    """Random smooth trace-free Higgs coefficient, band limited as above."""
    n = spec.n_per_axis
    if 2 * kmax >= n:
        raise ValueError(f"kmax {kmax} reaches Nyquist on an n={n} lattice")
    rng = np.random.default_rng(seed)
    modes = band_modes(kmax)
    scale = amplitude / np.sqrt(len(modes))
    phi = np.zeros(spec.shape + (2, 2), dtype=np.complex128)
    for k in modes:
        draws = rng.standard_normal((2, 2, 3))  # (quadrature, re/im, basis)
        cth, sth = _mode_phases(spec, k)
        for q, th in ((0, cth), (1, sth)):
            coeff = np.tensordot(draws[q, 0] + 1j * draws[q, 1], SU2_BASIS, axes=(0, 0))
            phi += scale * th[..., None, None] * coeff
    return project_traceless(phi)


def random_band_limited_state(
    spec: LatticeSpec,
    amplitude: float,
    seed: int,
    kmax: int = 1,
    higgs_amplitude: float = 0.0,
) -> FieldState:
    """Seeded smooth perturbation of the flat state (transverse A, optional phi)."""
    A = band_limited_connection(spec, amplitude, seed, kmax)
    if higgs_amplitude > 0.0:
        phi = band_limited_higgs(spec, higgs_amplitude, seed + 1, kmax)
    else:
        phi = np.zeros(spec.shape + (2, 2), dtype=np.complex128)
    return FieldState(spec, A, phi)


# ---------------------------------------------------------------------------
# Resolution transfer


def _pad_axis(hat: np.ndarray, axis: int, n: int, m: int) -> np.ndarray:
    """Zero-pad one Fourier axis from n to m bins, splitting the Nyquist bin."""
    moved = np.moveaxis(hat, axis, 0)
    out = np.zeros((m,) + moved.shape[1:], dtype=moved.dtype)
    half = n // 2
    if n % 2 == 0:
        out[:half] = moved[:half]
        out[half] = 0.5 * moved[half]
        out[m - half] += 0.5 * moved[half]  # m == n folds the halves back together
        if half + 1 < n:
            out[m - half + 1 :] = moved[half + 1 :]
    else:
        out[: half + 1] = moved[: half + 1]
        out[m - half :] = moved[half + 1 :]
    return np.moveaxis(out, 0, axis)


def trig_resample(f: np.ndarray, n: int, m: int) -> np.ndarray:
    """Trigonometric interpolation of a periodic lattice field onto m^6 sites.

    Exact on fields below the coarse Nyquist frequency; the Nyquist bin of an
    even n is split symmetrically, which reproduces the cosine-phase part
    (the sine phase is invisible in the samples to begin with).
    """
    if m < n:
        raise ValueError("resampling only refines (m >= n)")
    axes = tuple(range(6))
    hat = np.fft.fftn(f, axes=axes)
    for axis in axes:
        hat = _pad_axis(hat, axis, n, m)
    return np.fft.ifftn(hat, axes=axes) * float(m / n) ** 6


def prolong_state(state: FieldState, n_out: int) -> FieldState:
    """Resample a state onto a finer lattice with the same physical period.

    Anti-hermiticity and tracelessness are real-linear constraints, so the
    interpolated fields satisfy them up to roundoff (projected away here).
    """
    spec = state.spec
    n = spec.n_per_axis
    if n_out < n:
        raise ValueError("prolongation target must not be coarser")
    fine = LatticeSpec(n_out, spec.period / n_out)
    A = np.empty((6,) + fine.shape + (2, 2), dtype=np.complex128)
    for mu in range(6):
        A[mu] = project_su2(trig_resample(state.A[mu], n, n_out))
    phi = project_traceless(trig_resample(state.phi, n, n_out))
    return FieldState(fine, A, phi)
