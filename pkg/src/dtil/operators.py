"""Discrete covariant exterior calculus on the complex-paired 6-torus.

Fixed conventions, shared by every consumer of this module:

* sites: periodic n^6 grid, spacing h; a field of k-form coefficients is an
  array (ncomp, n, n, n, n, n, n, 2, 2) whose components are indexed by
  lexicographically sorted multi-indices (subsets of {0..5} for real forms,
  subsets of {0, 1, 2} for (0, q)-forms); matrix-valued scalars drop the
  component axis;
* derivatives: central difference D_mu f = (f(x+h e_mu) - f(x-h e_mu)) / (2h),
  covariantized as P_mu = D_mu + [A_mu, .];
* complex pairing: z^a = x^{2a} + i x^{2a+1} for a in {0, 1, 2}, with
  A^{0,1}_a = (A_{2a} + i A_{2a+1}) / 2 and dbar_a = (D_{2a} + i D_{2a+1}) / 2;
  the (1,0) connection coefficient is A^{1,0}_a = -(A^{0,1}_a)^dagger, as
  unitarity of the underlying connection dictates;
* inner products: <alpha, beta> = h^6 * sum over sites and over the ordered
  component list of Re Tr(alpha beta^dagger).  The combinatorial weights a
  continuum treatment attaches to form components are absorbed by this
  convention once and for all; the *_adjoint operators below are exact
  adjoints with respect to it, which is the property everything downstream
  (energy gradients, residual norms) actually uses.

Because the stencil is centered, P_mu is exactly skew-adjoint and the adjoint
formulas are exact at machine precision, not just to O(h^2); discretization
error enters only when comparing against continuum derivatives.

The Higgs coefficient phi is the single component of a (0,3)-form u; its real
counterpart v = u + u^dagger-conjugate has eight nonzero real-form components
v_J = (-i)^s phi + (+i)^s phi^dagger (s = number of imaginary axes in J), each
a hermitian matrix.  The second Donaldson-Thomas residual contracts the (1,1)
curvature against the Kahler form; we normalize the contraction as
i * sum_a F_{2a, 2a+1}, which is hermitian, and add kappa * [phi, phi^dagger].
kappa defaults to 1 and is a configuration knob: its continuum value depends
on a real-structure convention for u that has no effect on any tested
invariant (only the hermitian trace-free structure of the residual does).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .lattice import COMPLEX_PAIRS, LatticeSpec
from .su2 import comm, commutator_bracket, dag, frob2


# ---------------------------------------------------------------------------
# multi-index combinatorics

@lru_cache(maxsize=None)
def subsets(n_axes: int, q: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically sorted q-subsets of range(n_axes)."""
    return tuple(combinations(range(n_axes), q))


@lru_cache(maxsize=None)
def subset_index(n_axes: int, q: int) -> dict:
    return {s: i for i, s in enumerate(subsets(n_axes, q))}


def _eps(mu: int, K: tuple[int, ...]) -> int:
    """Sign (-1)^(number of elements of K below mu), for mu not in K."""
    return -1 if sum(1 for k in K if k < mu) % 2 else 1


@lru_cache(maxsize=None)
def _d_map(n_axes: int, q: int):
    """Terms of the exterior derivative q -> q+1: (out, sign, mu, in)."""
    idx_in = subset_index(n_axes, q)
    terms = []
    for out_i, J in enumerate(subsets(n_axes, q + 1)):
        for t, mu in enumerate(J):
            rest = J[:t] + J[t + 1 :]
            terms.append((out_i, -1 if t % 2 else 1, mu, idx_in[rest]))
    return tuple(terms)


@lru_cache(maxsize=None)
def _dstar_map(n_axes: int, q_in: int):
    """Terms of the codifferential q_in -> q_in - 1: (out, sign, mu, in)."""
    idx_in = subset_index(n_axes, q_in)
    terms = []
    for out_i, K in enumerate(subsets(n_axes, q_in - 1)):
        for mu in range(n_axes):
            if mu in K:
                continue
            J = tuple(sorted(K + (mu,)))
            terms.append((out_i, _eps(mu, K), mu, idx_in[J]))
    return tuple(terms)


# Real 3-form support of v = u + conj(u): one axis out of each complex pair.
V_TRIPLES = tuple(
    tuple(sorted((i, j, k)))
    for i in COMPLEX_PAIRS[0]
    for j in COMPLEX_PAIRS[1]
    for k in COMPLEX_PAIRS[2]
)

# Coefficient of phi in v_J: product over pairs of (1 | -i) per (real | imag) pick.
V_COEFF = {J: (-1j) ** sum(1 for ax in J if ax % 2 == 1) for J in V_TRIPLES}


# ---------------------------------------------------------------------------
# stencils

def _site_axis(arr: np.ndarray, mu: int) -> int:
    # site axes always sit just before the trailing (2, 2)
    return arr.ndim - 8 + mu


def central_diff(f: np.ndarray, mu: int, spacing: float) -> np.ndarray:
    ax = _site_axis(f, mu)
    return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * spacing)


def cov_diff(f: np.ndarray, a_mu: np.ndarray | None, mu: int, spacing: float) -> np.ndarray:
    """P_mu f = D_mu f + [A_mu, f]; pass a_mu=None for the flat derivative."""
    out = central_diff(f, mu, spacing)
    if a_mu is not None:
        out = out + comm(a_mu, f)
    return out


def _check_connection(A, spec: LatticeSpec):
    if A is None:
        return
    want = (6,) + spec.shape + (2, 2)
    if A.shape != want:
        raise ValueError(f"connection shape {A.shape}, expected {want}")


def _check_form(alpha, spec: LatticeSpec, ncomp: int, what: str):
    want = (ncomp,) + spec.shape + (2, 2)
    if alpha.shape != want:
        raise ValueError(f"{what} shape {alpha.shape}, expected {want}")


# ---------------------------------------------------------------------------
# real covariant exterior calculus

def d_cov(beta: np.ndarray, A: np.ndarray | None, spec: LatticeSpec, q: int) -> np.ndarray:
    """Covariant exterior derivative on real q-form coefficients, q -> q+1."""
    if not 0 <= q <= 5:
        raise ValueError(f"real q-forms need 0 <= q <= 5, got q={q}")
    _check_connection(A, spec)
    _check_form(beta, spec, len(subsets(6, q)), f"{q}-form")
    out = np.zeros((len(subsets(6, q + 1)),) + spec.shape + (2, 2), dtype=np.complex128)
    for out_i, sign, mu, in_i in _d_map(6, q):
        term = cov_diff(beta[in_i], None if A is None else A[mu], mu, spec.spacing)
        out[out_i] += sign * term
    return out


def d_cov_adjoint(gamma: np.ndarray, A: np.ndarray | None, spec: LatticeSpec, q_in: int) -> np.ndarray:
    """Exact adjoint of d_cov, q_in -> q_in - 1 (component-sum inner product)."""
    if not 1 <= q_in <= 6:
        raise ValueError(f"adjoint needs 1 <= q_in <= 6, got q_in={q_in}")
    _check_connection(A, spec)
    _check_form(gamma, spec, len(subsets(6, q_in)), f"{q_in}-form")
    out = np.zeros((len(subsets(6, q_in - 1)),) + spec.shape + (2, 2), dtype=np.complex128)
    for out_i, sign, mu, in_i in _dstar_map(6, q_in):
        term = cov_diff(gamma[in_i], None if A is None else A[mu], mu, spec.spacing)
        out[out_i] -= sign * term
    return out


# ---------------------------------------------------------------------------
# complex (0, q) calculus

def a01_components(A: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """(0,1) connection coefficients, shape (3,) + sites + (2, 2)."""
    _check_connection(A, spec)
    return np.stack([0.5 * (A[re] + 1j * A[im]) for re, im in COMPLEX_PAIRS])


def _dbar_c(f: np.ndarray, a: int, spacing: float) -> np.ndarray:
    re, im = COMPLEX_PAIRS[a]
    return 0.5 * (central_diff(f, re, spacing) + 1j * central_diff(f, im, spacing))


def _del_c(f: np.ndarray, a: int, spacing: float) -> np.ndarray:
    re, im = COMPLEX_PAIRS[a]
    return 0.5 * (central_diff(f, re, spacing) - 1j * central_diff(f, im, spacing))


def dbar_A(alpha: np.ndarray, a01: np.ndarray | None, spec: LatticeSpec, q: int) -> np.ndarray:
    """Covariant dbar on (0, q) coefficients, q in {0, 1, 2}.

    (0,3)-forms are top degree in dbar direction; q = 3 is rejected.
    """
    if not 0 <= q <= 2:
        raise ValueError(f"dbar_A maps (0,q) -> (0,q+1) for q in 0..2, got q={q}")
    _check_form(alpha, spec, len(subsets(3, q)), f"(0,{q})-form")
    out = np.zeros((len(subsets(3, q + 1)),) + spec.shape + (2, 2), dtype=np.complex128)
    for out_i, sign, a, in_i in _d_map(3, q):
        term = _dbar_c(alpha[in_i], a, spec.spacing)
        if a01 is not None:
            term = term + comm(a01[a], alpha[in_i])
        out[out_i] += sign * term
    return out


def dbar_A_adjoint(gamma: np.ndarray, a01: np.ndarray | None, spec: LatticeSpec, q_in: int) -> np.ndarray:
    """Exact adjoint of dbar_A, (0, q_in) -> (0, q_in - 1).

    Componentwise this is -sum over completions of (del_a - ad((A^{0,1}_a)^dagger)),
    i.e. the (1,0) coefficient -(A^{0,1})^dagger enters, as it must for the
    pairing to be exact.
    """
    if not 1 <= q_in <= 3:
        raise ValueError(f"adjoint needs (0,q) with 1 <= q <= 3, got q={q_in}")
    _check_form(gamma, spec, len(subsets(3, q_in)), f"(0,{q_in})-form")
    out = np.zeros((len(subsets(3, q_in - 1)),) + spec.shape + (2, 2), dtype=np.complex128)
    for out_i, sign, a, in_i in _dstar_map(3, q_in):
        term = _del_c(gamma[in_i], a, spec.spacing)
        if a01 is not None:
            term = term - comm(dag(a01[a]), gamma[in_i])
        out[out_i] -= sign * term
    return out


# ---------------------------------------------------------------------------
# curvature and type decomposition

RPAIRS = subsets(6, 2)
RPAIR_INDEX = subset_index(6, 2)


def curvature(A: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Real curvature components F_{mu nu} = D_mu A_nu - D_nu A_mu + [A_mu, A_nu].

    Returned on the 15 lexicographic pairs mu < nu; F_{nu mu} = -F_{mu nu}.
    Components are anti-hermitian trace-free whenever A is.
    """
    _check_connection(A, spec)
    out = np.empty((15,) + spec.shape + (2, 2), dtype=np.complex128)
    for i, (mu, nu) in enumerate(RPAIRS):
        out[i] = (
            central_diff(A[nu], mu, spec.spacing)
            - central_diff(A[mu], nu, spec.spacing)
            + comm(A[mu], A[nu])
        )
    return out


def curvature_component(F: np.ndarray, mu: int, nu: int) -> np.ndarray:
    """F_{mu nu} with antisymmetry handled; zero matrix for mu = nu."""
    if mu == nu:
        return np.zeros(F.shape[1:], dtype=F.dtype)
    if mu < nu:
        return F[RPAIR_INDEX[(mu, nu)]]
    return -F[RPAIR_INDEX[(nu, mu)]]


@dataclass
class TypeSplit:
    """Curvature split by complex type.

    f20[c], f02[c]: coefficients on dz^p dz^q resp. dzbar^p dzbar^q for the
    pair list PAIR2 = ((0,1), (0,2), (1,2)); f11[p, q]: coefficient on
    dz^p dzbar^q, all nine ordered pairs including the diagonal.
    """

    f20: np.ndarray
    f11: np.ndarray
    f02: np.ndarray


PAIR2 = subsets(3, 2)


def type_decompose(F: np.ndarray, spec: LatticeSpec) -> TypeSplit:
    """Split real curvature components into (2,0), (1,1), (0,2) coefficients.

    The map is a linear bijection onto 3 + 9 + 3 complex components; the
    inverse is recompose_types.  For anti-hermitian F the parts satisfy
    f02 = -(f20)^dagger and f11[q,p] = +(f11[p,q])^dagger (so the diagonal
    (1,1) coefficients are hermitian).
    """
    _check_form(F, spec, 15, "curvature")
    shape = F.shape[1:]
    f20 = np.empty((3,) + shape, dtype=np.complex128)
    f02 = np.empty((3,) + shape, dtype=np.complex128)
    f11 = np.empty((3, 3) + shape, dtype=np.complex128)
    for c, (p, q) in enumerate(PAIR2):
        rr = F[RPAIR_INDEX[(2 * p, 2 * q)]]
        ii = F[RPAIR_INDEX[(2 * p + 1, 2 * q + 1)]]
        ri = F[RPAIR_INDEX[(2 * p, 2 * q + 1)]]
        ir = F[RPAIR_INDEX[(2 * p + 1, 2 * q)]]
        f02[c] = 0.25 * (rr - ii) + 0.25j * (ir + ri)
        f20[c] = 0.25 * (rr - ii) - 0.25j * (ir + ri)
        f11[p, q] = 0.25 * (rr + ii) + 0.25j * (ri - ir)
        f11[q, p] = -0.25 * (rr + ii) + 0.25j * (ri - ir)
    for p in range(3):
        f11[p, p] = 0.5j * F[RPAIR_INDEX[(2 * p, 2 * p + 1)]]
    return TypeSplit(f20=f20, f11=f11, f02=f02)


def recompose_types(split: TypeSplit, spec: LatticeSpec) -> np.ndarray:
    """Inverse of type_decompose; exact up to rounding."""
    shape = (15,) + spec.shape + (2, 2)
    F = np.zeros(shape, dtype=np.complex128)
    for c, (p, q) in enumerate(PAIR2):
        sum20 = split.f20[c] + split.f02[c]
        diff20 = split.f02[c] - split.f20[c]
        sum11 = split.f11[p, q] + split.f11[q, p]
        diff11 = split.f11[p, q] - split.f11[q, p]
        F[RPAIR_INDEX[(2 * p, 2 * q)]] = sum20 + diff11
        F[RPAIR_INDEX[(2 * p + 1, 2 * q + 1)]] = diff11 - sum20
        F[RPAIR_INDEX[(2 * p, 2 * q + 1)]] = -1j * (diff20 + sum11)
        F[RPAIR_INDEX[(2 * p + 1, 2 * q)]] = -1j * (diff20 - sum11)
    for p in range(3):
        F[RPAIR_INDEX[(2 * p, 2 * p + 1)]] = -2j * split.f11[p, p]
    return F


def kahler_contraction(F: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """i * sum_a F_{2a, 2a+1}: hermitian for anti-hermitian curvature."""
    _check_form(F, spec, 15, "curvature")
    acc = F[RPAIR_INDEX[(0, 1)]] + F[RPAIR_INDEX[(2, 3)]] + F[RPAIR_INDEX[(4, 5)]]
    return 1j * acc


# ---------------------------------------------------------------------------
# Higgs forms

def v_from_phi(phi: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Real 3-form v = u + conj-transpose partner, on all 20 components.

    Twelve components vanish identically (v picks one axis per complex pair);
    the eight active ones are hermitian matrices.
    """
    if phi.shape != spec.shape + (2, 2):
        raise ValueError(f"phi shape {phi.shape}, expected {spec.shape + (2, 2)}")
    out = np.zeros((20,) + spec.shape + (2, 2), dtype=np.complex128)
    idx3 = subset_index(6, 3)
    phid = dag(phi)
    for J in V_TRIPLES:
        c = V_COEFF[J]
        out[idx3[J]] = c * phi + np.conj(c) * phid
    return out


def dA_star_v(A: np.ndarray | None, phi: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Covariant codifferential of v(phi): a real 2-form (15 components).

    Each component is hermitian (image of hermitian components under P_mu
    against anti-hermitian A stays hermitian).
    """
    v = v_from_phi(phi, spec)
    return d_cov_adjoint(v, A, spec, q_in=3)


# ---------------------------------------------------------------------------
# Donaldson-Thomas residuals

def slope_term(rank: int = 2, c1_pairing: float = 0.0, kahler_volume: float = 1.0) -> float:
    """Linear coefficient in the contracted curvature equation.

    Proportional to the first-Chern pairing; identically zero for SU(2)
    (trivial determinant bundle), which the residual below relies on.
    """
    return 3.0 * c1_pairing / (rank * kahler_volume)


@dataclass
class ResidualPair:
    """Both Donaldson-Thomas residuals with their lattice L2 norms.

    holomorphic: (0,2)-form F^{0,2} + dbar_A^* u, 3 components;
    contracted: hermitian trace-free matrix field
    i * sum_a F_{2a,2a+1} + kappa [phi, phi^dagger].
    """

    holomorphic: np.ndarray
    contracted: np.ndarray
    holomorphic_norm: float
    contracted_norm: float


def dt_residuals(A: np.ndarray, phi: np.ndarray, spec: LatticeSpec, kappa: float = 1.0) -> ResidualPair:
    F = curvature(A, spec)
    split = type_decompose(F, spec)
    a01 = a01_components(A, spec)
    u = phi[None]
    r1 = split.f02 + dbar_A_adjoint(u, a01, spec, q_in=3)
    r2 = kahler_contraction(F, spec) + kappa * commutator_bracket(phi)
    dvol = spec.dvol
    n1 = float(np.sqrt(dvol * np.vdot(r1, r1).real))
    n2 = float(np.sqrt(dvol * np.vdot(r2, r2).real))
    return ResidualPair(holomorphic=r1, contracted=r2, holomorphic_norm=n1, contracted_norm=n2)


# ---------------------------------------------------------------------------
# form inner products

def form_inner(alpha: np.ndarray, beta: np.ndarray, spec: LatticeSpec) -> float:
    """h^6-weighted Re Tr pairing, summed over components and sites."""
    if alpha.shape != beta.shape:
        raise ValueError(f"shape mismatch {alpha.shape} vs {beta.shape}")
    # vdot conjugates its first argument; Re is symmetric either way
    return float(spec.dvol * np.vdot(beta, alpha).real)


def form_norm2(alpha: np.ndarray, spec: LatticeSpec) -> float:
    return float(spec.dvol * np.add.reduce(frob2(alpha), axis=None, dtype=np.float64))
