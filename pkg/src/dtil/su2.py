"""Pointwise 2x2 matrix algebra for SU(2) lattice fields.

Everything here is batched: arrays of shape (..., 2, 2) are treated as fields
of matrices and all operations vectorize over the leading axes.  Conventions:

* connection components live in su(2): anti-hermitian trace-free;
* Higgs coefficients live in sl(2,C): trace-free, otherwise arbitrary;
* the real pairing is <X, Y> = Re Tr(X Y^dagger), with norm |X|^2 = Tr(X X^dagger).

The two scalar identities exposed as *_check functions return both sides and
let the caller assert, so they double as test oracles and as a CLI self-check.
"""

from __future__ import annotations

import numpy as np

PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=np.complex128,
)

# Basis of su(2): anti-hermitian trace-free.
SU2_BASIS = 1.0j * PAULI

# Basis of sl(2,C) over C: sigma_3, raising, lowering.
SL2_BASIS = np.array(
    [
        [[1.0, 0.0], [0.0, -1.0]],
        [[0.0, 1.0], [0.0, 0.0]],
        [[0.0, 0.0], [1.0, 0.0]],
    ],
    dtype=np.complex128,
)

IDENTITY2 = np.eye(2, dtype=np.complex128)


def dag(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose on the last two axes."""
    return np.conj(np.swapaxes(x, -1, -2))


def comm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix commutator [x, y]."""
    return x @ y - y @ x


def det2(x: np.ndarray) -> np.ndarray:
    """Determinant of 2x2 blocks."""
    return x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0]


def trace(x: np.ndarray) -> np.ndarray:
    return x[..., 0, 0] + x[..., 1, 1]


def frob2(x: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm Tr(x x^dagger), real."""
    return np.einsum("...ij,...ij->...", x, np.conj(x)).real


def re_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Real pairing Re Tr(x y^dagger)."""
    return np.einsum("...ij,...ij->...", x, np.conj(y)).real


def project_traceless(x: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto trace-free matrices (sl(2,C) hygiene)."""
    return x - (trace(x) / 2.0)[..., None, None] * IDENTITY2


def project_su2(x: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto anti-hermitian trace-free matrices."""
    ah = 0.5 * (x - dag(x))
    return ah - (1j * trace(ah).imag / 2.0)[..., None, None] * IDENTITY2


def max_traceless_defect(x: np.ndarray) -> float:
    return float(np.max(np.abs(trace(x)))) if x.size else 0.0


def max_su2_defect(x: np.ndarray) -> float:
    """Largest entrywise deviation from anti-hermitian trace-free."""
    if not x.size:
        return 0.0
    herm = float(np.max(np.abs(x + dag(x))))
    return max(herm, max_traceless_defect(x))


def max_special_unitary_defect(u: np.ndarray) -> float:
    """Largest deviation from U^dagger U = I and det U = 1."""
    if not u.size:
        return 0.0
    gram = float(np.max(np.abs(dag(u) @ u - IDENTITY2)))
    det = float(np.max(np.abs(det2(u) - 1.0)))
    return max(gram, det)


def require_su2(x: np.ndarray, tol: float = 1e-10, what: str = "field") -> None:
    d = max_su2_defect(x)
    if d > tol:
        raise ValueError(f"{what} is not anti-hermitian trace-free: defect {d:.3e} > {tol:.1e}")


def require_special_unitary(u: np.ndarray, tol: float = 1e-10, what: str = "gauge") -> None:
    d = max_special_unitary_defect(u)
    if d > tol:
        raise ValueError(f"{what} is not special unitary: defect {d:.3e} > {tol:.1e}")


def commutator_bracket(phi: np.ndarray) -> np.ndarray:
    """[phi, phi^dagger]: hermitian, trace-free for trace-free phi."""
    return comm(phi, dag(phi))


def _require_traceless(m: np.ndarray, tol: float) -> None:
    scale = 1.0 + (float(np.max(np.sqrt(frob2(m)))) if m.size else 0.0)
    d = max_traceless_defect(m)
    if d > tol * scale:
        raise ValueError(f"matrix is not trace-free: |tr| = {d:.3e}")


def trace_free_identity_check(m: np.ndarray, tol: float = 1e-12):
    """Both sides of |[m, m^dagger]|^2 = 2 Tr((m m^dagger)^2) - 4 |det m|^2.

    Valid for trace-free 2x2 matrices; input with a nonzero trace is rejected.
    Returns (lhs, rhs) so the caller owns the assertion and its tolerance.
    """
    _require_traceless(m, tol)
    lhs = frob2(commutator_bracket(m))
    p = m @ dag(m)
    tr_p2 = np.einsum("...ij,...ji->...", p, p).real
    rhs = 2.0 * tr_p2 - 4.0 * np.abs(det2(m)) ** 2
    return lhs, rhs


def quartic_inequality_check(m: np.ndarray, tol: float = 1e-12):
    """Both sides of |m|^4 <= |[m, m^dagger]|^2 + 4 |det m|^2 (trace-free m).

    Equality holds exactly when the two singular values of m coincide.
    """
    _require_traceless(m, tol)
    lhs = frob2(m) ** 2
    rhs = frob2(commutator_bracket(m)) + 4.0 * np.abs(det2(m)) ** 2
    return lhs, rhs


def su2_exp(x: np.ndarray) -> np.ndarray:
    """Exponential of anti-hermitian trace-free x, in closed form.

    For such x, x^2 = -det(x) I with det(x) >= 0, so
    exp(x) = cos(r) I + (sin(r)/r) x with r = sqrt(det x).
    """
    require_su2(x, tol=1e-9, what="exponent")
    r = np.sqrt(np.maximum(det2(x).real, 0.0))
    return np.cos(r)[..., None, None] * IDENTITY2 + np.sinc(r / np.pi)[..., None, None] * x


def random_traceless(rng: np.random.Generator, shape=()) -> np.ndarray:
    """Trace-free complex matrices with entries uniform in the unit box."""
    z = rng.uniform(-1.0, 1.0, size=shape + (2, 2)) + 1j * rng.uniform(-1.0, 1.0, size=shape + (2, 2))
    return project_traceless(z)


def random_su2(rng: np.random.Generator, shape=(), scale: float = 1.0) -> np.ndarray:
    """Anti-hermitian trace-free matrices, coefficients uniform in [-scale, scale]."""
    coeff = rng.uniform(-scale, scale, size=shape + (3,))
    return np.einsum("...k,kij->...ij", coeff, SU2_BASIS)


def random_special_unitary(rng: np.random.Generator, shape=()) -> np.ndarray:
    return su2_exp(random_su2(rng, shape))
