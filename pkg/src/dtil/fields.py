"""Field containers and the gauge group action.

A state is a pair (A, phi): six anti-hermitian trace-free connection
components and one trace-free complex Higgs coefficient, all sampled on the
n^6 lattice.  Arrays are complex128 with site axes just before the trailing
matrix axes; the connection carries its component axis first.

Gauge transformations act by

    A_mu -> sigma A_mu sigma^dagger - (D_mu sigma) sigma^dagger
    phi  -> sigma phi sigma^dagger

with D_mu the centered difference.  For constant sigma this is exact
conjugation and every gauge-covariant quantity transforms exactly; for
site-dependent sigma the discrete chain rule is O(h^2), so the transformed
connection is projected back onto su(2) (the defect it removes is itself
O(h^2) and vanishes for constant sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec
from .operators import central_diff
from .su2 import dag, max_su2_defect, max_traceless_defect, project_su2, require_special_unitary


@dataclass
class FieldState:
    """Connection components A (6, n^6, 2, 2) and Higgs coefficient phi (n^6, 2, 2)."""

    spec: LatticeSpec
    A: np.ndarray
    phi: np.ndarray

    def validate(self, tol: float = 1e-10) -> None:
        want_a = (6,) + self.spec.shape + (2, 2)
        want_p = self.spec.shape + (2, 2)
        if self.A.shape != want_a:
            raise ValueError(f"connection shape {self.A.shape}, expected {want_a}")
        if self.phi.shape != want_p:
            raise ValueError(f"higgs shape {self.phi.shape}, expected {want_p}")
        defect = max_su2_defect(self.A)
        if defect > tol:
            raise ValueError(f"connection not anti-hermitian trace-free: defect {defect:.3e}")
        tdef = max_traceless_defect(self.phi)
        if tdef > tol * (1.0 + float(np.max(np.abs(self.phi)))):
            raise ValueError(f"higgs not trace-free: defect {tdef:.3e}")

    def copy(self) -> "FieldState":
        return FieldState(self.spec, self.A.copy(), self.phi.copy())

    @classmethod
    def zeros(cls, spec: LatticeSpec) -> "FieldState":
        return cls(
            spec,
            np.zeros((6,) + spec.shape + (2, 2), dtype=np.complex128),
            np.zeros(spec.shape + (2, 2), dtype=np.complex128),
        )


def apply_gauge(sigma: np.ndarray, state: FieldState, tol: float = 1e-10) -> FieldState:
    """Act by a special-unitary site field sigma; rejects non-unitary input."""
    spec = state.spec
    if sigma.shape != spec.shape + (2, 2):
        raise ValueError(f"gauge field shape {sigma.shape}, expected {spec.shape + (2, 2)}")
    require_special_unitary(sigma, tol=tol)
    sd = dag(sigma)
    new_a = np.empty_like(state.A)
    for mu in range(6):
        rotated = sigma @ state.A[mu] @ sd - central_diff(sigma, mu, spec.spacing) @ sd
        new_a[mu] = project_su2(rotated)
    new_phi = sigma @ state.phi @ sd
    return FieldState(spec, new_a, new_phi)


def translate_state(state: FieldState, shift) -> FieldState:
    """Shift a state by an integer lattice vector (site i picks up value at i - t)."""
    t = [int(s) for s in shift]
    if len(t) != 6:
        raise ValueError("shift must have 6 integer components")
    a_axes = tuple(range(1, 7))
    p_axes = tuple(range(6))
    return FieldState(
        state.spec,
        np.roll(state.A, t, axis=a_axes),
        np.roll(state.phi, t, axis=p_axes),
    )
