"""Lattice laboratory for SU(2) Donaldson-Thomas gauge theory on a flat 6-torus.

The torus T^6 = R^6 / (period Z)^6 carries the flat Kahler structure in which
real axes pair into complex coordinates z^a = x^{2a-1} + i x^{2a}.  On it we
discretize an SU(2) connection A and an sl(2,C)-valued Higgs coefficient phi
(the coefficient of a (0,3)-form), evaluate the Donaldson-Thomas residuals and
the associated energy, run gradient descent, and apply the local analysis used
in compactness arguments: epsilon-regularity scans, rescaled ball-energy
monotonicity, concentration detection along sequences, and blow-up resampling.

Everything is deterministic: fixed-seed randomness, fixed reduction orders, and
bitwise-stable serialization.
"""

from .lattice import Ball, LatticeSpec
from .fields import FieldState

__all__ = ["Ball", "LatticeSpec", "FieldState"]

__version__ = "0.1.0"
