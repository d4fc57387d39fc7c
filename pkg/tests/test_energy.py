"""Energy functional: frozen values, density bookkeeping, FD gradient oracle."""

import numpy as np
import pytest

from dtil.energy import density, energy, energy_gradient, local_energy
from dtil.fields import FieldState, apply_gauge, translate_state
from dtil.lattice import Ball, LatticeSpec
from dtil.operators import RPAIRS, central_diff
from dtil.su2 import (
    SU2_BASIS,
    comm,
    dag,
    random_special_unitary,
    random_su2,
    random_traceless,
    su2_exp,
)

SPEC = LatticeSpec(4, 0.9)
RAISING = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def random_state(seed=0, scale=0.4, spec=SPEC):
    rng = np.random.default_rng(seed)
    A = random_su2(rng, (6,) + spec.shape, scale)
    phi = scale * random_traceless(rng, spec.shape)
    return FieldState(spec, A, phi)


def const_phi_state(matrix, spec=SPEC):
    state = FieldState.zeros(spec)
    state.phi[:] = matrix
    return state


def test_zero_state():
    br = energy(FieldState.zeros(SPEC))
    assert br.total == 0.0
    assert br.curvature_term == 0.0
    assert br.codifferential_term == 0.0
    assert br.bracket_term == 0.0
    assert br.det_integral == 0.0
    assert np.max(np.abs(density(FieldState.zeros(SPEC)))) == 0.0


def test_constant_normal_higgs_frozen():
    # phi = c diag(1,-1): commutes with its adjoint, constant, flat: L = 0,
    # while the determinant integral is Vol |c|^4 exactly
    c = 0.7 + 0.2j
    state = const_phi_state(c * np.diag([1.0, -1.0]))
    br = energy(state)
    assert br.total <= 1e-25  # rounding dust from the cancelling bracket
    assert br.det_integral == pytest.approx(SPEC.volume * abs(c) ** 4, rel=1e-12)


def test_constant_nilpotent_higgs_frozen():
    # phi = c E+: only the bracket term survives, |[phi, phi^dagger]|^2 = 2 |c|^4,
    # so L = (1/2) Vol 2 |c|^4 = Vol |c|^4
    c = 0.8 - 0.3j
    state = const_phi_state(c * RAISING)
    br = energy(state)
    want = SPEC.volume * abs(c) ** 4
    assert br.curvature_term == 0.0
    assert br.codifferential_term == 0.0
    assert br.bracket_term == pytest.approx(want, rel=1e-12)
    assert br.total == pytest.approx(want, rel=1e-12)
    # det of a nilpotent vanishes
    assert br.det_integral == 0.0


def test_density_sums_to_twice_energy():
    state = random_state(11)
    br = energy(state)
    dens = density(state)
    assert np.all(dens >= 0.0)
    total = float(dens.sum()) * SPEC.dvol
    assert total == pytest.approx(2.0 * br.total, rel=1e-12)


def test_density_translation_exact():
    state = random_state(12)
    t = (2, 0, 1, 3, 1, 0)
    moved = translate_state(state, t)
    rolled = np.roll(density(state), t, axis=tuple(range(6)))
    assert np.array_equal(density(moved), rolled)


def test_det_integral_oracle():
    state = random_state(13)
    br = energy(state)
    dets = np.linalg.det(state.phi.reshape(-1, 2, 2))
    want = float(np.sum(np.abs(dets) ** 2)) * SPEC.dvol
    assert br.det_integral == pytest.approx(want, rel=1e-10)


def test_local_energy_matches_ball_integral():
    state = random_state(14)
    dens = density(state)
    ball = Ball((0.0, 0.9, 1.8, 0.0, 0.9, 0.0), 1.1)
    from dtil.lattice import ball_integral

    want1 = ball_integral(SPEC, dens, ball)
    want32 = ball_integral(SPEC, dens**1.5, ball)
    assert local_energy(state, ball, 1.0) == pytest.approx(want1, rel=1e-12)
    assert local_energy(state, ball, 1.5) == pytest.approx(want32, rel=1e-12)
    assert local_energy(state, ball, 1.5, dens=dens) == pytest.approx(want32, rel=1e-12)
    with pytest.raises(ValueError):
        local_energy(state, ball, 2.0)


def test_energy_constant_gauge_invariant():
    state = random_state(15)
    rng = np.random.default_rng(16)
    sigma = np.broadcast_to(random_special_unitary(rng), SPEC.shape + (2, 2)).copy()
    rotated = apply_gauge(sigma, state)
    e0, e1 = energy(state), energy(rotated)
    assert e1.total == pytest.approx(e0.total, rel=1e-12)
    assert e1.curvature_term == pytest.approx(e0.curvature_term, rel=1e-12)
    assert e1.codifferential_term == pytest.approx(e0.codifferential_term, rel=1e-12, abs=1e-15)
    assert e1.bracket_term == pytest.approx(e0.bracket_term, rel=1e-12, abs=1e-15)


def _mode_connection_and_gauge(n, period=4.0, amp=0.3):
    """The same smooth connection and gauge field sampled at resolution n."""
    spec = LatticeSpec(n, period / n)
    x = spec.spacing * np.arange(n)
    acc = np.zeros(spec.shape)
    for mu in range(6):
        k = [1, -1, 0, 1, 0, 1][mu]
        acc = acc + (2 * np.pi * k / period * x).reshape((1,) * mu + (n,) + (1,) * (5 - mu))
    prof1, prof2 = np.sin(acc), np.cos(acc + 0.4)
    A = np.zeros((6,) + spec.shape + (2, 2), dtype=complex)
    for mu in range(6):
        A[mu] = (amp * (prof1 if mu % 2 else prof2))[..., None, None] * SU2_BASIS[mu % 3]
    state = FieldState(spec, A, np.zeros(spec.shape + (2, 2), dtype=complex))
    xi = (0.3 * prof1)[..., None, None] * SU2_BASIS[1]
    return state, su2_exp(xi)


def test_smooth_gauge_covariance_second_order():
    # the central-difference gauge action is covariant up to an O(h^2) defect:
    # F(A^sigma) approaches sigma F(A) sigma^dag at second order, and the
    # energy drift of the gauged state stays bounded accordingly
    defects, drifts = [], []
    for n in (5, 10):
        state, sigma = _mode_connection_and_gauge(n)
        gauged = apply_gauge(sigma, state)
        # component-at-a-time keeps the n=10 working set modest
        worst, scale = 0.0, 0.0
        h = state.spec.spacing
        for mu, nu in RPAIRS:
            Fk = (
                central_diff(state.A[nu], mu, h)
                - central_diff(state.A[mu], nu, h)
                + comm(state.A[mu], state.A[nu])
            )
            Fgk = (
                central_diff(gauged.A[nu], mu, h)
                - central_diff(gauged.A[mu], nu, h)
                + comm(gauged.A[mu], gauged.A[nu])
            )
            worst = max(worst, np.max(np.abs(Fgk - sigma @ Fk @ dag(sigma))))
            scale = max(scale, np.max(np.abs(Fk)))
        defects.append(worst / scale)
        drifts.append(abs(energy(gauged).total - energy(state).total) / energy(state).total)
    order = np.log2(defects[0] / defects[1])
    assert 1.7 <= order <= 2.3
    assert drifts[1] < 0.05


def test_gradient_zero_state():
    g = energy_gradient(FieldState.zeros(SPEC))
    assert g.norm(SPEC) == 0.0


def test_gradient_matches_finite_differences():
    state = random_state(17, scale=0.3)
    g = energy_gradient(state)
    rng = np.random.default_rng(18)
    t = 1e-5
    for _ in range(20):
        dA = random_su2(rng, (6,) + SPEC.shape, 1.0)
        dphi = random_traceless(rng, SPEC.shape)
        dA /= np.sqrt(np.sum(np.abs(dA) ** 2))
        dphi /= np.sqrt(np.sum(np.abs(dphi) ** 2))
        plus = FieldState(SPEC, state.A + t * dA, state.phi + t * dphi)
        minus = FieldState(SPEC, state.A - t * dA, state.phi - t * dphi)
        fd = (energy(plus).total - energy(minus).total) / (2.0 * t)
        pair = SPEC.dvol * (np.vdot(dA, g.grad_a).real + np.vdot(dphi, g.grad_phi).real)
        assert abs(fd - pair) <= 1e-6 * (1.0 + abs(fd))


def test_gradient_lands_in_the_right_algebra():
    state = random_state(19)
    g = energy_gradient(state)
    from dtil.su2 import max_su2_defect, max_traceless_defect

    assert max_su2_defect(g.grad_a) <= 1e-12
    assert max_traceless_defect(g.grad_phi) <= 1e-12
    # norm follows the h^6 pairing
    want = np.sqrt(SPEC.dvol * (np.sum(np.abs(g.grad_a) ** 2) + np.sum(np.abs(g.grad_phi) ** 2)))
    assert g.norm(SPEC) == pytest.approx(float(want), rel=1e-12)


def test_gradient_constant_gauge_equivariant():
    state = random_state(20)
    rng = np.random.default_rng(21)
    s0 = random_special_unitary(rng)
    sigma = np.broadcast_to(s0, SPEC.shape + (2, 2)).copy()
    g = energy_gradient(state)
    g_rot = energy_gradient(apply_gauge(sigma, state))
    assert np.max(np.abs(g_rot.grad_a - s0 @ g.grad_a @ dag(s0))) <= 1e-12
    assert np.max(np.abs(g_rot.grad_phi - s0 @ g.grad_phi @ dag(s0))) <= 1e-12
    assert g_rot.norm(SPEC) == pytest.approx(g.norm(SPEC), rel=1e-12)
