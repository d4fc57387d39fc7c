"""Descent flow, Coulomb fixing, seeded initial data, resolution transfer."""

import numpy as np
import pytest

from dtil.energy import energy
from dtil.fields import FieldState, apply_gauge
from dtil.lattice import LatticeSpec
from dtil.solve import (
    FlowConfig,
    TRACE_COLUMNS,
    band_limited_connection,
    band_limited_higgs,
    band_modes,
    coulomb_fix,
    divergence_norm,
    minimize,
    prolong_state,
    random_band_limited_state,
    trig_resample,
)
from dtil.su2 import IDENTITY2, frob2, max_su2_defect, max_traceless_defect, random_su2, random_special_unitary, su2_exp

SPEC = LatticeSpec(4, 1.0)


def l2_norm(field, spec):
    return float(np.sqrt(spec.dvol * np.add.reduce(frob2(field), axis=None)))


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(step_size=0.0)
    with pytest.raises(ValueError):
        FlowConfig(backtracking=1.0)
    with pytest.raises(ValueError):
        FlowConfig(backtracking=0.0)
    with pytest.raises(ValueError):
        FlowConfig(max_steps=-1)
    with pytest.raises(ValueError):
        FlowConfig(grad_tol=-1e-3)


def test_minimize_zero_state_returns_immediately():
    out, trace = minimize(FieldState.zeros(SPEC), FlowConfig(max_steps=50))
    assert trace.status == "converged"
    assert len(trace.rows) == 1
    assert trace.rows[0][1] == 0.0
    assert not out.A.any() and not out.phi.any()


def test_minimize_constant_normal_higgs_is_critical():
    state = FieldState.zeros(SPEC)
    state.phi[...] = 0.35 * np.diag([1.0, -1.0])
    out, trace = minimize(state, FlowConfig(max_steps=50))
    # every term of the action is critical there: zero gradient, zero steps
    assert trace.status == "converged"
    assert len(trace.rows) == 1
    assert trace.rows[0][5] == 0.0
    assert np.array_equal(out.phi, state.phi)


def test_minimize_flat_basin_recovery():
    state = random_band_limited_state(SPEC, 1e-2, seed=3)
    out, trace = minimize(state, FlowConfig(step_size=0.25, max_steps=200, grad_tol=1e-8))
    L = trace.L
    assert trace.status == "converged"
    assert all(b < a for a, b in zip(L, L[1:]))
    assert L[-1] <= 1e-8 * L[0]
    assert trace.rows[-1][6] <= 1e-4 and trace.rows[-1][7] <= 1e-4
    assert out.spec is SPEC


def test_minimize_trace_csv_shape_and_determinism():
    state = random_band_limited_state(SPEC, 5e-2, seed=4)
    cfg = FlowConfig(step_size=0.25, max_steps=12, grad_tol=1e-12)
    _, t1 = minimize(state, cfg)
    _, t2 = minimize(state.copy(), cfg)
    text = t1.csv_text()
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == len(t1.rows) + 1
    assert all(len(row) == len(TRACE_COLUMNS) for row in t1.rows)
    assert text == t2.csv_text()


def test_minimize_constant_gauge_equivariance():
    state = random_band_limited_state(SPEC, 5e-2, seed=5, higgs_amplitude=3e-2)
    sigma = np.broadcast_to(random_special_unitary(np.random.default_rng(6)), SPEC.shape + (2, 2)).copy()
    cfg = FlowConfig(step_size=0.25, max_steps=25, grad_tol=1e-4)
    _, ta = minimize(state, cfg)
    _, tb = minimize(apply_gauge(sigma, state), cfg)
    assert ta.status == tb.status
    assert len(ta.rows) == len(tb.rows)
    for ra, rb in zip(ta.rows, tb.rows):
        assert abs(ra[1] - rb[1]) <= 1e-12 * (1.0 + abs(ra[1]))


def test_minimize_stall_reports_partial_trace():
    state = random_band_limited_state(SPEC, 5e-2, seed=7)
    # a subnormal trial step cannot change the state, so no strict decrease
    # is ever observed and the line search underflows immediately
    out, trace = minimize(state, FlowConfig(step_size=1e-300, max_steps=10, grad_tol=0.0))
    assert trace.status == "stalled"
    assert len(trace.rows) == 1
    assert np.array_equal(out.A, state.A)


def test_coulomb_zero_connection_is_fixed_point():
    res = coulomb_fix(FieldState.zeros(SPEC), tol=1e-12, max_iters=10)
    assert res.final_norm == 0.0
    assert np.array_equal(res.transform, np.broadcast_to(IDENTITY2, SPEC.shape + (2, 2)))
    assert not res.state.A.any()


def test_coulomb_recovers_pure_gauge():
    xi0 = band_limited_connection(SPEC, 0.05, seed=11)[0]
    pure = apply_gauge(su2_exp(xi0), FieldState.zeros(SPEC))
    res = coulomb_fix(pure, tol=1e-12, max_iters=50)
    assert res.final_norm <= 1e-12
    # the minimizing representative is near flat; quadratic remainder only
    assert l2_norm(res.state.A, SPEC) <= 0.01 * l2_norm(pure.A, SPEC)
    res.state.validate()


def test_coulomb_reduces_rough_divergence():
    rng = np.random.default_rng(21)
    A = random_su2(rng, (6,) + SPEC.shape, 0.05)
    rough = FieldState(SPEC, A, np.zeros(SPEC.shape + (2, 2), dtype=complex))
    n0 = divergence_norm(A, SPEC)
    res = coulomb_fix(rough, tol=n0 / 2000.0, max_iters=500)
    assert res.final_norm <= n0 / 1000.0
    drift = abs(energy(res.state).total - energy(rough).total) / energy(rough).total
    assert drift <= 0.01


def test_band_modes_halved_and_nonzero():
    modes = band_modes(1)
    assert len(modes) == (3**6 - 1) // 2
    as_set = set(modes)
    for k in modes:
        assert any(k)
        assert tuple(-c for c in k) not in as_set
    with pytest.raises(ValueError):
        band_modes(0)


def test_band_limited_connection_properties():
    A = band_limited_connection(SPEC, 0.1, seed=9)
    B = band_limited_connection(SPEC, 0.1, seed=9)
    assert np.array_equal(A, B)
    assert max_su2_defect(A) <= 1e-14
    scale = l2_norm(A, SPEC)
    assert divergence_norm(A, SPEC) <= 1e-13 * scale
    hat = np.fft.fftn(A, axes=tuple(range(1, 7)))
    inband = np.array([True, True, False, True])  # bins k = 0, 1, -1 of n = 4
    m6 = np.ones(SPEC.shape, dtype=bool)
    for mu in range(6):
        m6 &= inband.reshape((1,) * mu + (4,) + (1,) * (5 - mu))
    assert np.max(np.abs(hat[:, ~m6])) <= 1e-12 * np.max(np.abs(hat))
    with pytest.raises(ValueError):
        band_limited_connection(SPEC, 0.1, seed=9, kmax=2)


def test_band_limited_higgs_properties():
    p = band_limited_higgs(SPEC, 0.1, seed=10)
    q = band_limited_higgs(SPEC, 0.1, seed=10)
    assert np.array_equal(p, q)
    assert max_traceless_defect(p) <= 1e-14
    assert np.max(np.abs(p.imag)) > 0.0  # genuinely complex coefficients


def test_random_band_limited_state_flags():
    s0 = random_band_limited_state(SPEC, 0.1, seed=12)
    assert not s0.phi.any()
    s1 = random_band_limited_state(SPEC, 0.1, seed=12, higgs_amplitude=0.05)
    assert np.array_equal(s0.A, s1.A)
    assert s1.phi.any()
    s1.validate()


def test_trig_resample_exact_below_nyquist():
    def sample(n):
        x = 2.0 * np.pi * np.arange(n) / n
        f = np.zeros((n,) * 6, dtype=complex)
        f += np.cos(x).reshape((n,) + (1,) * 5)
        f += 0.5 * np.sin(x).reshape((1, 1) + (n,) + (1,) * 3)
        return f

    got = trig_resample(sample(4), 4, 8)
    assert np.max(np.abs(got - sample(8))) <= 1e-12


def test_trig_resample_nyquist_cosine_and_identity():
    x4 = np.arange(4, dtype=float)
    f = (np.cos(np.pi * x4).reshape(4, 1, 1, 1, 1, 1) * np.ones((1, 4, 4, 4, 4, 4))).astype(complex)
    got = trig_resample(f, 4, 8)
    x8 = 0.5 * np.arange(8)
    want = np.cos(np.pi * x8).reshape(8, 1, 1, 1, 1, 1) * np.ones((1, 8, 8, 8, 8, 8))
    assert np.max(np.abs(got - want)) <= 1e-12
    same = trig_resample(f, 4, 4)
    assert np.max(np.abs(same - f)) <= 1e-12
    with pytest.raises(ValueError):
        trig_resample(f, 4, 3)


def test_prolong_state_coincident_sites():
    state = random_band_limited_state(SPEC, 0.2, seed=13, higgs_amplitude=0.1)
    fine = prolong_state(state, 8)
    fine.validate()
    assert fine.spec.n_per_axis == 8
    assert abs(fine.spec.period - SPEC.period) <= 1e-15
    sub = fine.A[:, ::2, ::2, ::2, ::2, ::2, ::2]
    assert np.max(np.abs(sub - state.A)) <= 1e-12
    assert np.max(np.abs(fine.phi[::2, ::2, ::2, ::2, ::2, ::2] - state.phi)) <= 1e-12
    with pytest.raises(ValueError):
        prolong_state(fine, 4)
