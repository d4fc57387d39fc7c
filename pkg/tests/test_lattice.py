"""Ball geometry against a deliberately naive brute-force scan."""

import itertools

import numpy as np
import pytest

from dtil.lattice import (
    Ball,
    LatticeSpec,
    ball_integral,
    ball_mask,
    ball_sum_at_site,
    ball_sums_all_sites,
    full_ball,
    gather_by_shell,
    shell_distances,
    sites_in_ball,
    sites_within,
)


def brute_sites(n, h, center, radius):
    """Independent scan: python loop, min-image per axis via explicit min()."""
    period = n * h
    hits = []
    for site in itertools.product(range(n), repeat=6):
        d2 = 0.0
        for s, c in zip(site, center):
            d = abs(s * h - c) % period
            d = min(d, period - d)
            d2 += d * d
        if d2 <= radius * radius:
            hits.append(site)
    return hits


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(3, 1.0)
    with pytest.raises(ValueError):
        LatticeSpec(8, 0.0)
    with pytest.raises(ValueError):
        LatticeSpec(8, -1.0)
    spec = LatticeSpec(8, 0.5)
    assert spec.period == 4.0
    assert spec.half_period == 2.0
    assert spec.site_count == 8**6
    assert spec.dvol == 0.5**6


def test_wrap_and_position():
    spec = LatticeSpec(4, 0.25)
    assert spec.wrap((5, -1, 0, 4, 7, -5)) == (1, 3, 0, 0, 3, 3)
    assert spec.site_position((1, 0, 0, 0, 0, 2)) == (0.25, 0, 0, 0, 0, 0.5)


def test_ball_radius_bounds():
    spec = LatticeSpec(8, 1.0)
    with pytest.raises(ValueError):
        Ball((0.0,) * 6, 0.0)
    with pytest.raises(ValueError):
        Ball((0.0,) * 6, -1.0)
    too_big = Ball((0.0,) * 6, 4.5)
    with pytest.raises(ValueError):
        too_big.validate_against(spec)
    # the half-period itself is fine, wrap flag extends to the diameter
    ball_mask(spec, Ball((0.0,) * 6, 4.0))
    ball_mask(spec, Ball((0.0,) * 6, 4.5, allow_wrap=True))
    with pytest.raises(ValueError):
        ball_mask(spec, Ball((0.0,) * 6, 4.0 * np.sqrt(6.0) + 0.1, allow_wrap=True))


def test_known_site_counts_unit_lattice():
    # n=8, h=1, center at a site: radii strictly inside shell gaps
    spec = LatticeSpec(8, 1.0)
    center = (0.0,) * 6
    assert len(sites_in_ball(spec, Ball(center, 0.5))) == 1
    assert len(sites_in_ball(spec, Ball(center, 1.0))) == 13
    # d2 <= 2.25 catches the 60 two-axis neighbors as well
    assert len(sites_in_ball(spec, Ball(center, 1.5))) == 13 + 60


def test_sites_match_brute_force():
    spec = LatticeSpec(6, 0.75)
    rng = np.random.default_rng(7)
    d2s = shell_distances(spec)
    gaps = np.unique(d2s)
    for _ in range(4):
        center = tuple(rng.uniform(0.0, spec.period, size=6))
        # radius placed mid-gap so both codepaths see the same site set
        k = int(rng.integers(1, min(40, gaps.size - 1)))
        radius = float(np.sqrt(0.5 * (gaps[k] + gaps[k + 1])))
        radius = min(radius, spec.half_period)
        got = sites_in_ball(spec, Ball(center, radius))
        want = brute_sites(6, 0.75, center, radius)
        assert [tuple(s) for s in got] == want


def test_sites_lex_order_and_nesting():
    spec = LatticeSpec(8, 1.0)
    ball_small = Ball((1.0, 2.0, 3.0, 0.0, 4.0, 5.0), 1.9)
    ball_large = Ball(ball_small.center, 3.1)
    small = sites_in_ball(spec, ball_small)
    large = sites_in_ball(spec, ball_large)
    as_tuples = [tuple(s) for s in small]
    assert as_tuples == sorted(as_tuples)
    assert set(as_tuples) <= {tuple(s) for s in large}


def test_ball_integral_constant_and_brute():
    spec = LatticeSpec(8, 0.5)
    ones = np.ones(spec.shape)
    assert ball_integral(spec, ones, Ball((0.0,) * 6, 0.2)) == pytest.approx(spec.dvol)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(spec.shape)
    center = (0.3, 1.1, 2.0, 0.0, 3.9, 0.7)
    radius = 1.7
    want = sum(vals[s] for s in brute_sites(8, 0.5, center, radius)) * spec.dvol
    got = ball_integral(spec, vals, Ball(center, radius))
    assert got == pytest.approx(want, rel=1e-12)


def test_full_ball_covers_lattice():
    spec = LatticeSpec(4, 1.3)
    rng = np.random.default_rng(11)
    vals = rng.standard_normal(spec.shape)
    total = ball_integral(spec, vals, full_ball(spec, center=(0.1, 0, 0, 2.2, 0, 0)))
    assert total == pytest.approx(float(vals.sum()) * spec.dvol, rel=1e-12)
    assert len(sites_in_ball(spec, full_ball(spec))) == spec.site_count


def test_gather_translation_bitwise():
    spec = LatticeSpec(6, 1.0)
    rng = np.random.default_rng(5)
    vals = rng.standard_normal(spec.shape)
    center = (1, 4, 2, 0, 3, 5)
    shift = (3, 1, 0, 5, 2, 4)
    moved = np.roll(vals, shift, axis=tuple(range(6)))
    base = gather_by_shell(spec, vals, center)
    translated = gather_by_shell(spec, moved, tuple(c + s for c, s in zip(center, shift)))
    assert np.array_equal(base, translated)


def test_ball_sum_at_site_matches_masked_sum():
    spec = LatticeSpec(6, 0.5)
    rng = np.random.default_rng(9)
    vals = rng.standard_normal(spec.shape)
    for radius in (0.4, 0.9, 1.3, spec.half_period):
        direct = vals[ball_mask(spec, Ball((0.5, 1.0, 0.0, 2.0, 2.5, 1.5), radius))].sum()
        got = ball_sum_at_site(spec, vals, (1, 2, 0, 4, 5, 3), radius)
        assert got == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_sites_within_counts():
    spec = LatticeSpec(8, 1.0)
    assert sites_within(spec, 0.5) == 1
    assert sites_within(spec, 1.0) == 13
    assert sites_within(spec, full_ball(spec).radius) == spec.site_count


def test_fft_ball_sums_match_per_site():
    spec = LatticeSpec(4, 1.0)
    rng = np.random.default_rng(13)
    vals = rng.standard_normal(spec.shape)
    radius = 1.2
    scan = ball_sums_all_sites(spec, vals, radius)
    for site in [(0, 0, 0, 0, 0, 0), (1, 2, 3, 0, 1, 2), (3, 3, 3, 3, 3, 3)]:
        want = ball_sum_at_site(spec, vals, site, radius)
        assert scan[site] == pytest.approx(want, rel=1e-10, abs=1e-12)
    with pytest.raises(ValueError):
        ball_sums_all_sites(spec, vals, spec.half_period * 1.5)
