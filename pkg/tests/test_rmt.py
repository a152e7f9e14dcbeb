import numpy as np
import pytest
import scipy.integrate
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from gridspectra.errors import ValidationError
from gridspectra.rmt import (
    EmpiricalNull,
    _permuted_pair,
    denoise,
    esd,
    mp_density,
    mp_point_mass,
    mp_support,
    permutation_gsv_null,
    significant_eigs,
    simulate_gsv_null,
    simulate_sv_null,
    spectral_summary,
)
from gridspectra.linalg import gsvd
from gridspectra.util import rng_for


# ---------------------------------------------------------------------------
# esd


def test_esd_half_mass():
    assert esd([0.5, 1.5], 1.0) == 0.5


def test_esd_range():
    eigs = [0.2, 0.7, 1.1]
    assert esd(eigs, 0.1) == 0.0
    assert esd(eigs, 1.1) == 1.0


def test_esd_matches_counting_loop(rng):
    eigs = rng.normal(size=20)
    probes = rng.uniform(-3, 3, size=100)
    for x in probes:
        brute = sum(1 for e in eigs if e <= x) / len(eigs)
        assert esd(eigs, float(x)) == brute


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_esd_is_right_continuous_step_function(eigs):
    values = esd(eigs, np.sort(np.asarray(eigs)))
    assert np.all(np.diff(values) >= 0)
    assert values[-1] == 1.0
    grid = np.linspace(min(eigs) - 1, max(eigs) + 1, 37)
    steps = esd(eigs, grid)
    assert np.all((0 <= steps) & (steps <= 1))
    assert np.all(np.diff(steps) >= 0)


# ---------------------------------------------------------------------------
# MP law


def test_mp_support_reference_value():
    lo, hi = mp_support(0.767123)
    assert round(hi, 3) == 3.519
    assert round(lo, 4) == 0.0154


def test_mp_support_square_case():
    assert mp_support(1.0) == (0.0, 4.0)


def test_mp_support_small_aspect_limit():
    lo, hi = mp_support(1e-12)
    assert abs(lo - 1.0) < 1e-5
    assert abs(hi - 1.0) < 1e-5


def test_mp_support_rejects_non_positive():
    with pytest.raises(ValidationError):
        mp_support(0.0)


def test_mp_support_brackets_one():
    # (1 - sqrt(y))**2 <= 1 holds exactly for y in (0, 4]
    for y in (0.01, 0.5, 1.0, 2.0, 4.0):
        lo, hi = mp_support(y)
        assert lo <= 1.0 <= hi


def test_mp_density_zero_at_edges():
    for y in (0.5, 1.0, 2.0):
        lo, hi = mp_support(y)
        for kind in ("raw", "normalized"):
            assert mp_density(lo, y, kind=kind) == 0.0
            assert mp_density(hi, y, kind=kind) == 0.0
    assert mp_density(10.0, 0.5, kind="raw") == 0.0


def test_mp_raw_density_integrates_to_aspect_ratio():
    # adaptive quadrature oracle; at y = 1 the raw-formula mass is 1
    total, _err = scipy.integrate.quad(lambda x: mp_density(x, 1.0, kind="raw"), 0.0, 4.0)
    assert abs(total - 1.0) < 1e-8
    total_half, _err = scipy.integrate.quad(
        lambda x: mp_density(x, 0.5, kind="raw"), *mp_support(0.5))
    assert abs(total_half - 0.5) < 1e-8


def test_mp_normalized_density_plus_point_mass_is_one():
    for y in (0.25, 1.0, 2.0):
        lo, hi = mp_support(y)
        total, _err = scipy.integrate.quad(
            lambda x: mp_density(x, y, kind="normalized"), lo, hi, limit=200)
        assert abs(total + mp_point_mass(y) - 1.0) < 1e-6


def test_mp_point_mass_values():
    assert mp_point_mass(2.0) == 0.5
    assert mp_point_mass(0.5) == 0.0


# ---------------------------------------------------------------------------
# significance and denoising


def test_no_significant_when_all_inside():
    summary = spectral_summary(np.ones(6), n_obs=12, p_dim=6)
    assert summary.significant_count == 0


def test_planted_spike_detected(rng):
    eigs = np.concatenate([[8.0], np.ones(9)])
    summary = spectral_summary(eigs, n_obs=40, p_dim=10)
    idx = significant_eigs(summary)
    assert 0 in idx.tolist()
    assert summary.significant_count >= 1


def test_denoise_retain_all_reconstructs(rng):
    x = rng.normal(size=(30, 5))
    r = np.corrcoef(x.T)
    out = denoise(r, np.arange(5))
    assert np.abs(out - r).max() < 1e-8


def test_denoise_retain_none_gives_zero(rng):
    r = np.corrcoef(rng.normal(size=(30, 4)).T)
    assert np.abs(denoise(r, np.array([], dtype=int))).max() == 0.0


def test_denoise_top_component_of_2x2():
    r = np.array([[1.0, 0.9], [0.9, 1.0]])
    # top eigenpair by hand: lambda = 1.9, e = (1, 1)/sqrt(2)
    out = denoise(r, [0])
    assert np.abs(out - 0.95 * np.ones((2, 2))).max() < 1e-12


def test_denoise_is_stable_under_re_denoising(rng):
    x = rng.normal(size=(50, 6))
    r = np.corrcoef(x.T)
    once = denoise(r, np.arange(3))
    twice = denoise(once, np.arange(3))
    assert np.abs(once - twice).max() < 1e-8


# ---------------------------------------------------------------------------
# simulated singular-value null


def test_sv_null_deterministic():
    a = simulate_sv_null(20, 4, reps=5, seed=7)
    b = simulate_sv_null(20, 4, reps=5, seed=7)
    assert np.array_equal(a.samples, b.samples)


def test_sv_null_half_normal_mean():
    null = simulate_sv_null(1, 1, reps=4000, seed=3)
    # |N(0,1)| has mean sqrt(2/pi) and variance 1 - 2/pi
    expected = np.sqrt(2 / np.pi)
    se = np.sqrt((1 - 2 / np.pi) / null.pooled.size)
    assert abs(null.pooled.mean() - expected) < 3 * se


def test_sv_null_edges_match_mp_support():
    n, p = 365, 40
    null = simulate_sv_null(n, p, reps=200, seed=11)
    lo, hi = mp_support(p / n)
    top = null.pooled.max() / np.sqrt(n)
    bottom = null.pooled.min() / np.sqrt(n)
    assert abs(top - np.sqrt(hi)) < 0.1 * np.sqrt(hi)
    assert abs(bottom - np.sqrt(lo)) < 0.1 * np.sqrt(lo)


def test_sv_null_critical_values_are_pool_members():
    null = simulate_sv_null(15, 3, reps=20, seed=5)
    pool = set(null.pooled.tolist())
    assert null.lower in pool
    assert null.upper in pool
    assert null.lower <= null.upper


def test_sv_null_threads_do_not_change_result():
    a = simulate_sv_null(25, 5, reps=8, seed=2, threads=1)
    b = simulate_sv_null(25, 5, reps=8, seed=2, threads=3)
    assert np.array_equal(a.samples, b.samples)


def test_sv_null_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        simulate_sv_null(3, 5, reps=2, seed=0)


# ---------------------------------------------------------------------------
# simulated GSV null


def test_gsv_null_deterministic():
    a = simulate_gsv_null(12, 11, 4, reps=6, seed=9)
    b = simulate_gsv_null(12, 11, 4, reps=6, seed=9)
    assert np.array_equal(a.samples, b.samples)


def test_gsv_null_log_median_near_zero_for_equal_shapes():
    null = simulate_gsv_null(30, 30, 5, reps=400, seed=21)
    logs = np.log(null.pooled)
    # swapping the matrix roles negates log-gsv, so the null is symmetric
    se = logs.std() / np.sqrt(null.reps)
    assert abs(np.median(logs)) < 4 * se + 0.02


def test_gsv_null_quantiles_monotone():
    null = simulate_gsv_null(36, 35, 6, reps=50, seed=4)
    qs = np.quantile(null.pooled, np.linspace(0, 1, 11))
    assert np.all(np.diff(qs) >= 0)


# ---------------------------------------------------------------------------
# permutation GSV null


def test_identity_permutation_replicate_matches_original(rng):
    d1 = rng.normal(size=(12, 3))
    d2 = rng.normal(size=(11, 3))
    id1 = [np.arange(12)] * 3
    id2 = [np.arange(11)] * 3
    p1, p2 = _permuted_pair(d1, d2, id1, id2, scheme="columns")
    assert np.array_equal(p1, d1) and np.array_equal(p2, d2)
    assert np.allclose(gsvd(p1, p2).gsv, gsvd(d1, d2).gsv)


def test_row_schemes_leave_gsv_unchanged(rng):
    # whole-row permutations cannot move the Gram matrices
    d1 = rng.normal(size=(10, 3))
    d2 = rng.normal(size=(9, 3))
    base = gsvd(d1, d2).gsv
    null = permutation_gsv_null(d1, d2, reps=4, seed=1, scheme="rows")
    for rep in range(4):
        assert np.abs(np.sort(null.samples[rep]) - np.sort(base)).max() < 1e-8


def test_permutation_null_deterministic(rng):
    d1 = rng.normal(size=(10, 3))
    d2 = rng.normal(size=(9, 3))
    a = permutation_gsv_null(d1, d2, reps=5, seed=3)
    b = permutation_gsv_null(d1, d2, reps=5, seed=3)
    assert np.array_equal(a.samples, b.samples)


def test_permutation_vs_simulation_ks_distance():
    # on iid noise the column-permutation null should match the simulation null
    gen = rng_for(99)
    d1 = gen.standard_normal((60, 8))
    d2 = gen.standard_normal((59, 8))
    perm = permutation_gsv_null(d1, d2, reps=150, seed=5)
    sim = simulate_gsv_null(60, 59, 8, reps=150, seed=6)
    stat = scipy.stats.ks_2samp(perm.pooled, sim.pooled).statistic
    assert stat < 0.08


def test_permutation_null_shape_guard(rng):
    with pytest.raises(ValidationError):
        permutation_gsv_null(rng.normal(size=(2, 3)), rng.normal(size=(5, 3)),
                             reps=2, seed=0)


# ---------------------------------------------------------------------------
# empirical null container


def test_empirical_null_validates_kind(rng):
    with pytest.raises(ValidationError):
        EmpiricalNull(kind="bogus", dims=(2, 2), reps=1, seed=0, level=0.05,
                      samples=rng.normal(size=(1, 2)))


def test_critical_values_cover_requested_level():
    null = simulate_sv_null(50, 5, reps=100, seed=13)
    lo, hi = null.critical_values(0.10)
    inside = np.mean((null.pooled >= lo) & (null.pooled <= hi))
    assert inside >= 0.90
