import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridspectra.detrend import (
    acf,
    build_T,
    classical_decompose,
    cumulative_share,
    seasonal_day_index,
    trim_svd,
    trim_sweep,
)
from gridspectra.errors import ValidationError
from gridspectra.ingest import build_calendar
from gridspectra.linalg import svd

from conftest import make_panel


# ---------------------------------------------------------------------------
# trim_svd


def test_exact_rank_k_panel_trims_to_zero(rng):
    u = rng.normal(size=(60, 3))
    v = rng.normal(size=(8, 3))
    panel = make_panel(u @ v.T)
    trimmed, report = trim_svd(panel, 3)
    assert np.abs(trimmed.values).max() <= 1e-8 * np.abs(panel.values).max()
    assert report.cumulative_share > 0.999999


def test_full_trim_gives_zero(rng):
    panel = make_panel(rng.normal(size=(20, 5)))
    trimmed, _ = trim_svd(panel, 5)
    assert np.abs(trimmed.values).max() < 1e-10 * np.abs(panel.values).max()


def test_k_zero_disallowed(rng):
    panel = make_panel(rng.normal(size=(10, 4)))
    with pytest.raises(ValidationError):
        trim_svd(panel, 0)
    with pytest.raises(ValidationError):
        trim_svd(panel, 5)


def test_spectrum_shift(rng):
    panel = make_panel(rng.normal(size=(80, 12)))
    k = 4
    trimmed, _ = trim_svd(panel, k)
    s_before = svd(panel.values).s
    s_after = svd(trimmed.values).s
    keep = 12 - k
    rel = np.abs(s_after[:keep] - s_before[k:]) / s_before[k:]
    assert rel.max() < 1e-8


def test_trimmed_panel_orthogonal_to_removed_subspace(rng):
    panel = make_panel(rng.normal(size=(50, 8)))
    k = 3
    trimmed, _ = trim_svd(panel, k)
    f = svd(panel.values)
    proj = f.u[:, :k].T @ trimmed.values
    assert np.abs(proj).max() <= 1e-8 * np.abs(panel.values).max()


# ---------------------------------------------------------------------------
# cumulative share


def test_equal_singular_values_share():
    f = svd(np.eye(6))
    assert abs(cumulative_share(f, 3) - 0.5) < 1e-12


def test_share_reaches_one():
    f = svd(np.diag([3.0, 2.0, 1.0]))
    assert cumulative_share(f, 3) == 1.0


def test_share_arithmetic():
    f = svd(np.diag([3.0, 2.0, 1.0]))
    assert abs(cumulative_share(f, 2) - 5.0 / 6.0) < 1e-12


def test_share_monotone(rng):
    f = svd(rng.normal(size=(15, 6)))
    shares = [cumulative_share(f, k) for k in range(1, 7)]
    assert all(b >= a for a, b in zip(shares, shares[1:]))
    assert abs(shares[-1] - 1.0) < 1e-12


def test_share_of_zero_spectrum_rejected():
    f = svd(np.zeros((4, 3)) + 0.0)
    f = type(f)(u=f.u, s=np.zeros(3), v=f.v)
    with pytest.raises(ValidationError):
        cumulative_share(f, 2)


# ---------------------------------------------------------------------------
# acf


def test_acf_lag_zero_is_one(rng):
    series = rng.normal(size=100)
    assert acf(series, 10)[0] == 1.0


def test_white_noise_band(rng):
    series = rng.normal(size=2000)
    values = acf(series, 50)[1:]
    inside = np.mean(np.abs(values) < 3 / np.sqrt(2000))
    assert inside >= 0.95


def test_periodic_series_matches_brute_force():
    n = 700
    series = np.sin(2 * np.pi * np.arange(n) / 7.0) + 0.1 * np.cos(np.arange(n))
    values = acf(series, 14)
    centered = series - series.mean()
    denom = (centered**2).sum()
    for lag in (7, 14):
        brute = (centered[:-lag] * centered[lag:]).sum() / denom
        assert abs(values[lag] - brute) < 1e-12


def test_acf_constant_series_rejected():
    with pytest.raises(ValidationError):
        acf(np.ones(50), 5)


def test_acf_short_series_rejected(rng):
    with pytest.raises(ValidationError):
        acf(rng.normal(size=10), 10)


# ---------------------------------------------------------------------------
# classical decomposition


def test_pure_seasonal_residual_is_zero():
    period = 12
    profile = np.sin(2 * np.pi * np.arange(period) / period)
    series = np.tile(profile, 10)
    trend, seasonal, residual = classical_decompose(series, period)
    interior = ~np.isnan(residual)
    assert np.abs(residual[interior]).max() < 1e-8


def test_linear_trend_gives_zero_seasonal():
    series = 0.5 * np.arange(120)
    trend, seasonal, residual = classical_decompose(series, 12)
    assert np.abs(seasonal).max() < 1e-8


def test_injected_noise_variance_recovered(rng):
    n, period = 3650, 365
    t = np.arange(n)
    noise = rng.normal(scale=0.8, size=n)
    series = (0.002 * t + 2.0 * np.sin(2 * np.pi * t / period) + noise)
    trend, seasonal, residual = classical_decompose(series, period)
    interior = ~np.isnan(residual)
    ratio = residual[interior].var() / 0.64
    assert 0.85 < ratio < 1.15


def test_seasonal_sums_to_zero_over_period(rng):
    series = rng.normal(size=200) + np.tile(np.arange(5.0), 40)
    _, seasonal, _ = classical_decompose(series, 5)
    for start in range(0, 195, 5):
        assert abs(seasonal[start:start + 5].sum()) < 1e-10


def test_even_period_half_weight_window():
    # a pure period-4 cycle must be annihilated by the half-weight window
    series = np.tile([1.0, -1.0, 2.0, -2.0], 12)
    trend, seasonal, residual = classical_decompose(series, 4)
    interior = ~np.isnan(trend)
    assert np.abs(trend[interior]).max() < 1e-12
    assert np.abs(residual[~np.isnan(residual)]).max() < 1e-10


def test_decompose_validation_errors(rng):
    with pytest.raises(ValidationError):
        classical_decompose(rng.normal(size=10), 12)
    with pytest.raises(ValidationError):
        classical_decompose(rng.normal(size=100), 1)
    with pytest.raises(ValidationError):
        classical_decompose(np.ones(100), 10)


# ---------------------------------------------------------------------------
# seasonal day index


def test_seasonal_index_feb29_shares_feb28_slot():
    cal = build_calendar("2000-01-01", "2000-12-31")
    idx = seasonal_day_index(cal)
    feb28 = np.nonzero((cal.months == 2) & (cal.days == 28))[0][0]
    feb29 = np.nonzero((cal.months == 2) & (cal.days == 29))[0][0]
    mar01 = np.nonzero((cal.months == 3) & (cal.days == 1))[0][0]
    dec31 = np.nonzero((cal.months == 12) & (cal.days == 31))[0][0]
    assert idx[feb29] == idx[feb28] == 58
    assert idx[mar01] == 59
    assert idx[dec31] == 364


def test_seasonal_index_alignment_across_leap_years():
    leap = build_calendar("2000-03-01", "2000-03-01")
    plain = build_calendar("2001-03-01", "2001-03-01")
    assert seasonal_day_index(leap)[0] == seasonal_day_index(plain)[0]


# ---------------------------------------------------------------------------
# build_T


def test_pure_seasonal_panel_residual_near_zero():
    # leap-free window keeps position- and calendar-periodicity aligned
    period = 365
    t = np.arange(3 * period)
    profile = 3.0 + np.sin(2 * np.pi * t / period)
    values = np.column_stack([profile, 2 * profile + 1])
    panel = make_panel(values, start="2001-01-01")
    t_panel = build_T(panel, period=period)
    assert np.abs(t_panel.values).max() < 1e-8


def test_constant_column_rejected(rng):
    values = rng.normal(size=(800, 3))
    values[:, 1] = 7.0
    panel = make_panel(values, start="2001-01-01")
    with pytest.raises(ValidationError, match="column"):
        build_T(panel, period=365)


def test_edge_rows_dropped_globally(rng):
    values = rng.normal(size=(900, 4)) + np.sin(np.arange(900))[:, None]
    panel = make_panel(values, start="2001-01-01")
    t_panel = build_T(panel, period=365)
    assert t_panel.n_days == 900 - 364
    assert not np.isnan(t_panel.values).any()
    assert t_panel.calendar.n_days == t_panel.n_days


@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_decomposition_identity_property(period, seed):
    rng = np.random.default_rng(seed)
    series = rng.normal(size=6 * period) + np.tile(rng.normal(size=period), 6)
    trend, seasonal, residual = classical_decompose(series, period)
    interior = ~np.isnan(trend)
    recomposed = trend[interior] + seasonal[interior] + residual[interior]
    assert np.abs(recomposed - series[interior]).max() < 1e-10
