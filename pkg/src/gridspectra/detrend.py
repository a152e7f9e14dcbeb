"""Detrending: low-rank trimming of a panel and classical time-series
decomposition, with ACF-based assessment.

Trimming subtracts the top-k singular components of the panel, so the
remaining spectrum is exactly the (k+1)-th singular value onward. Classical
decomposition fits an additive model trend + seasonal + residual, the trend
being a centered moving average and the seasonal component the re-centered
period-indexed means of the detrended series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import Panel
from .linalg import SvdFactorization, svd
from .tables import Table

DEFAULT_MAX_LAG = 50


@dataclass(frozen=True, eq=False)
class TrimReport:
    """How much signal the removed components carried, and what temporal
    structure remains per column."""

    k: int
    cumulative_share: float
    acf_lags: int
    acf_curves: np.ndarray  # p x (acf_lags + 1)
    grid_ids: tuple[str, ...]

    def share_table(self) -> Table:
        table = Table(("k", "cumulative_share"))
        table.append(self.k, self.cumulative_share)
        return table

    def acf_table(self) -> Table:
        table = Table(("grid_id", "lag", "acf"))
        for gid, curve in zip(self.grid_ids, self.acf_curves):
            for lag, value in enumerate(curve):
                table.append(gid, lag, float(value))
        return table


def cumulative_share(f: SvdFactorization, k: int) -> float:
    """Share of the singular-value sum carried by the top k values."""
    if k < 0 or k > f.s.size:
        raise ValidationError(f"k = {k} outside 0..{f.s.size}")
    total = float(f.s.sum())
    if total <= 0:
        raise ValidationError("all-zero spectrum has no singular-value share")
    return float(f.s[:k].sum()) / total


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag (acf[0] == 1)."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size <= max_lag:
        raise ValidationError(f"series of length {x.size} too short for max_lag {max_lag}")
    if not np.isfinite(x).all():
        raise ValidationError("series contains non-finite values")
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise ValidationError("constant series has no autocorrelation")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for lag in range(1, max_lag + 1):
        out[lag] = float(centered[:-lag] @ centered[lag:]) / denom
    return out


def trim_svd(panel: Panel, k: int, max_lag: int = DEFAULT_MAX_LAG) -> tuple[Panel, TrimReport]:
    """Remove the top-k singular components of the panel.

    Returns the trimmed panel and a report with the cumulative singular-value
    share of the removed components and the per-column ACF of the residual.
    """
    values = panel.values
    r = min(values.shape)
    if not 1 <= k <= r:
        raise ValidationError(f"k = {k} outside 1..{r}")
    if np.isnan(values).any():
        raise ValidationError("trim_svd requires a complete panel")
    f = svd(values)
    trimmed = values - (f.u[:, :k] * f.s[:k]) @ f.v[:, :k].T
    share = cumulative_share(f, k)
    lag_cap = min(max_lag, panel.n_days - 1)
    curves = np.vstack([acf(trimmed[:, j], lag_cap) for j in range(trimmed.shape[1])])
    report = TrimReport(
        k=k,
        cumulative_share=share,
        acf_lags=lag_cap,
        acf_curves=curves,
        grid_ids=panel.grids.grid_ids,
    )
    out = Panel(
        values=trimmed,
        calendar=panel.calendar,
        grids=panel.grids,
        order_tag=panel.order_tag,
        notes=panel.notes,
    )
    return out, report


def trim_sweep(panel: Panel, k_values, max_lag: int = DEFAULT_MAX_LAG,
               acf_band: float | None = None) -> Table:
    """Report (cumulative share, fraction of columns whose max |acf| at lags
    >= 1 stays below a band) for each candidate k."""
    values = panel.values
    f = svd(values)
    if acf_band is None:
        acf_band = 3.0 / np.sqrt(panel.n_days)
    table = Table(("k", "cumulative_share", "fraction_detrended", "acf_band"))
    for k in k_values:
        trimmed_panel, report = trim_svd(panel, int(k), max_lag=max_lag)
        peak = np.abs(report.acf_curves[:, 1:]).max(axis=1)
        frac = float((peak < acf_band).mean())
        table.append(int(k), cumulative_share(f, int(k)), frac, float(acf_band))
    return table


def _moving_average(x: np.ndarray, period: int) -> np.ndarray:
    """Centered moving average; even periods use half-weight endpoints.
    Edge positions where the window does not fit are NaN."""
    n = x.size
    if period % 2 == 1:
        weights = np.full(period, 1.0 / period)
        span = period
    else:
        weights = np.concatenate([[0.5], np.ones(period - 1), [0.5]]) / period
        span = period + 1
    valid = np.convolve(x, weights[::-1], mode="valid")
    out = np.full(n, np.nan)
    start = span // 2
    out[start:start + valid.size] = valid
    return out


def classical_decompose(series, period: int, seasonal_index=None):
    """Additive decomposition into (trend, seasonal, residual).

    ``seasonal_index`` optionally assigns each observation a seasonal slot in
    0..period-1 (default: position modulo period). Trend and residual are NaN
    where the moving-average window does not fit.
    """
    x = np.asarray(series, dtype=float).ravel()
    if period < 2:
        raise ValidationError(f"period must be >= 2, got {period}")
    if x.size < 2 * period:
        raise ValidationError(f"series of length {x.size} too short for period {period}")
    if not np.isfinite(x).all():
        raise ValidationError("series contains non-finite values")
    if x.max() == x.min():
        raise ValidationError("constant series cannot be decomposed")
    if seasonal_index is None:
        seasonal_index = np.arange(x.size) % period
    else:
        seasonal_index = np.asarray(seasonal_index, dtype=int)
        if seasonal_index.shape != x.shape:
            raise ValidationError("seasonal_index length does not match series")
        if seasonal_index.min() < 0 or seasonal_index.max() >= period:
            raise ValidationError("seasonal_index outside 0..period-1")

    trend = _moving_average(x, period)
    interior = ~np.isnan(trend)
    detrended = x - trend
    profile = np.full(period, np.nan)
    for s in range(period):
        mask = interior & (seasonal_index == s)
        if not mask.any():
            raise ValidationError(f"seasonal slot {s} has no interior observations")
        profile[s] = detrended[mask].mean()
    profile -= profile.mean()
    seasonal = profile[seasonal_index]
    residual = x - trend - seasonal
    return trend, seasonal, residual


def seasonal_day_index(calendar) -> np.ndarray:
    """Seasonal slot per day on a 365-slot year; Feb 29 shares Feb 28's slot
    so leap years stay aligned with non-leap years."""
    months, days = calendar.months, calendar.days
    # cumulative non-leap month lengths make March 1 slot 59 in every year
    cum = np.array([0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334])
    idx = cum[months - 1] + days - 1
    idx = np.where((months == 2) & (days == 29), cum[1] + 27, idx)
    return idx.astype(int)


def build_T(panel: Panel, period: int = 365) -> Panel:
    """Column-wise classical-decomposition residuals of a panel; edge rows with
    undefined trend are dropped for every column so the result stays
    rectangular."""
    if np.isnan(panel.values).any():
        raise ValidationError("build_T requires a complete panel")
    season_idx = seasonal_day_index(panel.calendar) if period == 365 else None
    residuals = np.empty_like(panel.values)
    for j in range(panel.n_grids):
        try:
            _, _, res = classical_decompose(panel.values[:, j], period, seasonal_index=season_idx)
        except ValidationError as exc:
            raise ValidationError(f"column {panel.grids[j].grid_id}: {exc}") from exc
        residuals[:, j] = res
    keep = ~np.isnan(residuals).any(axis=1)
    rows = np.nonzero(keep)[0]
    if rows.size == 0:
        raise ValidationError("no interior rows remain after decomposition")
    return Panel(
        values=residuals[rows],
        calendar=panel.calendar.subset(rows),
        grids=panel.grids,
        order_tag=panel.order_tag,
        notes=panel.notes,
    )
