"""Pearson and Bergsma correlation machinery, spatial proximity weights, the
spatial Bergsma association statistic, and spatial-pattern summaries.

Bergsma's kappa for a sample pair is the unbiased fourth-order U-statistic of
the product of the two double-centered negative-half-absolute-difference
kernels

    h(x1, x2) = -|x1 - x2|/2 + E|x1 - X|/2 + E|x2 - X|/2 - E|X - X'|/2.

Writing a_ij = |x_i - x_j| and b_ij = |y_i - y_j| with row sums a_i., b_i.
and totals A, B, the exact closed form over distinct index quadruples reduces
to

    kappa = ( S1 / (n (n-3))
              - 2 S2 / (n (n-2) (n-3))
              + A B / (n (n-1) (n-2) (n-3)) ) / 4

with S1 = sum_ij a_ij b_ij and S2 = sum_i a_i. b_i.; this equals exhaustive
enumeration over all 4-subsets. The plug-in (V-statistic) variant replaces
the distinct-index averages with unrestricted ones.

Bergsma's correlation rho = kappa(x, y) / sqrt(kappa(x, x) kappa(y, y)) is
zero exactly under independence; the spatial statistic combines pairwise rho
values with row-standardized proximity weights:

    S_B = (1/p) * sum_{i<j} (w_ij + w_ji) * rho_ij.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .ingest import GridSet, Panel, slice_panel
from .gridorder import lattice_indices
from .tables import Table

log = logging.getLogger(__name__)

BERGSMA_MAX_ROWS = 1500


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric unit-diagonal correlation matrix with provenance tags.

    Failed Bergsma pairs are NaN in ``matrix`` and listed in ``failed_pairs``.
    """

    matrix: np.ndarray
    kind: str
    grid_ids: tuple[str, ...]
    source: str = ""
    slice_desc: str = ""
    order_tag: str = ""
    failed_pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if self.kind not in ("pearson", "bergsma"):
            raise ValidationError(f"unknown correlation kind {self.kind!r}")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("correlation matrix must be square")
        if len(self.grid_ids) != m.shape[0]:
            raise ValidationError("grid_ids length does not match matrix")
        diff = np.abs(m - m.T)
        asym = float(np.nanmax(diff)) if diff.size else 0.0
        if np.isnan(asym):
            asym = 0.0
        if asym > 1e-12:
            raise ValidationError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise ValidationError("correlation matrix diagonal must be 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def pearson_corr(panel: Panel) -> CorrelationMatrix:
    """Sample Pearson correlations between panel columns."""
    x = panel.values
    if x.shape[0] < 2:
        raise ValidationError("pearson_corr needs at least two rows")
    if np.isnan(x).any():
        raise ValidationError("pearson_corr requires a complete panel")
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    bad = np.nonzero(norms == 0)[0]
    if bad.size:
        names = [panel.grids[int(j)].grid_id for j in bad]
        raise ValidationError(f"constant columns have no correlation: {names}")
    r = (centered.T @ centered) / np.outer(norms, norms)
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(
        matrix=r,
        kind="pearson",
        grid_ids=panel.grids.grid_ids,
        order_tag=panel.order_tag,
    )


def _pair_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    dist = np.abs(x[:, None] - x[None, :])
    rows = dist.sum(axis=1)
    return dist, rows, float(rows.sum())


def _kappa_from_stats(s1: float, s2: float, tot1: float, tot2: float,
                      n: int, estimator: str) -> float:
    if estimator == "u":
        return 0.25 * (
            s1 / (n * (n - 3))
            - 2.0 * s2 / (n * (n - 2) * (n - 3))
            + tot1 * tot2 / (n * (n - 1) * (n - 2) * (n - 3))
        )
    if estimator == "v":
        return 0.25 * (s1 / n**2 - 2.0 * s2 / n**3 + tot1 * tot2 / n**4)
    raise ValidationError(f"unknown estimator {estimator!r}")


def bergsma_kappa(x, y, estimator: str = "u") -> float:
    """Bergsma's kappa for a sample pair (see module docstring)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValidationError("samples must have equal length")
    if x.size < 4:
        raise ValidationError("bergsma_kappa needs n >= 4")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValidationError("samples contain non-finite values")
    ax, rx, tx = _pair_stats(x)
    by, ry, ty = _pair_stats(y)
    s1 = float((ax * by).sum())
    s2 = float(rx @ ry)
    return _kappa_from_stats(s1, s2, tx, ty, x.size, estimator)


def bergsma_rho(x, y, estimator: str = "u") -> float:
    """Normalized Bergsma correlation; requires both marginal kappas positive."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    kxy = bergsma_kappa(x, y, estimator)
    kxx = bergsma_kappa(x, x, estimator)
    kyy = bergsma_kappa(y, y, estimator)
    if kxx <= 0 or kyy <= 0:
        raise ValidationError("degenerate sample: non-positive marginal kappa")
    return kxy / float(np.sqrt(kxx * kyy))


def bergsma_corr_matrix(panel: Panel, estimator: str = "u",
                        max_rows: int = BERGSMA_MAX_ROWS,
                        allow_large: bool = False) -> CorrelationMatrix:
    """Pairwise Bergsma correlations between panel columns.

    The O(n^2)-per-pair cost makes full-resolution panels expensive, so row
    counts above ``max_rows`` are rejected unless ``allow_large`` is set.
    Degenerate pairs are marked NaN and reported instead of failing the whole
    matrix.
    """
    x = panel.values
    n, p = x.shape
    if n < 4:
        raise ValidationError("bergsma_corr_matrix needs at least 4 rows")
    if np.isnan(x).any():
        raise ValidationError("bergsma_corr_matrix requires a complete panel")
    if n > max_rows and not allow_large:
        raise ValidationError(
            f"{n} rows exceeds the Bergsma cap of {max_rows}; "
            "slice the panel or pass allow_large"
        )
    stats = [_pair_stats(x[:, j]) for j in range(p)]
    kappa_self = np.array([
        _kappa_from_stats(float((d * d).sum()), float(r @ r), t, t, n, estimator)
        for d, r, t in stats
    ])
    out = np.eye(p)
    failed: list[tuple[int, int]] = []
    for i in range(p):
        di, ri, ti = stats[i]
        for j in range(i + 1, p):
            dj, rj, tj = stats[j]
            if kappa_self[i] <= 0 or kappa_self[j] <= 0:
                out[i, j] = out[j, i] = np.nan
                failed.append((i, j))
                continue
            s1 = float((di * dj).sum())
            s2 = float(ri @ rj)
            kxy = _kappa_from_stats(s1, s2, ti, tj, n, estimator)
            rho = kxy / float(np.sqrt(kappa_self[i] * kappa_self[j]))
            out[i, j] = out[j, i] = rho
    if failed:
        log.warning("bergsma_corr_matrix: %d degenerate pairs", len(failed))
    return CorrelationMatrix(
        matrix=out,
        kind="bergsma",
        grid_ids=panel.grids.grid_ids,
        order_tag=panel.order_tag,
        failed_pairs=tuple(failed),
    )


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Row-standardized spatial proximity weights with zero diagonal."""

    w: np.ndarray
    kind: str
    row_standardized: bool = True
    scale: float | None = None
    isolated: tuple[int, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValidationError("weight matrix must be square")
        if (w < 0).any():
            raise ValidationError("weights must be non-negative")
        if w.size and np.abs(np.diag(w)).max() > 0:
            raise ValidationError("weight matrix diagonal must be zero")
        if self.row_standardized:
            sums = w.sum(axis=1)
            active = sums > 0
            if active.any() and np.abs(sums[active] - 1.0).max() > 1e-12:
                raise ValidationError("rows with neighbors must sum to one")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def p(self) -> int:
        return self.w.shape[0]


def row_standardize(w: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    w = np.asarray(w, dtype=float).copy()
    np.fill_diagonal(w, 0.0)
    sums = w.sum(axis=1)
    isolated = tuple(int(i) for i in np.nonzero(sums == 0)[0])
    active = sums > 0
    w[active] = w[active] / sums[active, None]
    return w, isolated


def adjacency_weights(grids: GridSet, neighborhood: str = "rook") -> WeightMatrix:
    """Lattice-adjacency weights: rook (4-neighbor) by default, queen
    (8-neighbor) optionally; rows are standardized to sum to one."""
    if neighborhood not in ("rook", "queen"):
        raise ValidationError(f"unknown neighborhood {neighborhood!r}")
    rows, cols, _, _ = lattice_indices(grids)
    p = len(grids)
    dr = np.abs(rows[:, None] - rows[None, :])
    dc = np.abs(cols[:, None] - cols[None, :])
    if neighborhood == "rook":
        adj = (dr + dc) == 1
    else:
        adj = (np.maximum(dr, dc) == 1)
    w, isolated = row_standardize(adj.astype(float))
    if isolated:
        log.warning("adjacency_weights: %d isolated cells", len(isolated))
    return WeightMatrix(w=w, kind="lag1-adjacency", isolated=isolated)


def expdecay_weights(grids: GridSet, scale: float = 1.0) -> WeightMatrix:
    """exp(-distance/scale) weights on Euclidean (lat, lon) distance, row
    standardized."""
    if scale <= 0:
        raise ValidationError(f"scale must be positive, got {scale}")
    lats, lons = grids.lats, grids.lons
    dist = np.hypot(lats[:, None] - lats[None, :], lons[:, None] - lons[None, :])
    w = np.exp(-dist / scale)
    np.fill_diagonal(w, 0.0)
    w, isolated = row_standardize(w)
    return WeightMatrix(w=w, kind="exp-decay", scale=float(scale), isolated=isolated)


def restrict_weights(weights: WeightMatrix, indices) -> WeightMatrix:
    """Sub-matrix of the weights on the given cells, re-standardized."""
    idx = np.asarray(indices, dtype=int)
    sub = weights.w[np.ix_(idx, idx)]
    w, isolated = row_standardize(sub)
    return WeightMatrix(w=w, kind=weights.kind, scale=weights.scale, isolated=isolated)


@dataclass(frozen=True)
class SbResult:
    """One spatial Bergsma evaluation."""

    value: float
    weight_kind: str
    slice_desc: str
    p: int
    dropped_pairs: int = 0


def spatial_bergsma_from_similarity(sim: np.ndarray, weights: WeightMatrix,
                                    slice_desc: str = "") -> SbResult:
    """Evaluate S_B given a precomputed symmetric similarity matrix; NaN
    entries (degenerate pairs) are dropped and counted."""
    sim = np.asarray(sim, dtype=float)
    w = weights.w
    if sim.shape != w.shape:
        raise ValidationError("similarity and weight dimensions differ")
    p = w.shape[0]
    total = 0.0
    dropped = 0
    for i in range(p):
        for j in range(i + 1, p):
            pair_w = w[i, j] + w[j, i]
            if pair_w == 0:
                continue
            value = sim[i, j]
            if np.isnan(value):
                dropped += 1
                continue
            total += pair_w * value
    return SbResult(value=total / p, weight_kind=weights.kind,
                    slice_desc=slice_desc, p=p, dropped_pairs=dropped)


def spatial_bergsma(panel: Panel, weights: WeightMatrix, estimator: str = "u",
                    slice_desc: str = "") -> SbResult:
    """Spatial Bergsma statistic of a panel under the given weights. Pairs
    with zero combined weight are skipped without computing rho; degenerate
    pairs are dropped and counted."""
    x = panel.values
    n, p = x.shape
    if weights.p != p:
        raise ValidationError(f"weights are {weights.p}x{weights.p}, panel has {p} columns")
    if n < 4:
        raise ValidationError("spatial_bergsma needs at least 4 rows")
    if np.isnan(x).any():
        raise ValidationError("spatial_bergsma requires a complete panel")
    w = weights.w
    stats_cache: dict[int, tuple] = {}
    kappa_cache: dict[int, float] = {}

    def stats_of(j: int):
        if j not in stats_cache:
            stats_cache[j] = _pair_stats(x[:, j])
        return stats_cache[j]

    def kappa_of(j: int) -> float:
        if j not in kappa_cache:
            d, r, t = stats_of(j)
            kappa_cache[j] = _kappa_from_stats(
                float((d * d).sum()), float(r @ r), t, t, n, estimator
            )
        return kappa_cache[j]

    total = 0.0
    dropped = 0
    for i in range(p):
        for j in range(i + 1, p):
            pair_w = w[i, j] + w[j, i]
            if pair_w == 0:
                continue
            if kappa_of(i) <= 0 or kappa_of(j) <= 0:
                dropped += 1
                continue
            di, ri, ti = stats_of(i)
            dj, rj, tj = stats_of(j)
            kxy = _kappa_from_stats(float((di * dj).sum()), float(ri @ rj),
                                    ti, tj, n, estimator)
            total += pair_w * (kxy / float(np.sqrt(kappa_of(i) * kappa_of(j))))
    if dropped:
        log.warning("spatial_bergsma %s: %d degenerate pairs dropped", slice_desc, dropped)
    return SbResult(value=total / p, weight_kind=weights.kind,
                    slice_desc=slice_desc, p=p, dropped_pairs=dropped)


def sb_series(panel: Panel, weights: WeightMatrix, by="year",
              estimator: str = "u") -> tuple[list[SbResult], dict[str, str]]:
    """Spatial Bergsma per temporal slice: ``"year"``, ``"month"`` (each month
    of each year), or ``("year", "zone")`` with the weights restricted and
    re-standardized per zone. Per-slice failures are reported and the series
    continues."""
    cal = panel.calendar
    years = sorted(set(cal.years.tolist()))
    results: list[SbResult] = []
    errors: dict[str, str] = {}

    def run(desc: str, sub_panel: Panel, sub_weights: WeightMatrix):
        try:
            results.append(spatial_bergsma(sub_panel, sub_weights,
                                           estimator=estimator, slice_desc=desc))
        except ValidationError as exc:
            errors[desc] = str(exc)

    if by == "year":
        for year in years:
            run(str(year), slice_panel(panel, year=year), weights)
    elif by == "month":
        for year in years:
            months = sorted(set(cal.months[cal.years == year].tolist()))
            for month in months:
                run(f"{year}-{month:02d}",
                    slice_panel(panel, year=year, month=month), weights)
    elif tuple(by) == ("year", "zone"):
        zones = sorted(set(panel.grids.zones.tolist()))
        for year in years:
            year_panel = slice_panel(panel, year=year)
            for zone in zones:
                idx = np.nonzero(panel.grids.zones == zone)[0]
                run(f"{year}/zone{zone}",
                    slice_panel(year_panel, zone=zone),
                    restrict_weights(weights, idx))
    else:
        raise ValidationError(f"unsupported sb_series grouping {by!r}")
    return results, errors


def sb_table(results: list[SbResult]) -> Table:
    table = Table(("slice", "weight_kind", "value", "p", "dropped_pairs"))
    for r in results:
        table.append(r.slice_desc, r.weight_kind, r.value, r.p, r.dropped_pairs)
    return table


def max_corr_neighbor(corr: CorrelationMatrix, grids: GridSet) -> Table:
    """For each grid, the off-diagonal partner with maximum correlation and
    the signed (lat, lon) differences to it. Ties break by smallest Euclidean
    distance, then smallest grid_id."""
    m = corr.matrix
    p = m.shape[0]
    if p < 2:
        raise ValidationError("max_corr_neighbor needs at least two grids")
    if len(grids) != p:
        raise ValidationError("grid set does not match matrix dimension")
    lats, lons = grids.lats, grids.lons
    table = Table(("grid_id", "partner_id", "corr", "dlat", "dlon"))
    for i in range(p):
        row = m[i].copy()
        row[i] = -np.inf
        row = np.where(np.isnan(row), -np.inf, row)
        best = np.nanmax(row)
        candidates = np.nonzero(row == best)[0]
        if candidates.size > 1:
            dist = np.hypot(lats[candidates] - lats[i], lons[candidates] - lons[i])
            keys = sorted(
                zip(dist, [grids[int(j)].grid_id for j in candidates], candidates)
            )
            j = int(keys[0][2])
        else:
            j = int(candidates[0])
        table.append(
            grids[i].grid_id,
            grids[j].grid_id,
            float(m[i, j]),
            float(lats[j] - lats[i]),
            float(lons[j] - lons[i]),
        )
    return table


def corr_field(corr: CorrelationMatrix, grid_id: str, grids: GridSet) -> Table:
    """The correlation row of one grid mapped onto (lat, lon) positions."""
    if len(grids) != corr.p:
        raise ValidationError("grid set does not match matrix dimension")
    idx = grids.index_of(grid_id)
    table = Table(("lat", "lon", "value"))
    for j, cell in enumerate(grids):
        table.append(cell.lat, cell.lon, float(corr.matrix[idx, j]))
    return table
