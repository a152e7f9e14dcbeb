"""End-to-end orchestration: yearly spectral series, GSVD sweeps, change
summaries, ENSO stratification, singular-vector strata, and the full report
run with a per-stage manifest.

Every stage appends one manifest line (stage, input digests, config digest,
output digests); identical configuration and inputs reproduce the output tree
byte for byte.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import association, detrend, gridorder, rmt, svgplot
from .config import RunConfig
from .errors import ValidationError
from .ingest import (
    EnsoTable,
    Panel,
    build_calendar,
    group_average,
    load_daily_values,
    load_enso,
    load_grid_metadata,
    select_complete,
    slice_panel,
)
from .linalg import SvdFactorization, gsvd, svd
from .tables import Table, write_matrix_csv
from .util import parallel_map, sha256_array, sha256_file

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# yearly spectral series


@dataclass(eq=False)
class YearlySpectralSeries:
    years: list[int]
    summaries: dict[int, rmt.SpectralSummary] = field(default_factory=dict)
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def valid_years(self) -> list[int]:
        return [y for y in self.years if y in self.summaries]

    def track(self, name: str) -> np.ndarray:
        """Scalar per valid year: 'top', 'median', 'significant_count', or
        'q0'..'q100' deciles."""
        values = []
        for year in self.valid_years:
            s = self.summaries[year]
            if name == "top":
                values.append(s.eigenvalues[0])
            elif name == "median":
                values.append(float(np.median(s.eigenvalues)))
            elif name == "significant_count":
                values.append(float(s.significant_count))
            elif name.startswith("q") and name[1:].isdigit():
                values.append(float(s.quantiles[int(name[1:]) // 10]))
            else:
                raise ValidationError(f"unknown track {name!r}")
        return np.asarray(values, dtype=float)

    def tracks_table(self) -> Table:
        names = ["top", "median", "significant_count"] + [f"q{k}" for k in range(0, 101, 10)]
        table = Table(("year",) + tuple(names))
        data = {name: self.track(name) for name in names}
        for i, year in enumerate(self.valid_years):
            table.append(year, *(float(data[name][i]) for name in names))
        return table


def run_yearly_esd(panel: Panel, threads: int = 1) -> YearlySpectralSeries:
    """Per-year Pearson correlation spectra with MP-significance counts;
    failing years are recorded and the series continues."""
    years = sorted(set(panel.calendar.years.tolist()))

    def one(year: int):
        sub = slice_panel(panel, year=year)
        corr = association.pearson_corr(sub)
        eigs = np.linalg.eigvalsh(corr.matrix)[::-1]
        return rmt.spectral_summary(eigs, n_obs=sub.n_days, p_dim=sub.n_grids)

    series = YearlySpectralSeries(years=years)
    for year, outcome in zip(years, parallel_map(_safe(one), years, threads=threads)):
        if isinstance(outcome, str):
            series.errors[year] = outcome
            log.warning("yearly ESD %s failed: %s", year, outcome)
        else:
            series.summaries[year] = outcome
    return series


def _safe(fn):
    def wrapped(item):
        try:
            return fn(item)
        except (ValidationError, np.linalg.LinAlgError) as exc:
            return str(exc)

    return wrapped


# ---------------------------------------------------------------------------
# GSVD sweeps


@dataclass(eq=False)
class GsvdSweep:
    """Per-pair generalized singular values with attached null critical
    values; ``pairs`` holds (label, gsv, dims) triples."""

    mode: str
    pairs: list[tuple[str, np.ndarray, tuple[int, int, int]]] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)
    nulls: dict[tuple[int, int, int], rmt.EmpiricalNull] = field(default_factory=dict)

    def table(self) -> Table:
        table = Table(("pair", "index", "gsv", "log_gsv", "null_lower", "null_upper"))
        for label, gsv, dims in self.pairs:
            null = self.nulls.get(dims)
            lo, hi = (null.lower, null.upper) if null else (float("nan"), float("nan"))
            for idx, value in enumerate(gsv):
                table.append(label, idx, float(value), float(np.log(value)), lo, hi)
        return table


def split_half_years(panel: Panel, year: int) -> tuple[np.ndarray, np.ndarray]:
    """Two transposed half-year matrices (grids x days) for one year.

    Leap years split 183/183; non-leap years split 182/182 with the middle
    day dropped so both halves match.
    """
    sub = slice_panel(panel, year=year)
    n = sub.n_days
    if n == 366:
        first, second = sub.values[:183], sub.values[183:]
    elif n == 365:
        first, second = sub.values[:182], sub.values[183:]
    else:
        raise ValidationError(f"year {year} has {n} days; expected a full year")
    return first.T.copy(), second.T.copy()


def run_gsvd_sweep(panel: Panel, mode: str, null_reps: int = 0, seed: int = 0,
                   level: float = 0.05, threads: int = 1) -> GsvdSweep:
    """GSVD over successive year pairs, or over transposed half-years within
    each year. Shape-guard violations are recorded per pair and the sweep
    continues. When ``null_reps`` > 0, a simulated GSV null is attached for
    each distinct dimension triple."""
    if mode not in ("year-pairs", "transposed-half-years"):
        raise ValidationError(f"unknown gsvd sweep mode {mode!r}")
    years = sorted(set(panel.calendar.years.tolist()))
    sweep = GsvdSweep(mode=mode)

    jobs: list[tuple[str, np.ndarray, np.ndarray]] = []
    if mode == "year-pairs":
        if len(years) < 2:
            raise ValidationError("year-pairs mode needs at least two years")
        for y1, y2 in zip(years[:-1], years[1:]):
            d1 = slice_panel(panel, year=y1).values
            d2 = slice_panel(panel, year=y2).values
            jobs.append((f"{y1}-{y2}", np.asarray(d1), np.asarray(d2)))
    else:
        for year in years:
            try:
                h1, h2 = split_half_years(panel, year)
            except ValidationError as exc:
                sweep.errors[str(year)] = str(exc)
                continue
            jobs.append((str(year), h1, h2))

    def one(job):
        label, d1, d2 = job
        f = gsvd(d1, d2)
        return label, f.gsv, (d1.shape[0], d2.shape[0], d1.shape[1])

    for job, outcome in zip(jobs, parallel_map(_safe(one), jobs, threads=threads)):
        if isinstance(outcome, str):
            sweep.errors[job[0]] = outcome
            log.warning("gsvd %s pair %s failed: %s", mode, job[0], outcome)
            continue
        label, gsv, dims = outcome
        sweep.pairs.append((label, gsv, dims))
        if null_reps > 0 and dims not in sweep.nulls:
            sweep.nulls[dims] = rmt.simulate_gsv_null(
                dims[0], dims[1], dims[2], reps=null_reps, seed=seed,
                level=level, threads=threads,
            )
    return sweep


# ---------------------------------------------------------------------------
# change summary


def change_split(values) -> tuple[int | None, float]:
    """Single best split of a series into two segments by least squares.

    Returns (first index of the second segment, between/within variance
    ratio); a constant series returns (None, 0.0).
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 8:
        raise ValidationError(f"change summary needs >= 8 points, got {x.size}")
    total = float(((x - x.mean()) ** 2).sum())
    if total <= 1e-300:
        return None, 0.0
    best_split, best_within = None, np.inf
    for s in range(1, x.size):
        left, right = x[:s], x[s:]
        within = float(((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum())
        if within < best_within - 1e-15:
            best_within = within
            best_split = s
    if best_within <= 0:
        return best_split, float("inf")
    return best_split, (total - best_within) / best_within


def run_change_summary(tracks: dict[str, np.ndarray], labels=None) -> Table:
    """Best single split per scalar track; descriptive only, no significance
    claim. ``labels`` names the time points (used when lengths match)."""
    table = Table(("track", "split_label", "split_index", "ratio"))
    for name in sorted(tracks):
        values = np.asarray(tracks[name], dtype=float)
        split, ratio = change_split(values)
        if split is None:
            table.append(name, "none", -1, 0.0)
        else:
            if labels is not None and len(labels) == values.size:
                label = str(labels[split])
            else:
                label = str(split)
            table.append(name, label, split, float(ratio))
    return table


# ---------------------------------------------------------------------------
# ENSO stratification


def run_enso_stratification(results: list[association.SbResult],
                            enso: EnsoTable) -> tuple[Table, dict[str, np.ndarray]]:
    """Group yearly spatial-association values by ENSO phase."""
    groups: dict[str, list[float]] = {}
    for result in results:
        phase = enso.phase_of(int(result.slice_desc))
        groups.setdefault(phase, []).append(result.value)
    table = Table(("phase", "count", "median", "q1", "q3", "iqr"))
    arrays: dict[str, np.ndarray] = {}
    for phase in sorted(groups):
        values = np.asarray(groups[phase], dtype=float)
        arrays[phase] = values
        q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
        table.append(phase, values.size, float(med), float(q1), float(q3), float(q3 - q1))
    return table, arrays


# ---------------------------------------------------------------------------
# singular-vector strata


def run_singular_vector_strata(f: SvdFactorization, calendar, top: int = 6):
    """Top left singular-vector components grouped by month and by
    (year, weekday/weekend). Returns (by-month values, by-month means,
    by-daytype values, by-daytype means) tables."""
    if f.u.shape[0] != calendar.n_days:
        raise ValidationError("factorization rows do not align with calendar days")
    top = min(top, f.u.shape[1])
    months = calendar.months
    years = calendar.years
    weekend = calendar.weekend

    month_values = Table(("component", "month", "value"))
    month_means = Table(("component", "month", "mean"))
    day_values = Table(("component", "year", "daytype", "value"))
    day_means = Table(("component", "year", "daytype", "mean"))
    for comp in range(top):
        column = f.u[:, comp]
        for month in range(1, 13):
            mask = months == month
            if not mask.any():
                continue
            for value in column[mask]:
                month_values.append(comp + 1, month, float(value))
            month_means.append(comp + 1, month, float(column[mask].mean()))
        for year in sorted(set(years.tolist())):
            for daytype, mask in (("weekday", (years == year) & ~weekend),
                                  ("weekend", (years == year) & weekend)):
                if not mask.any():
                    continue
                for value in column[mask]:
                    day_values.append(comp + 1, year, daytype, float(value))
                day_means.append(comp + 1, year, daytype, float(column[mask].mean()))
    return month_values, month_means, day_values, day_means


# ---------------------------------------------------------------------------
# manifest


class Manifest:
    """Tab-separated per-stage provenance: stage, input digests, config
    digest, output digests."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("stage\tinputs\tconfig\toutputs\n", encoding="utf-8")

    def record(self, stage: str, inputs: dict[str, str], config_digest: str,
               outputs: list[Path]) -> None:
        in_part = ",".join(f"{k}={v}" for k, v in sorted(inputs.items()))
        out_part = ",".join(
            f"{Path(p).name}={sha256_file(p)}" for p in sorted(outputs, key=lambda p: str(p))
        )
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(f"{stage}\t{in_part}\t{config_digest}\t{out_part}\n")


# ---------------------------------------------------------------------------
# full report


def _panel_long_table(panel: Panel) -> Table:
    table = Table(("date", "grid_id", "value"))
    dates = [str(d) for d in panel.calendar.dates]
    ids = panel.grids.grid_ids
    for day in range(panel.n_days):
        row = panel.values[day]
        for col in range(panel.n_grids):
            value = row[col]
            if not np.isnan(value):
                table.append(dates[day], ids[col], float(value))
    return table


def _calendar_table(calendar) -> Table:
    table = Table(("date", "year", "month", "day", "season", "season_year", "weekend"))
    for i in range(calendar.n_days):
        table.append(
            str(calendar.dates[i]), int(calendar.years[i]), int(calendar.months[i]),
            int(calendar.days[i]), str(calendar.season[i]), int(calendar.season_year[i]),
            int(calendar.weekend[i]),
        )
    return table


def _grid_table(grids) -> Table:
    table = Table(("grid_id", "lat", "lon", "zone", "complete"))
    for cell in grids:
        table.append(cell.grid_id, cell.lat, cell.lon, cell.zone, int(cell.complete))
    return table


def _ordering_of(config: RunConfig, grids):
    if config.ordering == "raster":
        return gridorder.raster_order(grids)
    if config.ordering == "spiral":
        return gridorder.spiral_order(grids, first_step=config.spiral_first_step)
    within = "spiral" if config.ordering == "zone-then-spiral" else "raster"
    kwargs = {"first_step": config.spiral_first_step} if within == "spiral" else {}
    return gridorder.zone_grouped_order(grids, within=within, **kwargs)


def _weights_of(config: RunConfig, grids, kind: str | None = None):
    kind = kind or config.weight_kind
    if kind == "adjacency":
        return association.adjacency_weights(grids, neighborhood=config.adjacency)
    return association.expdecay_weights(grids, scale=config.weight_scale)


def _group_boxplot(avg_table: Table, key_col: str, path, title: str):
    keys = avg_table.column(key_col)
    means = avg_table.column("mean")
    groups: dict = {}
    for key, value in zip(keys, means):
        if not np.isnan(value):
            groups.setdefault(key, []).append(value)
    svgplot.boxplot_svg([(k, groups[k]) for k in sorted(groups)], path, title=title)


def run_report(config: RunConfig) -> Path:
    """Run the full analysis tree into ``config.out_dir``; returns the path."""
    config.validate(require_inputs=True)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_digest = config.digest()
    config.write(out / "config.txt")
    manifest = Manifest(out / "manifest.tsv")
    level = config.level

    # -- ingest ---------------------------------------------------------
    calendar = build_calendar(config.start, config.end,
                              december_to_next_djf=config.december_to_next_djf)
    grids = load_grid_metadata(config.grid_csv)
    raw = load_daily_values(config.values_csv, grids, calendar)
    panel = select_complete(raw)
    if panel.n_grids == 0:
        raise ValidationError("no complete columns in the input panel")
    ingest_inputs = {
        "grid_csv": sha256_file(config.grid_csv),
        "values_csv": sha256_file(config.values_csv),
    }
    outputs = [
        _grid_table(panel.grids).write_csv(out / "ingest" / "grids_complete.csv"),
        _calendar_table(calendar).write_csv(out / "ingest" / "calendar.csv"),
    ]
    if config.write_panels:
        outputs.append(_panel_long_table(panel).write_csv(out / "ingest" / "panel.csv"))
    avg_year = group_average(raw, by=("year",))
    avg_year_season = group_average(raw, by=("year", "season"))
    avg_year_zone = group_average(raw, by=("year", "zone"))
    avg_all = group_average(raw, by=("year", "season", "zone"))
    outputs += [
        avg_year.write_csv(out / "ingest" / "avg_year.csv"),
        avg_year_season.write_csv(out / "ingest" / "avg_year_season.csv"),
        avg_year_zone.write_csv(out / "ingest" / "avg_year_zone.csv"),
        avg_all.write_csv(out / "ingest" / "avg_year_season_zone.csv"),
    ]
    _group_boxplot(avg_year, "year", out / "ingest" / "avg_year.svg", "yearly averages")
    outputs.append(out / "ingest" / "avg_year.svg")
    for season in ("DJF", "MAM", "JJA", "SON"):
        rows = [r for r in avg_year_season.rows if r[1] == season]
        sub = Table(avg_year_season.columns, rows)
        if rows:
            _group_boxplot(sub, "year", out / "ingest" / f"avg_{season}.svg",
                           f"{season} averages")
            outputs.append(out / "ingest" / f"avg_{season}.svg")
    manifest.record("ingest", ingest_inputs, cfg_digest, outputs)

    # -- order ----------------------------------------------------------
    ordering = _ordering_of(config, panel.grids)
    order_path = gridorder.ordering_table(ordering, panel.grids).write_csv(
        out / "order" / "ordering.csv")
    panel = gridorder.reorder_panel(panel, ordering)
    panel_digest = sha256_array(panel.values)
    manifest.record("order", {"panel": panel_digest}, cfg_digest, [order_path])

    # -- svd -------------------------------------------------------------
    f = svd(panel.values)
    sv_table = Table(("index", "singular_value", "cumulative_share"))
    for k in range(f.s.size):
        sv_table.append(k + 1, float(f.s[k]), detrend.cumulative_share(f, k + 1))
    outputs = [sv_table.write_csv(out / "svd" / "singular_values.csv")]
    svgplot.line_svg(
        [("cumulative share", np.arange(1, f.s.size + 1),
          np.array([detrend.cumulative_share(f, k + 1) for k in range(f.s.size)]))],
        out / "svd" / "cumulative_share.svg", title="cumulative singular-value share")
    outputs.append(out / "svd" / "cumulative_share.svg")
    manifest.record("svd", {"panel": panel_digest}, cfg_digest, outputs)

    # -- strata ----------------------------------------------------------
    m_vals, m_means, d_vals, d_means = run_singular_vector_strata(f, panel.calendar)
    outputs = [
        m_vals.write_csv(out / "strata" / "monthly_components.csv"),
        m_means.write_csv(out / "strata" / "monthly_means.csv"),
        d_vals.write_csv(out / "strata" / "daytype_components.csv"),
        d_means.write_csv(out / "strata" / "daytype_means.csv"),
    ]
    comps = sorted(set(m_vals.column("component")))
    for comp in comps:
        rows = [r for r in m_vals.rows if r[0] == comp]
        groups = {}
        for _, month, value in rows:
            groups.setdefault(month, []).append(value)
        path = out / "strata" / f"monthly_component_{comp}.svg"
        svgplot.boxplot_svg([(m, groups[m]) for m in sorted(groups)], path,
                            title=f"left vector {comp} by month")
        outputs.append(path)
    manifest.record("strata", {"panel": panel_digest}, cfg_digest, outputs)

    # -- trim --------------------------------------------------------------
    trimmed, report = detrend.trim_svd(panel, config.trim_k, max_lag=config.acf_max_lag)
    outputs = [
        report.share_table().write_csv(out / "trim" / "trim_report.csv"),
        report.acf_table().write_csv(out / "trim" / "acf.csv"),
    ]
    lags = np.arange(report.acf_lags + 1)
    series = [(gid, lags, curve) for gid, curve
              in list(zip(report.grid_ids, report.acf_curves))[:12]]
    svgplot.line_svg(series, out / "trim" / "acf.svg", title="residual ACF")
    outputs.append(out / "trim" / "acf.svg")
    if config.write_panels:
        outputs.append(_panel_long_table(trimmed).write_csv(out / "trim" / "panel_S.csv"))
    manifest.record("trim", {"panel": panel_digest}, cfg_digest, outputs)

    # -- decompose ---------------------------------------------------------
    t_panel = detrend.build_T(panel, period=config.seasonal_period)
    outputs = []
    if config.write_panels:
        outputs.append(_panel_long_table(t_panel).write_csv(out / "decompose" / "panel_T.csv"))
    manifest.record("decompose", {"panel": panel_digest}, cfg_digest, outputs)

    # -- esd ----------------------------------------------------------------
    summaries = {}
    eig_groups = []
    for name, pan in (("D", panel), ("S", trimmed), ("T", t_panel)):
        corr = association.pearson_corr(pan)
        eigs = np.linalg.eigvalsh(corr.matrix)[::-1]
        summaries[name] = rmt.spectral_summary(eigs, n_obs=pan.n_days, p_dim=pan.n_grids)
        eig_groups.append((name, eigs))
    esd_summary = Table(("matrix", "n_obs", "p_dim", "aspect", "significant")
                        + tuple(f"q{k}" for k in range(0, 101, 10)))
    outputs = []
    for name in ("D", "S", "T"):
        s = summaries[name]
        esd_summary.append(name, s.n_obs, s.p_dim, s.aspect, s.significant_count,
                           *(float(q) for q in s.quantiles))
        eig_table = Table(("index", "eigenvalue"))
        for i, value in enumerate(s.eigenvalues):
            eig_table.append(i + 1, float(value))
        outputs.append(eig_table.write_csv(out / "esd" / f"eigenvalues_{name}.csv"))
    outputs.append(esd_summary.write_csv(out / "esd" / "summary.csv"))
    svgplot.boxplot_svg(eig_groups, out / "esd" / "eigenvalues.svg",
                        title="correlation eigenvalues")
    outputs.append(out / "esd" / "eigenvalues.svg")

    yearly = {}
    for name, pan in (("D", panel), ("S", trimmed)):
        series = run_yearly_esd(pan, threads=config.threads)
        yearly[name] = series
        outputs.append(series.tracks_table().write_csv(out / "esd" / f"yearly_tracks_{name}.csv"))
        groups = [(year, series.summaries[year].eigenvalues) for year in series.valid_years]
        if groups:
            svgplot.boxplot_svg(groups, out / "esd" / f"yearly_esd_{name}.svg",
                                title=f"yearly eigenvalues ({name})")
            outputs.append(out / "esd" / f"yearly_esd_{name}.svg")
    manifest.record("esd", {"panel": panel_digest}, cfg_digest, outputs)

    # -- mp ------------------------------------------------------------------
    outputs = []
    mp_table = Table(("matrix", "aspect", "lower", "upper", "significant"))
    for name, pan in (("D", panel), ("S", trimmed)):
        corr = association.pearson_corr(pan)
        summary = summaries[name]
        lo, hi = rmt.mp_support(summary.aspect)
        idx = rmt.significant_eigs(summary)
        mp_table.append(name, summary.aspect, lo, hi, int(idx.size))
        denoised = rmt.denoise(corr.matrix, idx)
        outputs.append(write_matrix_csv(out / "mp" / f"corr_{name}.csv",
                                        corr.matrix, corr.grid_ids))
        outputs.append(write_matrix_csv(out / "mp" / f"corr_{name}_denoised.csv",
                                        denoised, corr.grid_ids))
        svgplot.heatmap_svg(corr.matrix, out / "mp" / f"corr_{name}.svg",
                            lower=denoised, labels=corr.grid_ids,
                            title=f"correlations ({name}); lower triangle denoised")
        outputs.append(out / "mp" / f"corr_{name}.svg")
    outputs.append(mp_table.write_csv(out / "mp" / "support.csv"))
    manifest.record("mp", {"panel": panel_digest}, cfg_digest, outputs)

    # -- null-sv ---------------------------------------------------------------
    sv_null = rmt.simulate_sv_null(panel.n_days, panel.n_grids,
                                   reps=config.null_reps, seed=config.seed,
                                   level=level, threads=config.threads)
    outputs = []
    sv_null.to_csv(out / "nulls" / "sv_values.csv", out / "nulls" / "sv_critical.csv")
    outputs += [out / "nulls" / "sv_values.csv", out / "nulls" / "sv_critical.csv"]
    svgplot.histogram_svg(sv_null.pooled, out / "nulls" / "sv_null.svg",
                          title="singular-value null")
    outputs.append(out / "nulls" / "sv_null.svg")
    sig_table = Table(("index", "singular_value", "significant"))
    for i, value in enumerate(f.s):
        sig_table.append(i + 1, float(value),
                         int(value < sv_null.lower or value > sv_null.upper))
    outputs.append(sig_table.write_csv(out / "svd" / "sv_significance.csv"))
    manifest.record("null-sv", {"panel": panel_digest}, cfg_digest, outputs)

    # -- gsvd sweeps (with simulated nulls) -------------------------------------
    outputs = []
    guard_errors = Table(("mode", "matrix", "pair", "message"))
    for mode, tag in (("year-pairs", "yearpairs"), ("transposed-half-years", "halfyears")):
        for name, pan in (("D", panel), ("S", trimmed)):
            try:
                sweep = run_gsvd_sweep(pan, mode, null_reps=config.null_reps,
                                       seed=config.seed, level=level,
                                       threads=config.threads)
            except ValidationError as exc:
                guard_errors.append(mode, name, "*", str(exc))
                continue
            outputs.append(sweep.table().write_csv(out / "gsvd" / f"{tag}_{name}.csv"))
            for label, message in sweep.errors.items():
                guard_errors.append(mode, name, label, message)
            finite = [(label, np.log(gsv[np.isfinite(gsv) & (gsv > 0)]))
                      for label, gsv, _dims in sweep.pairs]
            finite = [(label, vals) for label, vals in finite if vals.size]
            if finite:
                hlines = []
                for null in sweep.nulls.values():
                    hlines += [np.log(null.lower), np.log(null.upper)]
                svgplot.boxplot_svg(finite, out / "gsvd" / f"{tag}_{name}.svg",
                                    hlines=hlines, title=f"log GSV {mode} ({name})")
                outputs.append(out / "gsvd" / f"{tag}_{name}.svg")
    outputs.append(guard_errors.write_csv(out / "gsvd" / "guard_errors.csv"))
    manifest.record("gsvd", {"panel": panel_digest}, cfg_digest, outputs)

    # -- null-gsv (permutation variant on the first year pair of S) -------------
    years = sorted(set(trimmed.calendar.years.tolist()))
    outputs = []
    if len(years) >= 2:
        d1 = slice_panel(trimmed, year=years[0]).values
        d2 = slice_panel(trimmed, year=years[1]).values
        if min(d1.shape[0], d2.shape[0]) >= d1.shape[1]:
            perm_null = rmt.permutation_gsv_null(
                d1, d2, reps=config.null_reps, seed=config.seed, level=level,
                scheme=config.perm_scheme, threads=config.threads)
            perm_null.to_csv(out / "nulls" / "gsv_perm_values.csv",
                             out / "nulls" / "gsv_perm_critical.csv")
            outputs += [out / "nulls" / "gsv_perm_values.csv",
                        out / "nulls" / "gsv_perm_critical.csv"]
    manifest.record("null-gsv", {"panel": panel_digest}, cfg_digest, outputs)

    # -- sb ----------------------------------------------------------------------
    outputs = []
    sb_results_by_kind: dict[str, list[association.SbResult]] = {}
    sb_errors = Table(("weight_kind", "slice", "message"))
    for kind in ("adjacency", "expdecay"):
        weights = _weights_of(config, trimmed.grids, kind=kind)
        outputs.append(write_matrix_csv(out / "sb" / f"weights_{kind}.csv",
                                        weights.w, trimmed.grids.grid_ids))
        yearly_sb, errors = association.sb_series(
            trimmed, weights, by="year", estimator=config.bergsma_estimator)
        sb_results_by_kind[kind] = yearly_sb
        for desc, message in errors.items():
            sb_errors.append(kind, desc, message)
        monthly_sb, errors = association.sb_series(
            trimmed, weights, by="month", estimator=config.bergsma_estimator)
        for desc, message in errors.items():
            sb_errors.append(kind, desc, message)
        zone_sb, errors = association.sb_series(
            trimmed, weights, by=("year", "zone"), estimator=config.bergsma_estimator)
        for desc, message in errors.items():
            sb_errors.append(kind, desc, message)
        outputs.append(association.sb_table(yearly_sb).write_csv(
            out / "sb" / f"sb_yearly_{kind}.csv"))
        outputs.append(association.sb_table(monthly_sb).write_csv(
            out / "sb" / f"sb_monthly_{kind}.csv"))
        outputs.append(association.sb_table(zone_sb).write_csv(
            out / "sb" / f"sb_year_zone_{kind}.csv"))
    if any(sb_results_by_kind.values()):
        series = [(kind, np.array([int(r.slice_desc) for r in results], dtype=float),
                   np.array([r.value for r in results]))
                  for kind, results in sb_results_by_kind.items() if results]
        svgplot.line_svg(series, out / "sb" / "sb_yearly.svg", title="yearly spatial Bergsma")
        outputs.append(out / "sb" / "sb_yearly.svg")
    outputs.append(sb_errors.write_csv(out / "sb" / "errors.csv"))
    manifest.record("sb", {"panel": panel_digest}, cfg_digest, outputs)

    # -- enso ----------------------------------------------------------------------
    outputs = []
    if config.enso_csv:
        enso = load_enso(config.enso_csv, years=sorted(set(calendar.years.tolist())))
        for kind, results in sb_results_by_kind.items():
            if not results:
                continue
            table, groups = run_enso_stratification(results, enso)
            outputs.append(table.write_csv(out / "enso" / f"sb_by_phase_{kind}.csv"))
            svgplot.boxplot_svg(sorted(groups.items()), out / "enso" / f"sb_by_phase_{kind}.svg",
                                title=f"spatial Bergsma by ENSO phase ({kind})")
            outputs.append(out / "enso" / f"sb_by_phase_{kind}.svg")
        manifest.record("enso", {"panel": panel_digest,
                                 "enso_csv": sha256_file(config.enso_csv)},
                        cfg_digest, outputs)

    # -- changepoint ------------------------------------------------------------------
    tracks: dict[str, np.ndarray] = {}
    label_years = yearly["S"].valid_years
    for name in ("median", "top", "q50", "significant_count"):
        tracks[f"esd_S_{name}"] = yearly["S"].track(name)
    for kind, results in sb_results_by_kind.items():
        if results:
            tracks[f"sb_{kind}"] = np.array([r.value for r in results])
    usable = {name: values for name, values in tracks.items() if len(values) >= 8}
    for name in tracks.keys() - usable.keys():
        log.warning("changepoint: track %s too short, skipped", name)
    change_table = run_change_summary(usable, labels=label_years)
    path = change_table.write_csv(out / "changepoint" / "changes.csv")
    manifest.record("changepoint", {"panel": panel_digest}, cfg_digest, [path])

    # -- spatial summaries ---------------------------------------------------------
    corr_s = association.pearson_corr(trimmed)
    outputs = []
    neighbor = association.max_corr_neighbor(corr_s, trimmed.grids)
    outputs.append(neighbor.write_csv(out / "spatial" / "max_corr.csv"))
    svgplot.histogram_svg(np.asarray(neighbor.column("dlat"), dtype=float),
                          out / "spatial" / "max_corr_dlat.svg", bins=11,
                          title="lat difference to max-correlation neighbor")
    svgplot.histogram_svg(np.asarray(neighbor.column("dlon"), dtype=float),
                          out / "spatial" / "max_corr_dlon.svg", bins=11,
                          title="lon difference to max-correlation neighbor")
    outputs += [out / "spatial" / "max_corr_dlat.svg", out / "spatial" / "max_corr_dlon.svg"]
    for grid_id in [g.strip() for g in config.focus_grids.split(",") if g.strip()]:
        field_table = association.corr_field(corr_s, grid_id, trimmed.grids)
        outputs.append(field_table.write_csv(out / "spatial" / f"field_{grid_id}.csv"))
        lats = sorted(set(field_table.column("lat")))
        lons = sorted(set(field_table.column("lon")))
        grid_matrix = np.full((len(lats), len(lons)), np.nan)
        for lat, lon, value in field_table.rows:
            grid_matrix[lats.index(lat), lons.index(lon)] = value
        svgplot.heatmap_svg(grid_matrix, out / "spatial" / f"field_{grid_id}.svg",
                            title=f"correlation field of {grid_id}")
        outputs.append(out / "spatial" / f"field_{grid_id}.svg")
    manifest.record("spatial", {"panel": panel_digest}, cfg_digest, outputs)

    return out
