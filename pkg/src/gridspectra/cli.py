"""Batch CLI.

Subcommands: ingest, order, svd, trim, decompose, esd, mp, gsvd, null-sv,
null-gsv, bergsma, sb, enso, strata, changepoint, report.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import association, detrend, gridorder, pipeline, rmt, svgplot
from .config import RunConfig, load_config_file, resolve_config
from .errors import NumericalError, ValidationError
from .ingest import (
    build_calendar,
    group_average,
    load_daily_values,
    load_enso,
    load_grid_metadata,
    select_complete,
    slice_panel,
)
from .linalg import svd
from .tables import Table, write_matrix_csv

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_CONFIG_FLAGS = (
    ("--grid-csv", "grid_csv", str),
    ("--values-csv", "values_csv", str),
    ("--enso-csv", "enso_csv", str),
    ("--start", "start", str),
    ("--end", "end", str),
    ("--out", "out_dir", str),
    ("--seed", "seed", int),
    ("--threads", "threads", int),
    ("--log-level", "log_level", str),
    ("--trim-k", "trim_k", int),
    ("--seasonal-period", "seasonal_period", int),
    ("--acf-max-lag", "acf_max_lag", int),
    ("--level", "level", float),
    ("--reps", "null_reps", int),
    ("--ordering", "ordering", str),
    ("--spiral-first-step", "spiral_first_step", str),
    ("--weight-kind", "weight_kind", str),
    ("--weight-scale", "weight_scale", float),
    ("--adjacency", "adjacency", str),
    ("--estimator", "bergsma_estimator", str),
    ("--bergsma-max-rows", "bergsma_max_rows", int),
    ("--perm-scheme", "perm_scheme", str),
    ("--focus-grids", "focus_grids", str),
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="flat key = value config file")
    for flag, dest, typ in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None)
    parser.add_argument("--bergsma-allow-large", dest="bergsma_allow_large",
                        action="store_const", const=True, default=None)
    parser.add_argument("--write-panels", dest="write_panels",
                        action="store_const", const=True, default=None)
    parser.add_argument("--no-write-panels", dest="write_panels",
                        action="store_const", const=False)


def _config_from_args(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    cli_values = {}
    names = {dest for _, dest, _ in _CONFIG_FLAGS} | {"bergsma_allow_large", "write_panels"}
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            cli_values[name] = value
    return resolve_config(file_values, cli_values).validate()


def _load_panel(config: RunConfig, apply_ordering: bool = True):
    config.validate(require_inputs=True)
    calendar = build_calendar(config.start, config.end,
                              december_to_next_djf=config.december_to_next_djf)
    grids = load_grid_metadata(config.grid_csv)
    raw = load_daily_values(config.values_csv, grids, calendar)
    panel = select_complete(raw)
    if panel.n_grids == 0:
        raise ValidationError("no complete columns in the input panel")
    if apply_ordering:
        ordering = pipeline._ordering_of(config, panel.grids)
        panel = gridorder.reorder_panel(panel, ordering)
    return raw, panel


def _select_matrix(config: RunConfig, panel, which: str):
    if which == "D":
        return panel
    if which == "S":
        trimmed, _report = detrend.trim_svd(panel, config.trim_k,
                                            max_lag=config.acf_max_lag)
        return trimmed
    if which == "T":
        return detrend.build_T(panel, period=config.seasonal_period)
    raise ValidationError(f"unknown matrix {which!r}; choose D, S or T")


def _out(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_ingest(args) -> None:
    config = _config_from_args(args)
    raw, panel = _load_panel(config, apply_ordering=False)
    out = _out(config)
    pipeline._grid_table(panel.grids).write_csv(out / "grids_complete.csv")
    pipeline._calendar_table(panel.calendar).write_csv(out / "calendar.csv")
    if config.write_panels:
        pipeline._panel_long_table(panel).write_csv(out / "panel.csv")
    for by, name in ((("year",), "avg_year"), (("year", "season"), "avg_year_season"),
                     (("year", "zone"), "avg_year_zone"),
                     (("year", "season", "zone"), "avg_year_season_zone")):
        group_average(raw, by=by).write_csv(out / f"{name}.csv")
    print(f"ingested {panel.n_days} days x {panel.n_grids} complete grids "
          f"({raw.n_grids - panel.n_grids} dropped)")


def _cmd_order(args) -> None:
    config = _config_from_args(args)
    if not config.grid_csv:
        raise ValidationError("order needs --grid-csv")
    grids = load_grid_metadata(config.grid_csv)
    ordering = pipeline._ordering_of(config, grids)
    path = gridorder.ordering_table(ordering, grids).write_csv(_out(config) / "ordering.csv")
    print(f"wrote {path} ({ordering.tag})")


def _cmd_svd(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    f = svd(panel.values)
    out = _out(config)
    table = Table(("index", "singular_value", "cumulative_share"))
    for k in range(f.s.size):
        table.append(k + 1, float(f.s[k]), detrend.cumulative_share(f, k + 1))
    table.write_csv(out / "singular_values.csv")
    if args.factors:
        f.to_csv(out, stem="svd")
    print(f"wrote {out / 'singular_values.csv'}")


def _cmd_trim(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    out = _out(config)
    if args.sweep:
        lo, _, hi = args.sweep.partition(":")
        table = detrend.trim_sweep(panel, range(int(lo), int(hi) + 1),
                                   max_lag=config.acf_max_lag)
        table.write_csv(out / "trim_sweep.csv")
        print(f"wrote {out / 'trim_sweep.csv'}")
        return
    trimmed, report = detrend.trim_svd(panel, config.trim_k, max_lag=config.acf_max_lag)
    report.share_table().write_csv(out / "trim_report.csv")
    report.acf_table().write_csv(out / "acf.csv")
    if config.write_panels:
        pipeline._panel_long_table(trimmed).write_csv(out / "panel_S.csv")
    print(f"trimmed k={config.trim_k}, cumulative share {report.cumulative_share:.4f}")


def _cmd_decompose(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    t_panel = detrend.build_T(panel, period=config.seasonal_period)
    out = _out(config)
    if config.write_panels:
        pipeline._panel_long_table(t_panel).write_csv(out / "panel_T.csv")
    print(f"decomposed; {t_panel.n_days} interior rows retained of {panel.n_days}")


def _cmd_esd(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    target = _select_matrix(config, panel, args.matrix)
    out = _out(config)
    if args.yearly:
        series = pipeline.run_yearly_esd(target, threads=config.threads)
        series.tracks_table().write_csv(out / f"yearly_tracks_{args.matrix}.csv")
        print(f"wrote {out / f'yearly_tracks_{args.matrix}.csv'}")
        return
    corr = association.pearson_corr(target)
    eigs = np.linalg.eigvalsh(corr.matrix)[::-1]
    summary = rmt.spectral_summary(eigs, n_obs=target.n_days, p_dim=target.n_grids)
    table = Table(("index", "eigenvalue"))
    for i, value in enumerate(summary.eigenvalues):
        table.append(i + 1, float(value))
    table.write_csv(out / f"eigenvalues_{args.matrix}.csv")
    print(f"{args.matrix}: {summary.significant_count} MP-significant eigenvalues "
          f"of {summary.p_dim}")


def _cmd_mp(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    target = _select_matrix(config, panel, args.matrix)
    corr = association.pearson_corr(target)
    eigs = np.linalg.eigvalsh(corr.matrix)[::-1]
    summary = rmt.spectral_summary(eigs, n_obs=target.n_days, p_dim=target.n_grids)
    idx = rmt.significant_eigs(summary)
    denoised = rmt.denoise(corr.matrix, idx)
    out = _out(config)
    lo, hi = rmt.mp_support(summary.aspect)
    table = Table(("matrix", "aspect", "lower", "upper", "significant"))
    table.append(args.matrix, summary.aspect, lo, hi, int(idx.size))
    table.write_csv(out / "mp_support.csv")
    write_matrix_csv(out / f"corr_{args.matrix}.csv", corr.matrix, corr.grid_ids)
    write_matrix_csv(out / f"corr_{args.matrix}_denoised.csv", denoised, corr.grid_ids)
    svgplot.heatmap_svg(corr.matrix, out / f"corr_{args.matrix}.svg", lower=denoised,
                        labels=corr.grid_ids,
                        title=f"correlations ({args.matrix}); lower triangle denoised")
    print(f"{args.matrix}: support [{lo:.4f}, {hi:.4f}], {idx.size} significant")


def _cmd_gsvd(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    target = _select_matrix(config, panel, args.matrix)
    sweep = pipeline.run_gsvd_sweep(target, args.mode, null_reps=config.null_reps,
                                    seed=config.seed, level=config.level,
                                    threads=config.threads)
    out = _out(config)
    tag = "yearpairs" if args.mode == "year-pairs" else "halfyears"
    sweep.table().write_csv(out / f"{tag}_{args.matrix}.csv")
    if sweep.errors:
        errors = Table(("pair", "message"))
        for label, message in sweep.errors.items():
            errors.append(label, message)
        errors.write_csv(out / f"{tag}_{args.matrix}_errors.csv")
    print(f"{len(sweep.pairs)} pairs decomposed, {len(sweep.errors)} guard violations")


def _cmd_null_sv(args) -> None:
    config = _config_from_args(args)
    null = rmt.simulate_sv_null(args.n, args.p, reps=config.null_reps,
                                seed=config.seed, level=config.level,
                                threads=config.threads)
    out = _out(config)
    null.to_csv(out / "sv_values.csv", out / "sv_critical.csv")
    svgplot.histogram_svg(null.pooled, out / "sv_null.svg", title="singular-value null")
    print(f"pooled {null.samples.size} values; band [{null.lower:.4f}, {null.upper:.4f}]")


def _cmd_null_gsv(args) -> None:
    config = _config_from_args(args)
    out = _out(config)
    if args.method == "sim":
        if args.n1 is None or args.n2 is None or args.p is None:
            raise ValidationError("null-gsv --method sim needs --n1, --n2 and --p")
        null = rmt.simulate_gsv_null(args.n1, args.n2, args.p, reps=config.null_reps,
                                     seed=config.seed, level=config.level,
                                     threads=config.threads)
        null.to_csv(out / "gsv_sim_values.csv", out / "gsv_sim_critical.csv")
    else:
        if args.year1 is None or args.year2 is None:
            raise ValidationError("null-gsv --method perm needs --year1 and --year2")
        _, panel = _load_panel(config)
        target = _select_matrix(config, panel, args.matrix)
        d1 = slice_panel(target, year=args.year1).values
        d2 = slice_panel(target, year=args.year2).values
        null = rmt.permutation_gsv_null(d1, d2, reps=config.null_reps,
                                        seed=config.seed, level=config.level,
                                        scheme=config.perm_scheme,
                                        threads=config.threads)
        null.to_csv(out / "gsv_perm_values.csv", out / "gsv_perm_critical.csv")
    print(f"pooled {null.samples.size} values; band [{null.lower:.4f}, {null.upper:.4f}]")


def _cmd_bergsma(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    target = _select_matrix(config, panel, args.matrix)
    target = slice_panel(target, year=args.year, month=args.month,
                         season=args.season, zone=args.zone)
    corr = association.bergsma_corr_matrix(
        target, estimator=config.bergsma_estimator,
        max_rows=config.bergsma_max_rows,
        allow_large=bool(config.bergsma_allow_large))
    out = _out(config)
    write_matrix_csv(out / "bergsma.csv", corr.matrix, corr.grid_ids)
    svgplot.heatmap_svg(corr.matrix, out / "bergsma.svg", labels=corr.grid_ids,
                        title="Bergsma correlations")
    print(f"wrote {out / 'bergsma.csv'} ({corr.p}x{corr.p}, "
          f"{len(corr.failed_pairs)} failed pairs)")


def _cmd_sb(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    target = _select_matrix(config, panel, args.matrix)
    weights = pipeline._weights_of(config, target.grids)
    by = ("year", "zone") if args.by == "year-zone" else args.by
    results, errors = association.sb_series(target, weights, by=by,
                                            estimator=config.bergsma_estimator)
    out = _out(config)
    association.sb_table(results).write_csv(out / f"sb_{args.by}.csv")
    if errors:
        table = Table(("slice", "message"))
        for desc, message in errors.items():
            table.append(desc, message)
        table.write_csv(out / f"sb_{args.by}_errors.csv")
    print(f"{len(results)} slices evaluated, {len(errors)} failures")


def _cmd_enso(args) -> None:
    config = _config_from_args(args)
    if not config.enso_csv:
        raise ValidationError("enso needs --enso-csv")
    _, panel = _load_panel(config)
    target = _select_matrix(config, panel, args.matrix)
    years = sorted(set(target.calendar.years.tolist()))
    enso = load_enso(config.enso_csv, years=years)
    weights = pipeline._weights_of(config, target.grids)
    results, _errors = association.sb_series(target, weights, by="year",
                                             estimator=config.bergsma_estimator)
    table, groups = pipeline.run_enso_stratification(results, enso)
    out = _out(config)
    table.write_csv(out / "sb_by_phase.csv")
    svgplot.boxplot_svg(sorted(groups.items()), out / "sb_by_phase.svg",
                        title="spatial Bergsma by ENSO phase")
    print(f"wrote {out / 'sb_by_phase.csv'}")


def _cmd_strata(args) -> None:
    config = _config_from_args(args)
    _, panel = _load_panel(config)
    f = svd(panel.values)
    m_vals, m_means, d_vals, d_means = pipeline.run_singular_vector_strata(f, panel.calendar)
    out = _out(config)
    m_vals.write_csv(out / "monthly_components.csv")
    m_means.write_csv(out / "monthly_means.csv")
    d_vals.write_csv(out / "daytype_components.csv")
    d_means.write_csv(out / "daytype_means.csv")
    print(f"wrote strata tables to {out}")


def _cmd_changepoint(args) -> None:
    config = _config_from_args(args)
    table = Table.read_csv(args.input)
    if args.value_column not in table.columns:
        raise ValidationError(f"{args.input}: no column {args.value_column!r}")
    values = np.array([float(v) for v in table.column(args.value_column)])
    labels = (table.column(args.label_column)
              if args.label_column in table.columns else None)
    report = pipeline.run_change_summary({args.value_column: values}, labels=labels)
    out = _out(config)
    report.write_csv(out / "changes.csv")
    print(f"wrote {out / 'changes.csv'}")


def _cmd_report(args) -> None:
    config = _config_from_args(args)
    out = pipeline.run_report(config)
    print(f"report written to {out}")


def build_parser() -> _Parser:
    parser = _Parser(prog="gridspectra", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, configure=None):
        p = sub.add_parser(name)
        _add_common(p)
        if configure:
            configure(p)
        p.set_defaults(handler=handler)
        return p

    add("ingest", _cmd_ingest)
    add("order", _cmd_order)
    add("svd", _cmd_svd, lambda p: p.add_argument("--factors", action="store_true"))

    def trim_opts(p):
        p.add_argument("--sweep", default=None, metavar="LO:HI")

    add("trim", _cmd_trim, trim_opts)
    add("decompose", _cmd_decompose)

    def esd_opts(p):
        p.add_argument("--matrix", default="D", choices=("D", "S", "T"))
        p.add_argument("--yearly", action="store_true")

    add("esd", _cmd_esd, esd_opts)
    add("mp", _cmd_mp,
        lambda p: p.add_argument("--matrix", default="D", choices=("D", "S")))

    def gsvd_opts(p):
        p.add_argument("--matrix", default="S", choices=("D", "S"))
        p.add_argument("--mode", default="year-pairs",
                       choices=("year-pairs", "transposed-half-years"))

    add("gsvd", _cmd_gsvd, gsvd_opts)

    def null_sv_opts(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--p", type=int, required=True)

    add("null-sv", _cmd_null_sv, null_sv_opts)

    def null_gsv_opts(p):
        p.add_argument("--method", default="sim", choices=("sim", "perm"))
        p.add_argument("--n1", type=int, default=None)
        p.add_argument("--n2", type=int, default=None)
        p.add_argument("--p", type=int, default=None)
        p.add_argument("--year1", type=int, default=None)
        p.add_argument("--year2", type=int, default=None)
        p.add_argument("--matrix", default="S", choices=("D", "S"))

    add("null-gsv", _cmd_null_gsv, null_gsv_opts)

    def bergsma_opts(p):
        p.add_argument("--matrix", default="S", choices=("D", "S", "T"))
        p.add_argument("--year", type=int, default=None)
        p.add_argument("--month", type=int, default=None)
        p.add_argument("--season", default=None)
        p.add_argument("--zone", type=int, default=None)

    add("bergsma", _cmd_bergsma, bergsma_opts)

    def sb_opts(p):
        p.add_argument("--matrix", default="S", choices=("D", "S", "T"))
        p.add_argument("--by", default="year", choices=("year", "month", "year-zone"))

    add("sb", _cmd_sb, sb_opts)
    add("enso", _cmd_enso,
        lambda p: p.add_argument("--matrix", default="S", choices=("D", "S")))
    add("strata", _cmd_strata)

    def changepoint_opts(p):
        p.add_argument("--input", required=True)
        p.add_argument("--value-column", default="value")
        p.add_argument("--label-column", default="slice")

    add("changepoint", _cmd_changepoint, changepoint_opts)
    add("report", _cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = getattr(args, "log_level", None) or "INFO"
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
