"""Loading and shaping of gridded daily panels.

Canonical CSV formats (UTF-8, headers mandatory):

* grid metadata: ``grid_id,lat,lon,zone`` - one row per cell, zone in 1..6
* daily values:  ``date,grid_id,value`` - long format, ``YYYY-MM-DD`` dates,
  missing cells simply absent
* ENSO phases:   ``year,phase`` with phase in {ElNino, LaNina, Neutral}

A :class:`Panel` is immutable after construction (its value array is marked
read-only) and may be shared across threads.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .tables import Table

log = logging.getLogger(__name__)

SEASONS = ("DJF", "MAM", "JJA", "SON")
ENSO_PHASES = ("ElNino", "LaNina", "Neutral")
ZONE_CODES = (1, 2, 3, 4, 5, 6)

_SEASON_OF_MONTH = {
    12: "DJF", 1: "DJF", 2: "DJF",
    3: "MAM", 4: "MAM", 5: "MAM",
    6: "JJA", 7: "JJA", 8: "JJA",
    9: "SON", 10: "SON", 11: "SON",
}


@dataclass(frozen=True)
class GridCell:
    """One spatial cell: opaque id, coordinates in degrees, climate-zone code."""

    grid_id: str
    lat: float
    lon: float
    zone: int
    complete: bool = True


@dataclass(frozen=True, eq=False)
class GridSet:
    """Validated, ordered collection of grid cells."""

    cells: tuple[GridCell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        seen_ids: set[str] = set()
        seen_coords: set[tuple[float, float]] = set()
        for cell in self.cells:
            if cell.zone not in ZONE_CODES:
                raise ValidationError(f"grid {cell.grid_id}: zone {cell.zone} outside 1..6")
            if cell.grid_id in seen_ids:
                raise ValidationError(f"duplicate grid_id {cell.grid_id}")
            coord = (cell.lat, cell.lon)
            if coord in seen_coords:
                raise ValidationError(f"duplicate coordinates {coord} ({cell.grid_id})")
            seen_ids.add(cell.grid_id)
            seen_coords.add(coord)

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __getitem__(self, i: int) -> GridCell:
        return self.cells[i]

    @property
    def grid_ids(self) -> tuple[str, ...]:
        return tuple(c.grid_id for c in self.cells)

    @property
    def lats(self) -> np.ndarray:
        return np.array([c.lat for c in self.cells], dtype=float)

    @property
    def lons(self) -> np.ndarray:
        return np.array([c.lon for c in self.cells], dtype=float)

    @property
    def zones(self) -> np.ndarray:
        return np.array([c.zone for c in self.cells], dtype=int)

    def index_of(self, grid_id: str) -> int:
        for i, cell in enumerate(self.cells):
            if cell.grid_id == grid_id:
                return i
        raise ValidationError(f"unknown grid_id {grid_id}")

    def subset(self, indices) -> "GridSet":
        return GridSet(tuple(self.cells[int(i)] for i in indices))


@dataclass(frozen=True, eq=False)
class CalendarIndex:
    """Per-day tags for an ordered (not necessarily contiguous) set of dates.

    December is assigned to the DJF season-year of the following January
    (configurable); days whose season-year falls outside the window carry
    ``season_year = -1`` and are excluded from seasonal grouping.
    """

    dates: np.ndarray
    years: np.ndarray
    months: np.ndarray
    days: np.ndarray
    season: np.ndarray
    season_year: np.ndarray
    weekend: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        if dates.ndim != 1 or dates.size == 0:
            raise ValidationError("calendar needs at least one date")
        if np.any(np.diff(dates.astype("int64")) <= 0):
            raise ValidationError("calendar dates must be strictly increasing")
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        for name in ("years", "months", "days", "season", "season_year", "weekend"):
            arr = getattr(self, name)
            arr.setflags(write=False)
            if arr.shape != (self.n_days,):
                raise ValidationError(f"calendar field {name} has wrong length")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def start_date(self) -> dt.date:
        return self.dates[0].astype(dt.date)

    @property
    def end_date(self) -> dt.date:
        return self.dates[-1].astype(dt.date)

    def day_index(self, date: dt.date) -> int:
        target = np.datetime64(date)
        pos = int(np.searchsorted(self.dates, target))
        if pos >= self.n_days or self.dates[pos] != target:
            raise ValidationError(f"date {date} outside window")
        return pos

    def subset(self, row_indices) -> "CalendarIndex":
        idx = np.asarray(row_indices, dtype=int)
        if idx.size == 0:
            raise ValidationError("empty calendar selection")
        return CalendarIndex(
            dates=self.dates[idx].copy(),
            years=self.years[idx].copy(),
            months=self.months[idx].copy(),
            days=self.days[idx].copy(),
            season=self.season[idx].copy(),
            season_year=self.season_year[idx].copy(),
            weekend=self.weekend[idx].copy(),
        )


def _as_date(value) -> dt.date:
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError as exc:
        raise ValidationError(f"invalid ISO date {value!r}") from exc


def build_calendar(start_date, end_date, december_to_next_djf: bool = True) -> CalendarIndex:
    """Tag every day in [start_date, end_date] with year, month, season,
    season-year and weekday/weekend; Gregorian leap rules apply."""
    start = _as_date(start_date)
    end = _as_date(end_date)
    if start > end:
        raise ValidationError(f"start {start} after end {end}")
    days = np.arange(np.datetime64(start), np.datetime64(end) + 1)
    years = days.astype("datetime64[Y]").astype(int) + 1970
    months = days.astype("datetime64[M]").astype(int) % 12 + 1
    dom = (days - days.astype("datetime64[M]")).astype(int) + 1
    # 1970-01-01 is a Thursday; Monday == 0 in this convention.
    weekday = (days.astype("datetime64[D]").astype(int) + 3) % 7
    weekend = weekday >= 5
    season = np.array([_SEASON_OF_MONTH[m] for m in months], dtype="<U3")
    if december_to_next_djf:
        season_year = np.where(months == 12, years + 1, years)
    else:
        season_year = np.where(months <= 2, years - 1, years)
    season_year = np.where(
        (season_year < years.min()) | (season_year > years.max()), -1, season_year
    )
    return CalendarIndex(
        dates=days,
        years=years.astype(int),
        months=months.astype(int),
        days=dom.astype(int),
        season=season,
        season_year=season_year.astype(int),
        weekend=weekend,
    )


@dataclass(frozen=True, eq=False)
class Panel:
    """Day x grid value matrix with its calendar and grid metadata.

    ``values`` may contain NaN markers until :func:`select_complete` is
    applied; the array is read-only once the panel is constructed.
    """

    values: np.ndarray
    calendar: CalendarIndex
    grids: GridSet
    order_tag: str = "input"
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError("panel values must be a 2-d matrix")
        if values.shape[0] != self.calendar.n_days:
            raise ValidationError(
                f"panel has {values.shape[0]} rows but calendar covers "
                f"{self.calendar.n_days} days"
            )
        if values.shape[1] != len(self.grids):
            raise ValidationError(
                f"panel has {values.shape[1]} columns but grid set has {len(self.grids)}"
            )
        if not values.flags.writeable:
            object.__setattr__(self, "values", values)
        else:
            values = values.copy()
            values.setflags(write=False)
            object.__setattr__(self, "values", values)

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def n_grids(self) -> int:
        return self.values.shape[1]

    @property
    def missing_count(self) -> int:
        return int(np.isnan(self.values).sum())


def _read_csv_rows(path, expected_header: tuple[str, ...]):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != expected_header:
            raise ValidationError(
                f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not field.strip() for field in row):
                continue
            if len(row) != len(expected_header):
                raise ValidationError(f"{path}:{lineno}: expected {len(expected_header)} fields")
            yield lineno, row


def _parse_float(text: str, context: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ValidationError(f"{context}: not a number: {text!r}") from exc
    if not np.isfinite(value):
        raise ValidationError(f"{context}: non-finite value {text!r}")
    return value


def load_grid_metadata(path) -> GridSet:
    """Read the grid metadata CSV into a validated :class:`GridSet`."""
    cells = []
    for lineno, row in _read_csv_rows(path, ("grid_id", "lat", "lon", "zone")):
        grid_id = row[0].strip()
        if not grid_id:
            raise ValidationError(f"{path}:{lineno}: empty grid_id")
        lat = _parse_float(row[1], f"{path}:{lineno} lat")
        lon = _parse_float(row[2], f"{path}:{lineno} lon")
        try:
            zone = int(row[3])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: zone must be an integer") from exc
        cells.append(GridCell(grid_id=grid_id, lat=lat, lon=lon, zone=zone))
    if not cells:
        raise ValidationError(f"{path}: no grid rows")
    return GridSet(tuple(cells))


def load_daily_values(path, grids: GridSet, calendar: CalendarIndex) -> Panel:
    """Read the long-format daily values CSV into a raw panel.

    Cells with no row stay NaN; duplicate (date, grid) rows, unknown grids and
    out-of-window dates are errors.
    """
    values = np.full((calendar.n_days, len(grids)), np.nan)
    col_of = {cell.grid_id: i for i, cell in enumerate(grids)}
    for lineno, row in _read_csv_rows(path, ("date", "grid_id", "value")):
        try:
            date = dt.date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: bad date {row[0]!r}") from exc
        grid_id = row[1].strip()
        if grid_id not in col_of:
            raise ValidationError(f"{path}:{lineno}: unknown grid_id {grid_id}")
        day = calendar.day_index(date)
        col = col_of[grid_id]
        if not np.isnan(values[day, col]):
            raise ValidationError(f"{path}:{lineno}: duplicate ({date}, {grid_id})")
        values[day, col] = _parse_float(row[2], f"{path}:{lineno} value")
    complete = ~np.isnan(values).any(axis=0)
    cells = tuple(
        replace(cell, complete=bool(flag)) for cell, flag in zip(grids, complete)
    )
    return Panel(values=values, calendar=calendar, grids=GridSet(cells), order_tag="input")


def select_complete(panel: Panel) -> Panel:
    """Drop every column with at least one missing day. Idempotent."""
    keep = ~np.isnan(panel.values).any(axis=0)
    notes = panel.notes
    if not keep.any():
        notes = notes + ("no complete columns survived",)
        log.warning("select_complete: no complete columns survived")
    cells = tuple(
        replace(cell, complete=True) for cell, flag in zip(panel.grids, keep) if flag
    )
    return Panel(
        values=panel.values[:, keep],
        calendar=panel.calendar,
        grids=GridSet(cells),
        order_tag=panel.order_tag,
        notes=notes,
    )


def slice_panel(
    panel: Panel,
    year: int | None = None,
    month: int | None = None,
    season: str | None = None,
    zone: int | None = None,
) -> Panel:
    """Restrict a panel by temporal selectors (rows) and/or zone (columns).

    ``season`` together with ``year`` selects the season-year (so DJF of year
    y includes December of y-1); ``season`` alone selects all matching days.
    """
    cal = panel.calendar
    row_mask = np.ones(panel.n_days, dtype=bool)
    if season is not None:
        if season not in SEASONS:
            raise ValidationError(f"unknown season {season!r}")
        row_mask &= cal.season == season
        if year is not None:
            row_mask &= cal.season_year == year
    elif year is not None:
        row_mask &= cal.years == year
    if month is not None:
        if not 1 <= int(month) <= 12:
            raise ValidationError(f"month {month} outside 1..12")
        row_mask &= cal.months == int(month)

    values = panel.values
    grids = panel.grids
    if zone is not None:
        if zone not in ZONE_CODES:
            raise ValidationError(f"zone {zone} outside 1..6")
        col_mask = panel.grids.zones == zone
        if not col_mask.any():
            raise ValidationError(f"no grids in zone {zone}")
        values = values[:, col_mask]
        grids = panel.grids.subset(np.nonzero(col_mask)[0])

    if not row_mask.any():
        raise ValidationError("empty temporal selection")
    rows = np.nonzero(row_mask)[0]
    return Panel(
        values=values[rows],
        calendar=cal.subset(rows),
        grids=grids,
        order_tag=panel.order_tag,
        notes=panel.notes,
    )


_GROUP_KEYS = {
    ("year",),
    ("year", "season"),
    ("year", "zone"),
    ("year", "season", "zone"),
}


def group_average(panel: Panel, by=("year",)) -> Table:
    """Per-(group, grid) means over available (non-NaN) days, as a tidy table.

    Seasonal groups use the season-year convention; days with no valid
    season-year are excluded. Output rows are sorted by group key then by the
    panel's grid order.
    """
    by = tuple(by)
    if by not in _GROUP_KEYS:
        raise ValidationError(f"unsupported grouping {by}")
    cal = panel.calendar
    use_season = "season" in by
    use_zone = "zone" in by

    if use_season:
        day_year = cal.season_year
        valid_days = day_year >= 0
    else:
        day_year = cal.years
        valid_days = np.ones(panel.n_days, dtype=bool)

    zones = panel.grids.zones
    columns = by + ("grid_id", "mean")
    table = Table(columns)
    years = sorted(set(day_year[valid_days].tolist()))
    seasons = SEASONS if use_season else (None,)
    zone_values = sorted(set(zones.tolist())) if use_zone else (None,)

    for year in years:
        year_mask = valid_days & (day_year == year)
        for season in seasons:
            mask = year_mask
            if season is not None:
                mask = mask & (cal.season == season)
            if not mask.any():
                continue
            block = panel.values[mask]
            with np.errstate(invalid="ignore"):
                counts = (~np.isnan(block)).sum(axis=0)
                sums = np.nansum(block, axis=0)
            means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
            for zone in zone_values:
                if zone is None:
                    cols = range(panel.n_grids)
                else:
                    cols = np.nonzero(zones == zone)[0]
                for col in cols:
                    key = [year]
                    if season is not None:
                        key.append(season)
                    if zone is not None:
                        key.append(zone)
                    table.append(*key, panel.grids[int(col)].grid_id, float(means[col]))
    return table


@dataclass(frozen=True)
class EnsoTable:
    """Yearly ENSO phase labels."""

    phases: dict[int, str]

    def phase_of(self, year: int) -> str:
        try:
            return self.phases[int(year)]
        except KeyError:
            raise ValidationError(f"no ENSO phase for year {year}") from None


def load_enso(path, years=None) -> EnsoTable:
    """Read the ENSO CSV; if ``years`` is given, require full coverage."""
    phases: dict[int, str] = {}
    for lineno, row in _read_csv_rows(path, ("year", "phase")):
        try:
            year = int(row[0])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: year must be an integer") from exc
        phase = row[1].strip()
        if phase not in ENSO_PHASES:
            raise ValidationError(f"{path}:{lineno}: unknown phase {phase!r}")
        if year in phases:
            raise ValidationError(f"{path}:{lineno}: duplicate year {year}")
        phases[year] = phase
    if years is not None:
        missing = [y for y in years if int(y) not in phases]
        if missing:
            raise ValidationError(f"{path}: missing ENSO phase for years {missing}")
    return EnsoTable(phases)
