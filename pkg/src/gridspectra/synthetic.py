"""Seeded synthetic datasets in the package's canonical CSV formats.

The generated panel mixes a smooth yearly trend, a seasonal cycle, a
zone-level common factor (spatial correlation), and iid noise; a configurable
fraction of cells gets a few days knocked out so completeness filtering has
something to do.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .ingest import ENSO_PHASES, build_calendar
from .tables import FLOAT_FMT
from .util import rng_for


def write_synthetic_dataset(
    out_dir,
    seed: int = 0,
    start: str = "1951-01-01",
    end: str = "1956-12-31",
    n_lat: int = 6,
    n_lon: int = 6,
    lat0: float = 8.0,
    lon0: float = 68.0,
    holes: int = 3,
    incomplete: int = 6,
    zone_factor: float = 0.45,
) -> dict[str, Path]:
    """Write grid metadata, daily values, and ENSO CSVs; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = rng_for(seed, 0)
    calendar = build_calendar(start, end)
    n_days = calendar.n_days

    positions = [(i, j) for i in range(n_lat) for j in range(n_lon)]
    hole_idx = set(rng.choice(len(positions), size=min(holes, len(positions) - 1),
                              replace=False).tolist()) if holes else set()
    cells = []
    for k, (i, j) in enumerate(positions):
        if k in hole_idx:
            continue
        zone = 1 + (i * 6) // n_lat
        cells.append((f"g{lat0 + i:.0f}_{lon0 + j:.0f}", lat0 + i, lon0 + j, zone))

    grid_path = out_dir / "grids.csv"
    with grid_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["grid_id", "lat", "lon", "zone"])
        for grid_id, lat, lon, zone in cells:
            writer.writerow([grid_id, FLOAT_FMT % lat, FLOAT_FMT % lon, zone])

    p = len(cells)
    frac = (calendar.dates - calendar.dates.astype("datetime64[Y]")).astype(int) / 365.25
    t_years = calendar.years - calendar.years.min() + frac
    seasonal = 2.2 * np.sin(2 * np.pi * frac) + 0.8 * np.cos(4 * np.pi * frac)
    trend = 0.08 * t_years

    zones = np.array([zone for *_ignored, zone in cells])
    zone_series = {z: rng.standard_normal(n_days) for z in sorted(set(zones.tolist()))}
    base = 10.0 + rng.uniform(-1.5, 1.5, size=p)
    values = np.empty((n_days, p))
    for col in range(p):
        shared = zone_series[zones[col]]
        noise = rng.standard_normal(n_days)
        values[:, col] = (
            base[col]
            + seasonal * rng.uniform(0.8, 1.2)
            + trend
            + np.sqrt(zone_factor) * shared
            + np.sqrt(1.0 - zone_factor) * noise
        )

    missing = np.zeros((n_days, p), dtype=bool)
    incomplete_cols = rng.choice(p, size=min(incomplete, p - 1), replace=False)
    for col in incomplete_cols:
        gone = rng.choice(n_days, size=int(rng.integers(1, 6)), replace=False)
        missing[gone, col] = True

    values_path = out_dir / "daily.csv"
    dates_iso = [str(d) for d in calendar.dates]
    with values_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "grid_id", "value"])
        for day in range(n_days):
            for col in range(p):
                if missing[day, col]:
                    continue
                writer.writerow([dates_iso[day], cells[col][0], FLOAT_FMT % values[day, col]])

    enso_path = out_dir / "enso.csv"
    years = sorted(set(calendar.years.tolist()))
    with enso_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["year", "phase"])
        for year in years:
            writer.writerow([year, ENSO_PHASES[int(rng.integers(0, 3))]])

    return {"grids": grid_path, "values": values_path, "enso": enso_path}
