import numpy as np
import pytest

from gridspectra.ingest import GridCell, GridSet, Panel, build_calendar


def make_gridset(n_lat, n_lon, lat0=10.0, lon0=70.0, zones=None, skip=()):
    """Full n_lat x n_lon lattice of cells, optionally with holes."""
    cells = []
    k = 0
    for i in range(n_lat):
        for j in range(n_lon):
            if (i, j) in skip:
                continue
            zone = zones[k] if zones is not None else 1 + (i * 6) // max(n_lat, 1)
            cells.append(GridCell(f"g{i}_{j}", lat0 + i, lon0 + j, int(zone)))
            k += 1
    return GridSet(tuple(cells))


def make_panel(values, start="2001-01-01", grids=None, **calendar_kwargs):
    values = np.asarray(values, dtype=float)
    n_days, n_grids = values.shape
    cal = build_calendar(start, np.datetime64(start) + (n_days - 1), **calendar_kwargs)
    if grids is None:
        side = int(np.ceil(np.sqrt(n_grids)))
        full = make_gridset(side, side)
        grids = full.subset(range(n_grids))
    return Panel(values=values, calendar=cal, grids=grids)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def line3_grids():
    return GridSet((
        GridCell("a", 10.0, 70.0, 1),
        GridCell("b", 10.0, 71.0, 1),
        GridCell("c", 10.0, 72.0, 1),
    ))
