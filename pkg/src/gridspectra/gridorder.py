"""Grid-column orderings: raster, anti-diagonal spiral, and zone grouping.

The spiral ordering walks the integer lattice spanned by the distinct sorted
latitudes (rows) and longitudes (columns) one anti-diagonal at a time,
reversing direction on every diagonal; lattice positions with no cell are
skipped. It starts at the lowest latitude/longitude corner and steps to the
next longitude first (set ``first_step="row"`` for the variant that steps to
the next latitude first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import GridSet, Panel
from .tables import Table


@dataclass(frozen=True, eq=False)
class Ordering:
    """Permutation of column indices; new position k holds old index
    ``permutation[k]``."""

    permutation: np.ndarray
    tag: str

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=int)
        if perm.ndim != 1:
            raise ValidationError("permutation must be one-dimensional")
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValidationError("permutation is not a bijection over 0..p-1")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    def __len__(self) -> int:
        return self.permutation.size

    def inverse(self) -> "Ordering":
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(len(self))
        return Ordering(inv, tag=f"{self.tag}-inverse")


def lattice_indices(grids: GridSet) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Integer (row, col) lattice positions from distinct sorted lats/lons."""
    lats, lons = grids.lats, grids.lons
    lat_values = np.unique(lats)
    lon_values = np.unique(lons)
    rows = np.searchsorted(lat_values, lats)
    cols = np.searchsorted(lon_values, lons)
    return rows, cols, len(lat_values), len(lon_values)


def raster_order(grids: GridSet, primary_axis: str = "lat") -> Ordering:
    """Sort cells by the primary axis, ties broken by the other axis."""
    if primary_axis not in ("lat", "lon"):
        raise ValidationError(f"primary_axis must be 'lat' or 'lon', got {primary_axis!r}")
    lats, lons = grids.lats, grids.lons
    if primary_axis == "lat":
        perm = np.lexsort((lons, lats))
    else:
        perm = np.lexsort((lats, lons))
    return Ordering(perm, tag="raster")


def spiral_order(grids: GridSet, first_step: str = "col") -> Ordering:
    if first_step not in ("col", "row"):
        raise ValidationError(f"first_step must be 'col' or 'row', got {first_step!r}")
    rows, cols, n_rows, n_cols = lattice_indices(grids)
    occupied = {(int(r), int(c)): i for i, (r, c) in enumerate(zip(rows, cols))}
    order: list[int] = []
    # diagonal d collects lattice cells with row+col == d (0-based)
    for d in range(n_rows + n_cols - 1):
        r_lo = max(0, d - (n_cols - 1))
        r_hi = min(n_rows - 1, d)
        r_range = range(r_lo, r_hi + 1)
        # 1-based diagonal index d+2: odd -> ascending rows (to-the-col first)
        ascending = (d % 2 == 1) if first_step == "col" else (d % 2 == 0)
        if not ascending:
            r_range = reversed(r_range)
        for r in r_range:
            cell = occupied.get((r, d - r))
            if cell is not None:
                order.append(cell)
    return Ordering(np.asarray(order, dtype=int), tag="spiral")


def zone_grouped_order(grids: GridSet, within: str = "spiral", **kwargs) -> Ordering:
    """Group by climate zone (ascending), applying a sub-ordering inside each
    zone on the zone's own lattice."""
    if within not in ("spiral", "raster"):
        raise ValidationError(f"within must be 'spiral' or 'raster', got {within!r}")
    zones = grids.zones
    order: list[int] = []
    for zone in sorted(set(zones.tolist())):
        members = np.nonzero(zones == zone)[0]
        sub = grids.subset(members)
        if within == "spiral":
            sub_order = spiral_order(sub, **kwargs)
        else:
            sub_order = raster_order(sub, **kwargs)
        order.extend(members[sub_order.permutation].tolist())
    return Ordering(np.asarray(order, dtype=int), tag=f"zone-then-{within}")


def apply_order(matrix: np.ndarray, ordering: Ordering, kind: str | None = None) -> np.ndarray:
    """Reorder columns of a panel matrix, or rows and columns of a square
    (correlation/weight) matrix simultaneously.

    ``kind`` is "columns" or "symmetric"; by default square matrices matching
    the permutation length on both axes are treated as symmetric.
    """
    matrix = np.asarray(matrix)
    perm = ordering.permutation
    if matrix.ndim != 2:
        raise ValidationError("apply_order expects a matrix")
    if kind is None:
        kind = "symmetric" if matrix.shape[0] == matrix.shape[1] == len(perm) else "columns"
    if kind == "columns":
        if matrix.shape[1] != len(perm):
            raise ValidationError(
                f"matrix has {matrix.shape[1]} columns, permutation has {len(perm)}"
            )
        return matrix[:, perm]
    if kind == "symmetric":
        if matrix.shape[0] != len(perm) or matrix.shape[1] != len(perm):
            raise ValidationError("square matrix dimensions do not match permutation")
        return matrix[np.ix_(perm, perm)]
    raise ValidationError(f"unknown kind {kind!r}")


def reorder_panel(panel: Panel, ordering: Ordering) -> Panel:
    values = apply_order(panel.values, ordering, kind="columns")
    grids = panel.grids.subset(ordering.permutation)
    return Panel(
        values=values,
        calendar=panel.calendar,
        grids=grids,
        order_tag=ordering.tag,
        notes=panel.notes,
    )


def ordering_table(ordering: Ordering, grids: GridSet) -> Table:
    if len(ordering) != len(grids):
        raise ValidationError("ordering length does not match grid set")
    table = Table(("position", "grid_id"))
    for pos, idx in enumerate(ordering.permutation):
        table.append(pos, grids[int(idx)].grid_id)
    return table
