"""Empirical spectral distributions, the Marchenko-Pastur law, eigen-denoising,
and seeded empirical null distributions for singular and generalized singular
values.

The MP support edges for aspect ratio y = p/n are (1 -+ sqrt(y))**2; sample
correlation eigenvalues inside the support are treated as noise. Two density
conventions are exposed: ``kind="raw"`` evaluates
sqrt((y+ - x)(x - y-)) / (2 pi), whose integral over the support is y, and
``kind="normalized"`` divides by x*y so the continuous part plus the point
mass max(0, 1 - 1/y) at zero totals one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .linalg import gsvd
from .tables import Table
from .util import parallel_map, rng_for

QUANTILE_GRID = np.linspace(0.0, 1.0, 11)


def esd(eigenvalues, x):
    """Empirical spectral distribution F(x) = #{eigenvalues <= x} / n.

    Right-continuous; accepts a scalar or an array of probe points.
    """
    eigs = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
    if eigs.size == 0:
        raise ValidationError("esd needs at least one eigenvalue")
    counts = np.searchsorted(eigs, np.asarray(x, dtype=float), side="right")
    result = counts / eigs.size
    return float(result) if np.isscalar(x) else result


def mp_support(y: float) -> tuple[float, float]:
    """Support edges ((1-sqrt(y))**2, (1+sqrt(y))**2) of the MP law."""
    if y <= 0:
        raise ValidationError(f"aspect ratio must be positive, got {y}")
    root = np.sqrt(y)
    return float((1.0 - root) ** 2), float((1.0 + root) ** 2)


def mp_point_mass(y: float) -> float:
    """Weight of the point mass at zero: 1 - 1/y when y > 1, else 0."""
    if y <= 0:
        raise ValidationError(f"aspect ratio must be positive, got {y}")
    return max(0.0, 1.0 - 1.0 / y)


def mp_density(x, y: float, kind: str = "normalized"):
    """MP density at x for aspect ratio y; zero outside the support."""
    if kind not in ("normalized", "raw"):
        raise ValidationError(f"unknown density kind {kind!r}")
    lo, hi = mp_support(y)
    x_arr = np.asarray(x, dtype=float)
    inside = (x_arr >= lo) & (x_arr <= hi)
    prod = np.where(inside, (hi - x_arr) * (x_arr - lo), 0.0)
    raw = np.sqrt(np.clip(prod, 0.0, None)) / (2.0 * np.pi)
    if kind == "raw":
        out = raw
    else:
        denom = x_arr * y
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inside & (denom > 0), raw / np.where(denom > 0, denom, 1.0), 0.0)
    return float(out) if np.isscalar(x) else out


@dataclass(eq=False)
class SpectralSummary:
    """Ordered eigenvalues of a correlation matrix plus deciles and the count
    of MP-significant eigenvalues."""

    eigenvalues: np.ndarray
    n_obs: int
    p_dim: int
    quantiles: np.ndarray | None = None
    significant_count: int | None = None

    def __post_init__(self):
        eigs = np.asarray(self.eigenvalues, dtype=float).ravel()
        if eigs.size == 0:
            raise ValidationError("empty eigenvalue list")
        self.eigenvalues = np.sort(eigs)[::-1]
        if self.n_obs <= 0 or self.p_dim <= 0:
            raise ValidationError("n_obs and p_dim must be positive")
        if self.quantiles is None:
            self.quantiles = np.quantile(self.eigenvalues, QUANTILE_GRID)

    @property
    def aspect(self) -> float:
        return self.p_dim / self.n_obs


def spectral_summary(eigenvalues, n_obs: int, p_dim: int) -> SpectralSummary:
    summary = SpectralSummary(eigenvalues=eigenvalues, n_obs=n_obs, p_dim=p_dim)
    significant_eigs(summary)
    return summary


def significant_eigs(summary: SpectralSummary) -> np.ndarray:
    """Indices (into the descending eigenvalue order) strictly outside the MP
    support; the count is stored on the summary."""
    lo, hi = mp_support(summary.aspect)
    eigs = summary.eigenvalues
    idx = np.nonzero((eigs > hi) | (eigs < lo))[0]
    summary.significant_count = int(idx.size)
    return idx


def denoise(r_mat: np.ndarray, indices) -> np.ndarray:
    """Keep only the eigen-components at ``indices``: sum of lambda_j e_j e_j'."""
    from .linalg import sym_eigen

    eig = sym_eigen(np.asarray(r_mat, dtype=float))
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        return np.zeros_like(np.asarray(r_mat, dtype=float))
    if indices.min() < 0 or indices.max() >= eig.eigenvalues.size:
        raise ValidationError("denoise indices out of range")
    vectors = eig.eigenvectors[:, indices]
    values = eig.eigenvalues[indices]
    out = (vectors * values) @ vectors.T
    return (out + out.T) / 2.0


@dataclass(eq=False)
class EmpiricalNull:
    """Pooled null sample of (generalized) singular values with two-sided
    critical values taken as actual pool order statistics."""

    kind: str
    dims: tuple[int, ...]
    reps: int
    seed: int
    level: float
    samples: np.ndarray  # reps x k, in replicate order
    lower: float = field(init=False)
    upper: float = field(init=False)

    def __post_init__(self):
        if self.kind not in ("sv", "gsv-sim", "gsv-perm"):
            raise ValidationError(f"unknown null kind {self.kind!r}")
        if not 0 < self.level < 1:
            raise ValidationError("level must be in (0, 1)")
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2:
            raise ValidationError("null samples must be reps x k")
        self.lower, self.upper = self.critical_values(self.level)

    @property
    def pooled(self) -> np.ndarray:
        return np.sort(self.samples.ravel())

    def critical_values(self, level: float) -> tuple[float, float]:
        pool = self.pooled
        lower = np.quantile(pool, level / 2.0, method="inverted_cdf")
        upper = np.quantile(pool, 1.0 - level / 2.0, method="inverted_cdf")
        return float(lower), float(upper)

    def values_table(self) -> Table:
        table = Table(("replicate", "index", "value"))
        for rep in range(self.samples.shape[0]):
            for idx in range(self.samples.shape[1]):
                table.append(rep, idx, float(self.samples[rep, idx]))
        return table

    def critical_table(self, levels=(0.05, 0.01)) -> Table:
        table = Table(("level", "lower", "upper"))
        for level in levels:
            lo, hi = self.critical_values(level)
            table.append(float(level), lo, hi)
        return table

    def to_csv(self, values_path, critical_path) -> None:
        self.values_table().write_csv(values_path)
        self.critical_table(levels=(self.level,)).write_csv(critical_path)


def simulate_sv_null(n: int, p: int, reps: int, seed: int,
                     level: float = 0.05, threads: int = 1) -> EmpiricalNull:
    """Singular values of ``reps`` independent n x p standard-normal matrices."""
    if n < p or p < 1:
        raise ValidationError("simulate_sv_null needs n >= p >= 1")
    if reps < 1:
        raise ValidationError("reps must be >= 1")

    def one(rep: int) -> np.ndarray:
        rng = rng_for(seed, rep)
        return np.linalg.svd(rng.standard_normal((n, p)), compute_uv=False)

    samples = np.vstack(parallel_map(one, range(reps), threads=threads))
    return EmpiricalNull(kind="sv", dims=(n, p), reps=reps, seed=seed,
                         level=level, samples=samples)


def simulate_gsv_null(n1: int, n2: int, p: int, reps: int, seed: int,
                      level: float = 0.05, threads: int = 1) -> EmpiricalNull:
    """Generalized singular values of independent standard-normal pairs of
    shape (n1 x p, n2 x p)."""
    if min(n1, n2) < p or p < 1:
        raise ValidationError("simulate_gsv_null needs min(n1, n2) >= p >= 1")
    if reps < 1:
        raise ValidationError("reps must be >= 1")

    def one(rep: int) -> np.ndarray:
        rng = rng_for(seed, rep)
        d1 = rng.standard_normal((n1, p))
        d2 = rng.standard_normal((n2, p))
        return gsvd(d1, d2).gsv

    samples = np.vstack(parallel_map(one, range(reps), threads=threads))
    return EmpiricalNull(kind="gsv-sim", dims=(n1, n2, p), reps=reps, seed=seed,
                         level=level, samples=samples)


PERMUTATION_SCHEMES = ("columns", "rows", "rows-joint")


def _permuted_pair(d1: np.ndarray, d2: np.ndarray, perms1, perms2,
                   scheme: str) -> tuple[np.ndarray, np.ndarray]:
    """Apply explicit permutations under a named scheme.

    columns: perms1/perms2 are lists of one row-permutation per column.
    rows: perms1/perms2 are single row permutations (independent).
    rows-joint: perms1 applied to the rows of both matrices.
    """
    if scheme == "columns":
        out1 = np.column_stack([d1[perm, j] for j, perm in enumerate(perms1)])
        out2 = np.column_stack([d2[perm, j] for j, perm in enumerate(perms2)])
        return out1, out2
    if scheme == "rows":
        return d1[perms1], d2[perms2]
    if scheme == "rows-joint":
        return d1[perms1], d2[perms1]
    raise ValidationError(f"unknown permutation scheme {scheme!r}")


def permutation_gsv_null(d1: np.ndarray, d2: np.ndarray, reps: int, seed: int,
                         level: float = 0.05, scheme: str = "columns",
                         threads: int = 1) -> EmpiricalNull:
    """Empirical GSV null from uniformly random permutations of the observed
    pair.

    The default scheme shuffles each column of each matrix independently,
    destroying the cross-column dependence that the generalized singular
    values respond to. Whole-row schemes ("rows", "rows-joint") are provided
    for comparison but leave each matrix's Gram matrix - and therefore every
    generalized singular value - exactly unchanged.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if scheme not in PERMUTATION_SCHEMES:
        raise ValidationError(f"unknown permutation scheme {scheme!r}")
    if d1.ndim != 2 or d2.ndim != 2 or d1.shape[1] != d2.shape[1]:
        raise ValidationError("permutation null expects two matrices with equal column counts")
    if min(d1.shape[0], d2.shape[0]) < d1.shape[1]:
        raise ValidationError("permutation null requires min(rows) >= columns")
    if reps < 1:
        raise ValidationError("reps must be >= 1")

    def one(rep: int) -> np.ndarray:
        rng = rng_for(seed, rep)
        if scheme == "columns":
            perms1 = [rng.permutation(d1.shape[0]) for _ in range(d1.shape[1])]
            perms2 = [rng.permutation(d2.shape[0]) for _ in range(d2.shape[1])]
        else:
            perms1 = rng.permutation(d1.shape[0])
            perms2 = rng.permutation(d2.shape[0])
        p1, p2 = _permuted_pair(d1, d2, perms1, perms2, scheme)
        return gsvd(p1, p2).gsv

    samples = np.vstack(parallel_map(one, range(reps), threads=threads))
    return EmpiricalNull(kind="gsv-perm", dims=d1.shape + d2.shape, reps=reps,
                         seed=seed, level=level, samples=samples)
