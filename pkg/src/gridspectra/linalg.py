"""Core factorizations with strict ordering and reconstruction contracts.

``svd`` and ``sym_eigen`` wrap LAPACK through numpy with fixed sign
conventions so outputs are byte-reproducible for identical input bytes.

``gsvd`` factors a pair (D1, D2) sharing right basis vectors as

    D1 = U1 @ Delta1 @ [0 P] @ V,    D2 = U2 @ Delta2 @ [0 P] @ V

with U1, U2, V orthogonal, P upper triangular nonsingular, Delta1/Delta2
non-negative quasi-diagonal and Delta1'Delta1 + Delta2'Delta2 = I. The route
is: a rank-revealing factorization of the stacked matrix [D1; D2], a
cosine-sine decomposition of the two orthonormal blocks, and an RQ
decomposition to restore the upper-triangular shared factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError

# Default contract tolerances for double precision at this package's scales;
# override per call where exposed.
ORTHO_TOL = 1e-10
RECON_TOL = 1e-8
SYM_TOL = 1e-12


def _require_finite(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValidationError(f"{name}: empty matrix")
    if not np.isfinite(x).all():
        raise ValidationError(f"{name}: non-finite entries")
    return x


def _fix_right_vector_signs(u: np.ndarray | None, v: np.ndarray) -> tuple[np.ndarray | None, np.ndarray]:
    """Flip paired columns so the first non-negligible entry of each right
    vector is positive."""
    v = v.copy()
    u = None if u is None else u.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        scale = np.abs(col).max()
        if scale == 0:
            continue
        nz = np.nonzero(np.abs(col) > 1e-12 * scale)[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
            if u is not None:
                u[:, j] = -u[:, j]
    return u, v


@dataclass(frozen=True, eq=False)
class SvdFactorization:
    """Thin SVD bundle: X = u @ diag(s) @ v.T with orthonormal u, v columns."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def rank_bound(self) -> int:
        return self.s.size

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T

    def validate(self, x: np.ndarray | None = None,
                 ortho_tol: float = ORTHO_TOL, recon_tol: float = RECON_TOL) -> None:
        r = self.s.size
        if np.any(np.diff(self.s) > 0) or np.any(self.s < 0):
            raise NumericalError("singular values are not non-negative non-increasing")
        if np.abs(self.u.T @ self.u - np.eye(r)).max() > ortho_tol:
            raise NumericalError("left factor is not orthonormal")
        if np.abs(self.v.T @ self.v - np.eye(r)).max() > ortho_tol:
            raise NumericalError("right factor is not orthonormal")
        if x is not None:
            scale = np.abs(x).max() or 1.0
            if np.abs(self.reconstruct() - x).max() > recon_tol * scale:
                raise NumericalError("SVD reconstruction exceeds tolerance")

    def to_csv(self, out_dir, stem: str = "svd") -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, arr in (("u", self.u), ("s", self.s), ("v", self.v)):
            path = out_dir / f"{stem}_{name}.csv"
            np.savetxt(path, np.atleast_2d(arr.T).T if arr.ndim == 1 else arr,
                       delimiter=",", fmt="%.17g")
            paths.append(path)
        return paths


def svd(x: np.ndarray) -> SvdFactorization:
    """Thin SVD with non-increasing singular values and the first
    non-negligible entry of each right vector positive."""
    x = _require_finite(x, "svd input")
    if x.ndim != 2:
        raise ValidationError("svd expects a matrix")
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    u, v = _fix_right_vector_signs(u, vt.T)
    return SvdFactorization(u=u, s=s, v=v)


@dataclass(frozen=True, eq=False)
class SymEigen:
    """Eigenvalues (non-increasing) and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def sym_eigen(r: np.ndarray, sym_tol: float = SYM_TOL) -> SymEigen:
    """Symmetric eigendecomposition; input asymmetry beyond ``sym_tol``
    (relative to the largest entry) is rejected."""
    r = _require_finite(r, "sym_eigen input")
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError("sym_eigen expects a square matrix")
    scale = max(np.abs(r).max(), 1.0)
    if np.abs(r - r.T).max() > sym_tol * scale:
        raise ValidationError("matrix is not symmetric within tolerance")
    try:
        values, vectors = np.linalg.eigh((r + r.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    values = values[::-1].copy()
    vectors = vectors[:, ::-1]
    _, vectors = _fix_right_vector_signs(None, vectors)
    return SymEigen(eigenvalues=values, eigenvectors=vectors)


@dataclass(frozen=True, eq=False)
class GsvdFactorization:
    """Generalized SVD bundle for a pair sharing right basis vectors.

    ``alpha``/``beta`` are clipped to [0, 1] with alpha**2 + beta**2 = 1 per
    index; generalized singular values alpha/beta are non-increasing, with
    +inf where beta vanishes.
    """

    u1: np.ndarray
    u2: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    p_upper: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    rank: int

    @property
    def n1(self) -> int:
        return self.u1.shape[0]

    @property
    def n2(self) -> int:
        return self.u2.shape[0]

    @property
    def m(self) -> int:
        return self.v.shape[0]

    @property
    def zero_p(self) -> np.ndarray:
        """The r x M block [0 P]."""
        pad = np.zeros((self.rank, self.m - self.rank))
        return np.hstack([pad, self.p_upper])

    @property
    def gsv(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.beta > 0, self.alpha / np.where(self.beta > 0, self.beta, 1.0), np.inf)

    def reconstruct(self) -> tuple[np.ndarray, np.ndarray]:
        shared = self.zero_p @ self.v
        return self.u1 @ self.delta1 @ shared, self.u2 @ self.delta2 @ shared


def gsvd(d1: np.ndarray, d2: np.ndarray, rank_tol: float | None = None) -> GsvdFactorization:
    """Generalized SVD of (d1, d2); both matrices must have at least as many
    rows as columns. A rank-deficient stack is factored with rank r < M."""
    d1 = _require_finite(d1, "gsvd first input")
    d2 = _require_finite(d2, "gsvd second input")
    if d1.ndim != 2 or d2.ndim != 2 or d1.shape[1] != d2.shape[1]:
        raise ValidationError("gsvd expects two matrices with equal column counts")
    n1, m = d1.shape
    n2 = d2.shape[0]
    if min(n1, n2) < m:
        raise ValidationError(
            f"gsvd requires min(rows) >= columns; got {n1}x{m} and {n2}x{m}"
        )
    stacked = np.vstack([d1, d2])
    try:
        qs, sv, vt = np.linalg.svd(stacked, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD of stacked matrix failed: {exc}") from exc
    if rank_tol is None:
        rank_tol = max(stacked.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    r = int(np.sum(sv > rank_tol))
    if r == 0:
        raise ValidationError("gsvd of a zero pair is undefined")
    q_all = qs[:, :r]
    shared = sv[:r, None] * vt[:r]
    q1, q2 = q_all[:n1], q_all[n1:]

    # cosine-sine decomposition of (q1, q2): q1 = u1 C z', q2 = u2 S z'
    u1, c, zt = np.linalg.svd(q1, full_matrices=True)
    c = np.clip(c[:r], 0.0, 1.0)
    z = zt.T
    beta = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    t = q2 @ z
    # orthogonalize the larger-norm columns first so near-zero columns cannot
    # contaminate the triangular factor
    order = np.argsort(-beta, kind="stable")
    u2p, rr = np.linalg.qr(t[:, order], mode="complete")
    signs = np.where(np.diag(rr)[:r] < 0, -1.0, 1.0)
    u2p = u2p.copy()
    u2p[:, :r] *= signs
    u2 = u2p.copy()
    u2[:, order] = u2p[:, :r]

    # restore the triangular shared factor: z' shared = [0 P] V
    w = z.T @ shared
    p_wide, v = sla.rq(w)
    diag = np.diag(p_wide[:, m - r:])
    flips = np.where(diag < 0, -1.0, 1.0)
    p_wide = p_wide * np.concatenate([np.ones(m - r), flips])[None, :]
    v = v.copy()
    v[m - r:, :] *= flips[:, None]

    delta1 = np.zeros((n1, r))
    delta1[np.arange(r), np.arange(r)] = c
    delta2 = np.zeros((n2, r))
    delta2[np.arange(r), np.arange(r)] = beta
    return GsvdFactorization(
        u1=u1,
        u2=u2,
        delta1=delta1,
        delta2=delta2,
        p_upper=p_wide[:, m - r:].copy(),
        v=v,
        alpha=c,
        beta=beta,
        rank=r,
    )


def angular_distances(f: GsvdFactorization) -> np.ndarray:
    """Signed significance balance arctan(alpha/beta) - pi/4 per shared basis
    direction; beta = 0 maps to +pi/4, alpha = 0 to -pi/4."""
    return np.arctan2(f.alpha, f.beta) - np.pi / 4.0
