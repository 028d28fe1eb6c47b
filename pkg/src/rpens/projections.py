"""Row-orthonormal random projections.

A projection maps p-dimensional feature vectors to d dimensions through
a d x p matrix A with orthonormal rows (A A^T = I_d). Two samplers are
provided: uniform (rotation-invariant) projections and axis-aligned
projections that pick d distinct coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError, ShapeMismatchError

__all__ = ["Projection", "sample_haar", "sample_axis_aligned", "apply", "ORTHONORMALITY_TOL"]

ORTHONORMALITY_TOL = 1e-10

_KINDS = ("haar", "axis_aligned")


@dataclass(frozen=True)
class Projection:
    """Immutable row-orthonormal projection matrix.

    Parameters
    ----------
    entries : ndarray of shape (d, p)
        The matrix itself, d <= p. Validated on construction: rows must
        be orthonormal within ``ORTHONORMALITY_TOL``, and axis-aligned
        projections must consist of distinct standard basis vectors.
    kind : str
        Either ``"haar"`` or ``"axis_aligned"``.
    """

    entries: np.ndarray
    kind: str = "haar"
    _frozen: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise InvalidDimensionError("projection entries must be a 2-d array")
        d, p = entries.shape
        if d < 1 or d > p:
            raise InvalidDimensionError(f"need 1 <= d <= p, got d={d}, p={p}")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown projection kind: {self.kind!r}")
        gram = entries @ entries.T
        if np.max(np.abs(gram - np.eye(d))) > ORTHONORMALITY_TOL:
            raise ValueError("projection rows are not orthonormal")
        if self.kind == "axis_aligned":
            _check_axis_aligned(entries)
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    def apply(self, X: np.ndarray) -> np.ndarray:
        return apply(self, X)


def _check_axis_aligned(entries: np.ndarray) -> None:
    d, p = entries.shape
    cols = []
    for row in entries:
        nz = np.flatnonzero(row != 0.0)
        if len(nz) != 1 or row[nz[0]] != 1.0:
            raise ValueError("axis-aligned rows must be standard basis vectors")
        cols.append(nz[0])
    if len(set(cols)) != d:
        raise ValueError("axis-aligned rows must select distinct coordinates")


def sample_haar(p: int, d: int, rng: np.random.Generator) -> Projection:
    """Draw a projection uniformly from the row-orthonormal d x p matrices.

    Fills a d x p matrix with independent standard normals and extracts
    an orthonormal basis of its row space by a thin QR factorisation of
    the transpose, with the sign convention that makes the factorisation
    unique (positive diagonal of the triangular factor). Uniqueness makes
    the map equivariant under right rotation of the Gaussian draw, which
    pins the output distribution to the rotation-invariant one.
    """
    if not 1 <= d <= p:
        raise InvalidDimensionError(f"need 1 <= d <= p, got d={d}, p={p}")
    gauss = rng.standard_normal((d, p))
    q, r = np.linalg.qr(gauss.T, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return Projection(entries=(q * signs).T, kind="haar")


def sample_axis_aligned(p: int, d: int, rng: np.random.Generator) -> Projection:
    """Draw a projection onto d distinct coordinates, uniformly without replacement."""
    if not 1 <= d <= p:
        raise InvalidDimensionError(f"need 1 <= d <= p, got d={d}, p={p}")
    coords = rng.choice(p, size=d, replace=False)
    entries = np.zeros((d, p))
    entries[np.arange(d), coords] = 1.0
    return Projection(entries=entries, kind="axis_aligned")


def apply(projection: Projection, X: np.ndarray) -> np.ndarray:
    """Project points into the d-dimensional image space.

    Accepts a single p-vector or an (n, p) array; returns a d-vector or
    an (n, d) array whose row i is A x_i.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != projection.p:
        raise ShapeMismatchError(
            f"expected points with {projection.p} features, got shape {X.shape}"
        )
    Z = X @ projection.entries.T
    return Z[0] if single else Z
