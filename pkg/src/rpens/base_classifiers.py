"""Base classifiers applied to projected data.

Three classifiers operate on d-dimensional projected points with labels
in {1, 2}: linear discriminant analysis with a pooled covariance,
quadratic discriminant analysis with per-class covariances, and a
k-nearest-neighbour vote. All fitting is deterministic; the only
randomness is the seeded stream that splits exact distance ties in the
nearest-neighbour classifier.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist
from scipy.stats import norm

from .errors import (
    InvalidDimensionError,
    MissingClassError,
    ShapeMismatchError,
    SingularCovarianceError,
)

__all__ = [
    "BaseSpec",
    "LdaModel",
    "QdaModel",
    "KnnModel",
    "fit_base",
    "fit_lda",
    "predict_lda",
    "predict_lda_many",
    "lda_closed_form_test_error",
    "fit_qda",
    "predict_qda",
    "predict_qda_many",
    "qda_loo_labels",
    "fit_knn",
    "predict_knn",
    "predict_knn_many",
    "knn_loo_labels",
    "default_knn_k",
]

RIDGE_EPS = 1e-8

BASE_KINDS = ("lda", "qda", "knn")


def _check_labelled(Z, y):
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y)
    if Z.ndim != 2:
        raise ShapeMismatchError("training points must form a 2-d array")
    if y.shape != (Z.shape[0],):
        raise ShapeMismatchError("labels must be one per training point")
    if not np.isin(y, (1, 2)).all():
        raise ValueError("labels must take values in {1, 2}")
    return Z, y.astype(np.int64)


def _class_split(Z, y):
    m1 = y == 1
    m2 = y == 2
    if not m1.any() or not m2.any():
        raise MissingClassError("both classes must be present in the training set")
    return Z[m1], Z[m2]


def _invert_spd(sigma, context=""):
    """Inverse and log-determinant of a symmetric positive definite matrix.

    On a failed Cholesky factorisation, retries once with a ridge of
    RIDGE_EPS * mean diagonal added; a second failure raises.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    d = sigma.shape[0]
    sigma = (sigma + sigma.T) / 2.0
    for attempt in range(2):
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            if attempt == 1:
                raise SingularCovarianceError(
                    f"covariance singular after ridge fallback {context}".strip()
                )
            sigma = sigma + (RIDGE_EPS * np.trace(sigma) / d) * np.eye(d)
            continue
        inv_chol = solve_triangular(chol, np.eye(d), lower=True)
        inverse = inv_chol.T @ inv_chol
        inverse = (inverse + inverse.T) / 2.0
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        return inverse, log_det, sigma
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Linear discriminant analysis


@dataclass(eq=False)
class LdaModel:
    pi_hat_1: float
    pi_hat_2: float
    mu_hat_1: np.ndarray
    mu_hat_2: np.ndarray
    sigma_hat: np.ndarray
    omega_hat: np.ndarray

    def predict_many(self, Z):
        return predict_lda_many(self, Z)

    @property
    def d(self):
        return self.mu_hat_1.shape[0]


def fit_lda(Z, y) -> LdaModel:
    """Fit class priors, class means and a pooled-covariance precision.

    The pooled covariance sums squared deviations from the respective
    class means and divides by n - 2. Requires both classes and
    n >= d + 2 so that the pooled estimate can have full rank.
    """
    Z, y = _check_labelled(Z, y)
    n, d = Z.shape
    if n < d + 2:
        raise InvalidDimensionError(f"pooled covariance needs n >= d + 2, got n={n}, d={d}")
    Z1, Z2 = _class_split(Z, y)
    n1, n2 = len(Z1), len(Z2)
    mu1 = Z1.mean(axis=0)
    mu2 = Z2.mean(axis=0)
    dev1 = Z1 - mu1
    dev2 = Z2 - mu2
    pooled = (dev1.T @ dev1 + dev2.T @ dev2) / (n - 2)
    omega, _, sigma = _invert_spd(pooled, context="(pooled)")
    return LdaModel(
        pi_hat_1=n1 / n,
        pi_hat_2=n2 / n,
        mu_hat_1=mu1,
        mu_hat_2=mu2,
        sigma_hat=sigma,
        omega_hat=omega,
    )


def _lda_discriminant(model, Z):
    direction = model.omega_hat @ (model.mu_hat_1 - model.mu_hat_2)
    mid = (model.mu_hat_1 + model.mu_hat_2) / 2.0
    return np.log(model.pi_hat_1 / model.pi_hat_2) + (Z - mid) @ direction


def predict_lda_many(model, Z):
    """Labels for an (n, d) array; discriminant ties go to class 1."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != model.d:
        raise ShapeMismatchError(f"expected points with {model.d} features")
    return np.where(_lda_discriminant(model, Z) >= 0.0, 1, 2).astype(np.int64)


def predict_lda(model, z) -> int:
    return int(predict_lda_many(model, np.asarray(z, dtype=np.float64)[None, :])[0])


def lda_closed_form_test_error(model, pi_1, mu_1, mu_2, sigma) -> float:
    """Exact test error of a fitted linear rule under Gaussian class laws.

    The classes are N(mu_1, sigma) and N(mu_2, sigma) with prior pi_1 on
    class 1. The fitted discriminant is linear, so its distribution under
    each class is Gaussian and the misclassification probability reduces
    to two normal tail probabilities.
    """
    mu_1 = np.asarray(mu_1, dtype=np.float64)
    mu_2 = np.asarray(mu_2, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    pi_2 = 1.0 - pi_1
    delta = model.mu_hat_2 - model.mu_hat_1
    mid = (model.mu_hat_1 + model.mu_hat_2) / 2.0
    w = model.omega_hat @ delta
    scale = float(np.sqrt(w @ sigma @ w))
    log_ratio_21 = np.log(model.pi_hat_2 / model.pi_hat_1)
    if scale == 0.0:
        # Constant discriminant: everything lands in one class.
        return pi_2 if -log_ratio_21 >= 0.0 else pi_1
    a1 = (log_ratio_21 - w @ (mid - mu_1)) / scale
    a2 = (-log_ratio_21 + w @ (mid - mu_2)) / scale
    return float(pi_1 * norm.cdf(a1) + pi_2 * norm.cdf(a2))


# ---------------------------------------------------------------------------
# Quadratic discriminant analysis


@dataclass(eq=False)
class QdaModel:
    pi_hat_1: float
    pi_hat_2: float
    mu_hat_1: np.ndarray
    mu_hat_2: np.ndarray
    sigma_hat_1: np.ndarray
    sigma_hat_2: np.ndarray
    omega_hat_1: np.ndarray
    omega_hat_2: np.ndarray
    log_det_1: float
    log_det_2: float

    def predict_many(self, Z):
        return predict_qda_many(self, Z)

    @property
    def d(self):
        return self.mu_hat_1.shape[0]


def fit_qda(Z, y) -> QdaModel:
    """Fit per-class priors, means and covariances (divisor n_r - 1)."""
    Z, y = _check_labelled(Z, y)
    n, d = Z.shape
    Z1, Z2 = _class_split(Z, y)
    n1, n2 = len(Z1), len(Z2)
    if min(n1, n2) < d + 1:
        raise InvalidDimensionError(
            f"per-class covariance needs min class size >= d + 1, got ({n1}, {n2}), d={d}"
        )
    mu1 = Z1.mean(axis=0)
    mu2 = Z2.mean(axis=0)
    dev1 = Z1 - mu1
    dev2 = Z2 - mu2
    sigma1 = dev1.T @ dev1 / (n1 - 1)
    sigma2 = dev2.T @ dev2 / (n2 - 1)
    omega1, log_det_1, sigma1 = _invert_spd(sigma1, context="(class 1)")
    omega2, log_det_2, sigma2 = _invert_spd(sigma2, context="(class 2)")
    return QdaModel(
        pi_hat_1=n1 / n,
        pi_hat_2=n2 / n,
        mu_hat_1=mu1,
        mu_hat_2=mu2,
        sigma_hat_1=sigma1,
        sigma_hat_2=sigma2,
        omega_hat_1=omega1,
        omega_hat_2=omega2,
        log_det_1=log_det_1,
        log_det_2=log_det_2,
    )


def _qda_discriminant(model, Z):
    u1 = Z - model.mu_hat_1
    u2 = Z - model.mu_hat_2
    q1 = np.einsum("ij,jk,ik->i", u1, model.omega_hat_1, u1)
    q2 = np.einsum("ij,jk,ik->i", u2, model.omega_hat_2, u2)
    return (
        np.log(model.pi_hat_1 / model.pi_hat_2)
        + 0.5 * (model.log_det_2 - model.log_det_1)
        + 0.5 * (q2 - q1)
    )


def predict_qda_many(model, Z):
    """Labels for an (n, d) array; discriminant ties go to class 1."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != model.d:
        raise ShapeMismatchError(f"expected points with {model.d} features")
    return np.where(_qda_discriminant(model, Z) >= 0.0, 1, 2).astype(np.int64)


def predict_qda(model, z) -> int:
    return int(predict_qda_many(model, np.asarray(z, dtype=np.float64)[None, :])[0])


_LOO_PIVOT_TOL = 1e-12


def qda_loo_labels(Z, y):
    """Leave-one-out predicted label of each training point under QDA.

    Returns (labels, failed). labels[i] is the prediction for point i by
    the model refitted without it; failed[i] marks points whose refit is
    infeasible (deleted class left with fewer than d + 1 members) or
    numerically degenerate. Failed points carry no usable label.

    Deleting one point changes a single class's scatter matrix by a
    rank-one term, so the refitted inverse and log-determinant follow
    from the full-data factorisation; ill-conditioned downdates fall
    back to an explicit refit of that one point.
    """
    Z, y = _check_labelled(Z, y)
    n, d = Z.shape
    Z1, Z2 = _class_split(Z, y)
    counts = {1: len(Z1), 2: len(Z2)}
    labels = np.zeros(n, dtype=np.int64)
    failed = np.zeros(n, dtype=bool)

    stats = {}
    slow_all = False
    for r, Zr in ((1, Z1), (2, Z2)):
        mu = Zr.mean(axis=0)
        dev = Zr - mu
        scatter = dev.T @ dev
        try:
            chol = np.linalg.cholesky((scatter + scatter.T) / 2.0)
        except np.linalg.LinAlgError:
            slow_all = True
            break
        inv_chol = solve_triangular(chol, np.eye(d), lower=True)
        inv_scatter = inv_chol.T @ inv_chol
        log_det_scatter = 2.0 * np.sum(np.log(np.diag(chol)))
        stats[r] = (mu, inv_scatter, log_det_scatter)

    if slow_all:
        for i in range(n):
            labels[i], failed[i] = _qda_loo_refit_point(Z, y, i, d, counts)
        return labels, failed

    # Quadratic forms of every point around both class means, scaled by
    # the inverse scatter matrices.
    h = {}
    for r in (1, 2):
        mu, inv_scatter, _ = stats[r]
        u = Z - mu
        h[r] = np.einsum("ij,jk,ik->i", u, inv_scatter, u)

    for r, s in ((1, 2), (2, 1)):
        idx = np.flatnonzero(y == r)
        nr, ns = counts[r], counts[s]
        if nr - 1 < d + 1:
            failed[idx] = True
            continue
        mu_r, _, log_det_scatter_r = stats[r]
        _, _, log_det_scatter_s = stats[s]
        c = nr / (nr - 1.0)
        h_r = h[r][idx]
        h_s = h[s][idx]
        pivot = 1.0 - c * h_r

        # Deleted-class pieces after the rank-one downdate.
        with np.errstate(divide="ignore", invalid="ignore"):
            q_r = c * c * (nr - 2.0) * h_r / pivot
            log_det_r = log_det_scatter_r + np.log(pivot) - d * np.log(nr - 2.0)
        q_s = (ns - 1.0) * h_s
        log_det_s = log_det_scatter_s - d * np.log(ns - 1.0)

        # Discriminant oriented as log(pi_1/pi_2) + ...; r plays class r.
        log_prior = np.log((nr - 1.0) / ns)
        if r == 1:
            delta = log_prior + 0.5 * (log_det_s - log_det_r) + 0.5 * (q_s - q_r)
        else:
            delta = -log_prior - 0.5 * (log_det_s - log_det_r) - 0.5 * (q_s - q_r)
        labels[idx] = np.where(delta >= 0.0, 1, 2)

        bad = pivot <= _LOO_PIVOT_TOL
        for j in np.flatnonzero(bad):
            labels[idx[j]], failed[idx[j]] = _qda_loo_refit_point(Z, y, idx[j], d, counts)
    return labels, failed


def _qda_loo_refit_point(Z, y, i, d, counts):
    """Explicit one-point refit, used when the downdate is unreliable."""
    if counts[y[i]] - 1 < d + 1:
        return 0, True
    keep = np.ones(len(y), dtype=bool)
    keep[i] = False
    try:
        model = fit_qda(Z[keep], y[keep])
    except (SingularCovarianceError, InvalidDimensionError, MissingClassError):
        return 0, True
    return int(predict_qda(model, Z[i])), False


# ---------------------------------------------------------------------------
# k-nearest neighbours


def default_knn_k(n: int) -> int:
    """Neighbour count used when none is requested: max(3, round(sqrt(n)))."""
    return max(3, int(round(np.sqrt(n))))


@dataclass(eq=False)
class KnnModel:
    points: np.ndarray
    labels: np.ndarray
    k: int
    tie_seed: int
    point_ids: np.ndarray

    def predict_many(self, Z):
        return predict_knn_many(self, Z)

    @property
    def d(self):
        return self.points.shape[1]


def fit_knn(Z, y, k=None, tie_seed=0, point_ids=None) -> KnnModel:
    """Store the sample for nearest-neighbour prediction.

    A single-class sample is allowed; prediction then returns the stored
    majority. point_ids give each point a stable identity for the
    tie-break stream, so reordering the sample or deleting points does
    not change how the remaining ties resolve. Defaults to 0..n-1.
    """
    Z, y = _check_labelled(Z, y)
    n = len(y)
    if n == 0:
        raise ShapeMismatchError("nearest-neighbour fit needs at least one point")
    if k is None:
        k = default_knn_k(n)
    if not 1 <= k <= n:
        raise InvalidDimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
    if point_ids is None:
        point_ids = np.arange(n, dtype=np.int64)
    else:
        point_ids = np.asarray(point_ids, dtype=np.int64)
        if point_ids.shape != (n,) or len(np.unique(point_ids)) != n:
            raise ShapeMismatchError("point_ids must be one distinct id per point")
    return KnnModel(points=Z, labels=y, k=int(k), tie_seed=int(tie_seed), point_ids=point_ids)


def _tie_key(tie_seed, pid, query_bytes):
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<qq", tie_seed, pid))
    h.update(query_bytes)
    return int.from_bytes(h.digest(), "little")


def _knn_class1_counts(D, y, k, tie_seed, point_ids, queries):
    """Number of class-1 points among the k nearest, per query row of D.

    Exact distance ties straddling the k-th position are resolved by
    ranking the tied points with a keyed hash of (tie stream, point id,
    query coordinates): a reproducible uniform ordering that depends on
    point identity, not storage position.
    """
    m = D.shape[0]
    y1 = (y == 1).astype(np.int64)
    part = np.partition(D, k - 1, axis=1)
    kth = part[:, k - 1]
    strict = D < kth[:, None]
    at_kth = D == kth[:, None]
    n_strict = strict.sum(axis=1)
    n_tied = at_kth.sum(axis=1)
    need = k - n_strict
    counts = strict @ y1
    easy = n_tied == need
    if easy.any():
        counts[easy] += at_kth[easy] @ y1
    for i in np.flatnonzero(~easy):
        tied = np.flatnonzero(at_kth[i])
        qb = np.ascontiguousarray(queries[i], dtype=np.float64).tobytes()
        keys = [_tie_key(tie_seed, int(point_ids[j]), qb) for j in tied]
        chosen = tied[np.argsort(keys, kind="stable")[: need[i]]]
        counts[i] += int(y1[chosen].sum())
    return counts


def predict_knn_many(model, Z):
    """Labels for an (m, d) array: class 1 iff at least half the k nearest are class 1."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != model.d:
        raise ShapeMismatchError(f"expected points with {model.d} features")
    k = min(model.k, len(model.labels))
    D = cdist(Z, model.points, "sqeuclidean")
    counts = _knn_class1_counts(D, model.labels, k, model.tie_seed, model.point_ids, Z)
    return np.where(2 * counts >= k, 1, 2).astype(np.int64)


def predict_knn(model, z) -> int:
    return int(predict_knn_many(model, np.asarray(z, dtype=np.float64)[None, :])[0])


def knn_loo_labels(Z, y, k, tie_seed=0, point_ids=None):
    """Leave-one-out predicted label of each training point under kNN.

    Uses the same k and the same tie-break discipline as prediction;
    deleting a point only removes it from its own neighbour candidates.
    When fewer than k points remain, all of them vote.
    """
    Z, y = _check_labelled(Z, y)
    n = len(y)
    if n < 2:
        raise InvalidDimensionError("leave-one-out needs at least two points")
    if point_ids is None:
        point_ids = np.arange(n, dtype=np.int64)
    else:
        point_ids = np.asarray(point_ids, dtype=np.int64)
    k_eff = min(k, n - 1)
    D = cdist(Z, Z, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    counts = _knn_class1_counts(D, y, k_eff, tie_seed, point_ids, Z)
    return np.where(2 * counts >= k_eff, 1, 2).astype(np.int64)


# ---------------------------------------------------------------------------
# Uniform fitting interface


@dataclass(frozen=True)
class BaseSpec:
    """Which base classifier to run, plus its nearest-neighbour knobs."""

    kind: str
    k: int | None = None
    tie_seed: int = 0

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValueError(f"unknown base classifier: {self.kind!r}")
        if self.kind != "knn" and self.k is not None:
            raise ValueError("k applies only to the nearest-neighbour base")

    def resolve_k(self, n: int) -> int:
        return self.k if self.k is not None else default_knn_k(n)


def fit_base(spec: BaseSpec, Z, y, point_ids=None):
    if spec.kind == "lda":
        return fit_lda(Z, y)
    if spec.kind == "qda":
        return fit_qda(Z, y)
    return fit_knn(Z, y, k=spec.resolve_k(len(y)), tie_seed=spec.tie_seed, point_ids=point_ids)
