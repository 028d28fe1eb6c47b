"""Random-projection ensemble classifier.

The classifier drills ``B1`` blocks of ``B2`` random projections into a
labelled sample.  Within each block the projection with the smallest
estimated test error survives (ties go to the smallest block index), its
base classifier is kept, and the ensemble's decision at a point is a vote
among the ``B1`` survivors: predict class 1 when the fraction voting 1
reaches the threshold ``alpha_hat``.

Everything downstream of the master seed is deterministic, including under
a thread pool: every projection and every tie-break stream is derived from
a keyed seed, never from call order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import base_classifiers as bc
from . import error_estimation as ee
from . import projections as pj
from .errors import (
    BlockFailureError,
    DegenerateVotesError,
    EstimationFailureError,
    InvalidDimensionError,
    MissingClassError,
    ShapeMismatchError,
    SingularCovarianceError,
)
from .rng import derive_int, make_rng

BASE_KINDS = ("lda", "qda", "knn")
PROJECTION_KINDS = ("haar", "axis_aligned")

# Seed-stream tags.  Every consumer of randomness under one (b1, b2) cell
# gets its own trailing tag so streams can never alias.
_TAG_PROJECTION = 0
_TAG_TIEBREAK = 1

# Fit errors that disqualify one candidate projection without sinking the
# whole block.  Anything else (shape problems, missing classes) is a data
# defect shared by every candidate and propagates immediately.
_CANDIDATE_ERRORS = (SingularCovarianceError, EstimationFailureError)


@dataclass(frozen=True)
class EnsembleConfig:
    """Immutable description of one ensemble fit.

    ``estimator=None`` defers to the default pairing for the base
    classifier (resubstitution for lda, leave-one-out otherwise), and
    ``alpha=None`` requests the data-driven threshold.  ``knn_k=None``
    lets the base layer pick ``max(3, round(sqrt(n)))`` at fit time.
    """

    B1: int
    B2: int
    d: int
    base: str = "lda"
    knn_k: int | None = None
    estimator: str | None = None
    projection_kind: str = "haar"
    alpha: float | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.B1 < 1 or self.B2 < 1:
            raise ValueError("B1 and B2 must be at least 1")
        if self.d < 1:
            raise InvalidDimensionError(f"projected dimension must be >= 1, got {self.d}")
        if self.base not in BASE_KINDS:
            raise ValueError(f"unknown base classifier {self.base!r}")
        if self.projection_kind not in PROJECTION_KINDS:
            raise ValueError(f"unknown projection kind {self.projection_kind!r}")
        if self.estimator is not None and self.estimator not in ee.ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.knn_k is not None and (self.base != "knn" or self.knn_k < 1):
            raise ValueError("knn_k requires base='knn' and a positive value")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"fixed alpha must lie in (0, 1), got {self.alpha}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")

    @property
    def estimator_name(self) -> str:
        return self.estimator or ee.default_estimator(self.base)


@dataclass(frozen=True)
class VoteFraction:
    """Ensemble vote as an exact rational count / B1."""

    count: int
    b1: int

    def __post_init__(self):
        if not 0 <= self.count <= self.b1:
            raise ValueError(f"vote count {self.count} outside [0, {self.b1}]")

    @property
    def value(self) -> Fraction:
        return Fraction(self.count, self.b1)

    def __float__(self) -> float:
        return self.count / self.b1


@dataclass(eq=False)
class EnsembleModel:
    """Fitted ensemble: the B1 block winners plus the voting threshold.

    ``train_vote_counts`` and ``train_labels`` are the stored evaluation
    data for the empirical vote CDFs (one count of class-1 votes per
    training point); ``block_error_counts`` keeps every candidate's error
    count (-1 where the candidate failed to fit) so winner optimality can
    be audited after the fact.
    """

    config: EnsembleConfig
    projections: tuple
    base_models: tuple
    alpha_hat: Fraction
    train_vote_counts: np.ndarray
    train_labels: np.ndarray
    winner_indices: tuple
    block_error_counts: np.ndarray
    block_m: int

    @property
    def B1(self) -> int:
        return self.config.B1

    @property
    def p(self) -> int:
        return self.projections[0].p

    @property
    def n_train(self) -> int:
        return int(self.train_labels.shape[0])


@dataclass(frozen=True)
class _BlockResult:
    winner_index: int
    projection: pj.Projection
    model: object
    error_count: int
    vote_labels: np.ndarray
    candidate_counts: np.ndarray


def _base_spec(cfg: EnsembleConfig, tie_seed: int) -> bc.BaseSpec:
    return bc.BaseSpec(kind=cfg.base, k=cfg.knn_k, tie_seed=tie_seed)


def _sample_projection(cfg: EnsembleConfig, p: int, *key) -> pj.Projection:
    rng = make_rng(cfg.master_seed, *key)
    if cfg.projection_kind == "haar":
        return pj.sample_haar(p, cfg.d, rng)
    return pj.sample_axis_aligned(p, cfg.d, rng)


def _fit_candidate(cfg, X, y, point_ids, *, key_prefix):
    """Fit one projected candidate; returns (projection, estimate, model, labels)."""
    proj = _sample_projection(cfg, X.shape[1], *key_prefix, _TAG_PROJECTION)
    tie_seed = derive_int(cfg.master_seed, *key_prefix, _TAG_TIEBREAK)
    spec = _base_spec(cfg, tie_seed)
    Z = proj.apply(X)
    est, model, labels = ee._estimate_full(
        Z, y, spec, cfg.estimator_name, point_ids=point_ids
    )
    if labels is None:
        # sample_split trains on the first half only; in-sample votes still
        # come from the model actually deployed.
        labels = model.predict_many(Z)
    return proj, est, model, labels


def _run_block(cfg, X, y, point_ids, b1, *, key_head=()):
    """Evaluate one block of B2 candidates and keep the sargmin winner."""
    counts = np.full(cfg.B2, -1, dtype=np.int64)
    best = None
    for b2 in range(cfg.B2):
        try:
            proj, est, model, labels = _fit_candidate(
                cfg, X, y, point_ids, key_prefix=(*key_head, b1, b2)
            )
        except _CANDIDATE_ERRORS:
            continue
        counts[b2] = est.errors
        # Strict < keeps the smallest index on ties.
        if best is None or est.errors < best[3]:
            best = (b2, proj, model, est.errors, labels, est.m)
    if best is None:
        raise BlockFailureError(
            f"all {cfg.B2} candidate projections failed in block {b1}"
        )
    b2, proj, model, errors, labels, m = best
    return _BlockResult(b2, proj, model, errors, labels, counts), m


def select_block_winner(X, y, block, base_spec, estimator, point_ids=None):
    """Pick the projection in ``block`` with the smallest estimated error.

    ``block`` is a sequence of Projections; equal estimates resolve to the
    smallest index.  Returns (projection, ErrorEstimate, fitted model).
    Raises BlockFailureError when every candidate fails to fit.
    """
    if len(block) == 0:
        raise BlockFailureError("empty projection block")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    best = None
    for idx, proj in enumerate(block):
        Z = proj.apply(X)
        try:
            est, model, _ = ee._estimate_full(
                Z, y, base_spec, estimator, point_ids=point_ids
            )
        except _CANDIDATE_ERRORS:
            continue
        if best is None or est.errors < best[1].errors:
            best = (proj, est, model)
    if best is None:
        raise BlockFailureError(f"all {len(block)} candidate projections failed")
    return best


def fit(X, y, cfg: EnsembleConfig, threads: int = 1) -> EnsembleModel:
    """Fit the ensemble on labelled data.

    ``threads`` > 1 evaluates blocks concurrently; results are bit-identical
    to the sequential run because every block draws from its own keyed seed
    stream and block outputs are combined in block order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    bc._check_labelled(X, y)
    n, p = X.shape
    if not 1 <= cfg.d <= p:
        raise InvalidDimensionError(
            f"projected dimension {cfg.d} outside [1, {p}]"
        )
    if not (np.any(y == 1) and np.any(y == 2)):
        raise MissingClassError("training data must contain both classes")
    point_ids = np.arange(n, dtype=np.int64)

    def run(b1):
        return _run_block(cfg, X, y, point_ids, b1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(cfg.B1)))
    else:
        results = [run(b1) for b1 in range(cfg.B1)]

    blocks = [r for r, _ in results]
    block_m = results[0][1]
    vote_counts = np.zeros(n, dtype=np.int64)
    for blk in blocks:
        vote_counts += (blk.vote_labels == 1)

    if cfg.alpha is not None:
        alpha_hat = Fraction(cfg.alpha)
    else:
        alpha_hat = estimate_alpha(vote_counts, y, cfg.B1)

    return EnsembleModel(
        config=cfg,
        projections=tuple(blk.projection for blk in blocks),
        base_models=tuple(blk.model for blk in blocks),
        alpha_hat=alpha_hat,
        train_vote_counts=vote_counts,
        train_labels=y.astype(np.int64, copy=True),
        winner_indices=tuple(blk.winner_index for blk in blocks),
        block_error_counts=np.stack([blk.candidate_counts for blk in blocks]),
        block_m=block_m,
    )


def votes_many(model: EnsembleModel, X) -> np.ndarray:
    """Class-1 vote counts (integers out of B1) for each row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.p:
        raise ShapeMismatchError(
            f"expected points in {model.p} dimensions, got array of shape {X.shape}"
        )
    counts = np.zeros(X.shape[0], dtype=np.int64)
    for proj, base_model in zip(model.projections, model.base_models):
        counts += (base_model.predict_many(proj.apply(X)) == 1)
    return counts


def votes(model: EnsembleModel, x) -> VoteFraction:
    """Fraction of block winners voting class 1 at a single point."""
    count = int(votes_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])
    return VoteFraction(count, model.B1)


def _counts_to_labels(counts: np.ndarray, alpha: Fraction, b1: int) -> np.ndarray:
    # class 1 iff count/B1 >= alpha, decided in exact integer arithmetic
    class1 = counts * alpha.denominator >= alpha.numerator * b1
    return np.where(class1, 1, 2).astype(np.int64)


def predict_many(model: EnsembleModel, X) -> np.ndarray:
    return _counts_to_labels(votes_many(model, X), model.alpha_hat, model.B1)


def predict(model: EnsembleModel, x) -> int:
    return int(predict_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def _vote_pieces(vote_fracs, labels, pi_1, pi_2):
    """Maximal intervals where the threshold objective is constant.

    The objective O(t) = pi_1 * G1(t) + pi_2 * (1 - G2(t)) with
    G_r(t) = (1/n_r) * #{i : y_i = r, vote_i < t} is a left-continuous step
    function of t, constant on [0, v(1)] and on each (v(j), v(j+1)] for the
    sorted distinct vote values v(1) < ... < v(K), and on (v(K), 1] when
    v(K) < 1.  Returns a list of (lo, hi, value) with exact Fractions.
    """
    n1 = sum(1 for lab in labels if lab == 1)
    n2 = len(labels) - n1
    distinct = sorted(set(vote_fracs))
    pairs = sorted(zip(vote_fracs, labels))
    pieces = []
    below1 = 0  # class-1 votes <= current piece's lower knot
    below2 = 0
    idx = 0
    for j, v in enumerate(distinct):
        lo = Fraction(0) if j == 0 else distinct[j - 1]
        hi = v
        # votes strictly below t for t in (lo, hi] are exactly votes <= lo
        value = pi_1 * Fraction(below1, n1) + pi_2 * (1 - Fraction(below2, n2))
        pieces.append((lo, hi, value))
        while idx < len(pairs) and pairs[idx][0] == v:
            if pairs[idx][1] == 1:
                below1 += 1
            else:
                below2 += 1
            idx += 1
    if distinct[-1] < 1:
        value = pi_1 * Fraction(below1, n1) + pi_2 * (1 - Fraction(below2, n2))
        pieces.append((distinct[-1], Fraction(1), value))
    return pieces


def estimate_alpha(vote_counts, labels, b1, priors=None) -> Fraction:
    """Data-driven voting threshold.

    Minimizes the prior-weighted empirical error of thresholding the
    training votes, exactly (Fraction arithmetic), and returns the midpoint
    of the smallest and largest minimizers.  When the minimizing region is
    disconnected and the global midpoint falls in a gap, the midpoint snaps
    to the nearest minimizing piece so the returned threshold always
    attains the minimum.  Exact 0 or 1 is nudged inward to 1/(2*B1) and
    1 - 1/(2*B1).

    ``priors`` defaults to the empirical class proportions of ``labels``.
    """
    counts = np.asarray(vote_counts, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if counts.shape != labels.shape or counts.ndim != 1:
        raise ShapeMismatchError("vote counts and labels must be matching 1-d arrays")
    n1 = int(np.sum(labels == 1))
    n2 = int(np.sum(labels == 2))
    if n1 == 0 or n2 == 0:
        raise DegenerateVotesError(
            "threshold estimation needs votes from both classes"
        )
    if np.all(counts == counts[0]):
        warnings.warn(
            "all training votes identical; threshold objective is flat, "
            "falling back to alpha = 1/2",
            RuntimeWarning,
            stacklevel=2,
        )
        return Fraction(1, 2)
    if priors is None:
        pi_1 = Fraction(n1, n1 + n2)
    else:
        pi_1 = Fraction(priors[0])
    pi_2 = 1 - pi_1

    fracs = [Fraction(int(c), b1) for c in counts]
    pieces = _vote_pieces(fracs, labels.tolist(), pi_1, pi_2)
    best = min(value for _, _, value in pieces)
    argmin = [(lo, hi) for lo, hi, value in pieces if value == best]
    global_mid = (argmin[0][0] + argmin[-1][1]) / 2

    def contains(piece, t):
        lo, hi = piece
        if lo == hi:
            return t == lo
        return lo < t <= hi

    if any(contains(piece, global_mid) for piece in argmin):
        mid = global_mid
    else:
        # Disconnected minimizing region: keep optimality by snapping to
        # the piece whose own midpoint is closest to the global midpoint.
        mid = min(
            ((lo + hi) / 2 for lo, hi in argmin),
            key=lambda m: (abs(m - global_mid), m),
        )

    if mid <= 0:
        return Fraction(1, 2 * b1)
    if mid >= 1:
        return 1 - Fraction(1, 2 * b1)
    return mid


def alpha_objective(vote_counts, labels, b1, t, priors=None) -> Fraction:
    """Exact value of the threshold objective at ``t`` (used by audits)."""
    counts = np.asarray(vote_counts, dtype=np.int64).tolist()
    labels = np.asarray(labels, dtype=np.int64).tolist()
    n1 = sum(1 for lab in labels if lab == 1)
    n2 = len(labels) - n1
    if priors is None:
        pi_1 = Fraction(n1, n1 + n2)
    else:
        pi_1 = Fraction(priors[0])
    t = Fraction(t)
    below1 = sum(1 for c, lab in zip(counts, labels)
                 if lab == 1 and Fraction(c, b1) < t)
    below2 = sum(1 for c, lab in zip(counts, labels)
                 if lab == 2 and Fraction(c, b1) < t)
    return pi_1 * Fraction(below1, n1) + (1 - pi_1) * (1 - Fraction(below2, n2))


def alpha_candidates(vote_counts, b1):
    """Finite grid guaranteed to contain a minimizer of the objective."""
    fracs = sorted({Fraction(int(c), b1) for c in np.asarray(vote_counts)})
    cands = {Fraction(1, 2 * b1), Fraction(1)}
    cands.update(fracs)
    cands.update(
        (a + b) / 2 for a, b in zip(fracs, fracs[1:])
    )
    return sorted(cands)


def g_curves(model: EnsembleModel):
    """Empirical vote CDF data for each class.

    Returns (thresholds, g1, g2): thresholds are the sorted distinct
    training vote fractions as floats; g_r[j] is the fraction of class-r
    training points whose vote fraction is strictly below thresholds[j].
    """
    counts = model.train_vote_counts
    labels = model.train_labels
    b1 = model.B1
    distinct = np.unique(counts)
    thresholds = distinct / b1
    g1 = np.empty(distinct.shape[0])
    g2 = np.empty(distinct.shape[0])
    n1 = int(np.sum(labels == 1))
    n2 = int(np.sum(labels == 2))
    for j, c in enumerate(distinct):
        g1[j] = np.sum((labels == 1) & (counts < c)) / n1
        g2[j] = np.sum((labels == 2) & (counts < c)) / n2
    return thresholds, g1, g2


def select_d(X, y, candidate_ds, cfg: EnsembleConfig, threads: int = 1) -> int:
    """Pick the projected dimension with the smallest mean winner estimate.

    Each candidate d gets its own B1 x B2 selection pass drawn from seed
    streams keyed by (d, b1, b2); ties resolve to the smallest d.
    """
    chosen, _ = select_d_profile(X, y, candidate_ds, cfg, threads=threads)
    return chosen


def select_d_profile(X, y, candidate_ds, cfg: EnsembleConfig, threads: int = 1):
    """As select_d, also returning {d: per-block winner error counts}."""
    candidates = sorted(set(int(d) for d in candidate_ds))
    if not candidates:
        raise ValueError("candidate dimension set is empty")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    bc._check_labelled(X, y)
    n, p = X.shape
    point_ids = np.arange(n, dtype=np.int64)
    profile = {}
    best_d = None
    best_total = None
    for d in candidates:
        if not 1 <= d <= p:
            raise InvalidDimensionError(f"candidate dimension {d} outside [1, {p}]")
        cfg_d = replace(cfg, d=d)

        def run(b1, cfg_d=cfg_d):
            blk, _ = _run_block(cfg_d, X, y, point_ids, b1, key_head=(d,))
            return blk.error_count

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                winner_counts = np.array(list(pool.map(run, range(cfg.B1))), dtype=np.int64)
        else:
            winner_counts = np.array([run(b1) for b1 in range(cfg.B1)], dtype=np.int64)
        profile[d] = winner_counts
        total = int(winner_counts.sum())
        # Candidates ascend, so strict < keeps the smallest d on ties.
        if best_total is None or total < best_total:
            best_total = total
            best_d = d
    return best_d, profile
