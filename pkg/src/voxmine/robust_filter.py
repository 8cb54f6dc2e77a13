"""Data-driven label filtering with a robust generative classifier.

A class-conditional Gaussian classifier whose per-class location/scatter come
from the minimum covariance determinant (MCD) estimator, fitted with the
FastMCD concentration algorithm. Segments are scored by the posterior of
their assigned label; a threshold calibrated on human-verified labels to
(roughly) equalize false positive and false negative rates removes the
segments that are probably mislabeled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from . import accel
from .errors import DataError

DEFAULT_N_STARTS = 500
_DET_TOL = 1e-12


def default_h(n: int, d: int) -> int:
    """Default support size: the maximal-breakdown choice ceil((n+d+1)/2)."""
    return math.ceil((n + d + 1) / 2)


def consistency_factor(h: int, n: int, d: int) -> float:
    """Chi-square consistency scaling for the raw MCD scatter.

    Equals 1 exactly when h == n, so the estimator degenerates to the
    classical mean/covariance.
    """
    frac = h / n
    if frac >= 1.0:
        return 1.0
    return frac / chi2.cdf(chi2.ppf(frac, d), d + 2)


@dataclass(frozen=True)
class McdEstimate:
    location: np.ndarray
    scatter: np.ndarray  # symmetric positive-definite, consistency-scaled
    support_size: int
    det_value: float  # determinant of the raw subset scatter, before scaling
    support: np.ndarray  # sorted indices of the h-subset


def _make_starts(n: int, p: int, n_starts: int, rng: np.random.Generator) -> np.ndarray:
    n_possible = math.comb(n, p)
    if n_possible <= n_starts:
        return np.array(list(combinations(range(n), p)), dtype=np.int64)
    starts = np.empty((n_starts, p), dtype=np.int64)
    for i in range(n_starts):
        starts[i] = rng.choice(n, size=p, replace=False)
    return starts


def mcd_estimate(
    points: np.ndarray,
    h: int | None = None,
    n_starts: int = DEFAULT_N_STARTS,
    seed: int = 0,
    max_steps: int = 100,
) -> McdEstimate:
    """FastMCD: concentrate from random (d+1)-point starts, keep the h-subset
    with the smallest covariance determinant.

    Deterministic under a fixed seed. C-steps must never increase the
    determinant; a violation raises AssertionError.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("points must be a 2-D array")
    n, d = X.shape
    if n <= d:
        raise DataError(f"need more points than dimensions (n={n}, d={d})")
    h_min = default_h(n, d)
    if h is None:
        h = h_min
    if not (h_min <= h <= n):
        raise DataError(f"h={h} outside [{h_min}, {n}]")

    if h == n:
        support = np.arange(n, dtype=np.int64)
    else:
        # MCD is affine-equivariant: standardizing columns leaves the optimal
        # subset unchanged while keeping determinant numerics well scaled
        scale = X.std(axis=0, ddof=1)
        scale[scale <= 0.0] = 1.0
        Xw = (X - X.mean(axis=0)) / scale
        rng = np.random.default_rng(seed)
        starts = _make_starts(n, d + 1, n_starts, rng)
        support, _det, violations = accel.mcd_trials(Xw, starts, h, max_steps, _DET_TOL)
        assert violations == 0, "C-step increased the covariance determinant"

    sub = X[support]
    location = sub.mean(axis=0)
    diff = sub - location
    raw_scatter = diff.T @ diff / (h - 1)
    det_value = float(np.linalg.det(raw_scatter))
    scatter = consistency_factor(h, n, d) * raw_scatter
    scatter = _ensure_spd(scatter)
    return McdEstimate(
        location=location,
        scatter=scatter,
        support_size=h,
        det_value=det_value,
        support=np.sort(np.asarray(support)),
    )


def _ensure_spd(scatter: np.ndarray) -> np.ndarray:
    eigvals = np.linalg.eigvalsh(scatter)
    if eigvals[0] <= 0.0:
        eps = 1e-10 * max(float(np.trace(scatter)) / scatter.shape[0], 1.0) + 1e-300
        warnings.warn(f"degenerate MCD scatter; adding ridge {eps:.3e}")
        scatter = scatter + eps * np.eye(scatter.shape[0])
    return scatter


@dataclass
class GenerativeClassifierModel:
    classes: list[str]
    class_means: dict[str, np.ndarray]
    pooled_scatter: np.ndarray  # shared covariance, support-weighted pool
    priors: dict[str, float]
    threshold: float | None = None
    _inv_means: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        inv = np.linalg.inv(self.pooled_scatter)
        self._inv = inv
        self._inv_means = {c: inv @ self.class_means[c] for c in self.classes}

    def discriminants(self, X: np.ndarray) -> np.ndarray:
        """Linear scores d_c(x) = x'S^-1 mu_c - mu_c'S^-1 mu_c / 2 + ln prior_c."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty((X.shape[0], len(self.classes)))
        for j, c in enumerate(self.classes):
            im = self._inv_means[c]
            out[:, j] = X @ im - 0.5 * self.class_means[c] @ im + math.log(self.priors[c])
        return out

    def posterior(self, x: np.ndarray) -> np.ndarray:
        """Softmax over discriminants; rows sum to 1."""
        scores = self.discriminants(x)
        scores -= scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        p /= p.sum(axis=1, keepdims=True)
        return p[0] if np.asarray(x).ndim == 1 else p

    def posterior_at(self, X: np.ndarray, labels: Sequence[str]) -> np.ndarray:
        """Posterior of each row's assigned label."""
        p = np.atleast_2d(self.posterior(X))
        index = {c: j for j, c in enumerate(self.classes)}
        try:
            cols = np.array([index[l] for l in labels])
        except KeyError as exc:
            raise DataError(f"label {exc.args[0]!r} is not a model class") from exc
        return p[np.arange(len(cols)), cols]


def fit_rog(
    vectors: np.ndarray,
    labels: Sequence[str],
    h: int | None = None,
    n_starts: int = DEFAULT_N_STARTS,
    seed: int = 0,
) -> GenerativeClassifierModel:
    """Fit the robust generative classifier: per-class MCD means, a shared
    support-weighted pooled scatter, and class-frequency priors."""
    X = np.asarray(vectors, dtype=np.float64)
    y = np.array(list(labels))
    classes = sorted(set(y))
    if len(classes) < 2:
        raise DataError("need at least 2 classes")
    n, d = X.shape
    means: dict[str, np.ndarray] = {}
    priors: dict[str, float] = {}
    pooled = np.zeros((d, d))
    total_support = 0
    for c in classes:
        Xc = X[y == c]
        if Xc.shape[0] <= d:
            raise DataError(
                f"class {c!r} has {Xc.shape[0]} points for dimension {d}; "
                "project to a lower dimension first"
            )
        est = mcd_estimate(Xc, h=h, n_starts=n_starts, seed=seed)
        means[c] = est.location
        pooled += est.support_size * est.scatter
        total_support += est.support_size
        priors[c] = Xc.shape[0] / n
    pooled /= total_support
    pooled = _ensure_spd(pooled)
    return GenerativeClassifierModel(
        classes=classes, class_means=means, pooled_scatter=pooled, priors=priors
    )


def select_threshold(scores: np.ndarray, correct: np.ndarray) -> float:
    """Pick the posterior threshold that best equalizes FPR and FNR.

    FPR(t): fraction of incorrectly-labeled segments with score >= t (kept
    wrongly); FNR(t): fraction of correctly-labeled segments with score < t
    (removed wrongly). Candidates are the observed scores plus 0 and 1+eps;
    ties resolve to the smaller threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if scores.shape != correct.shape:
        raise DataError("scores and correctness flags must align")
    n_bad = int((~correct).sum())
    n_good = int(correct.sum())
    if n_bad == 0 or n_good == 0:
        raise DataError("threshold selection needs both correct and incorrect segments")
    candidates = np.unique(np.concatenate([scores, [0.0, 1.0 + 1e-9]]))
    best_tau = None
    best_gap = math.inf
    for tau in candidates:  # ascending, so ties keep the smaller tau
        fpr = float((scores[~correct] >= tau).mean())
        fnr = float((scores[correct] < tau).mean())
        gap = abs(fpr - fnr)
        if gap < best_gap - 1e-15:
            best_gap = gap
            best_tau = float(tau)
    return best_tau


@dataclass(frozen=True)
class FilterReport:
    kept: frozenset[str]
    removed: frozenset[str]
    est_fpr: float | None
    est_fnr: float | None
    noise_before: float | None
    noise_after: float | None


def filter_dataset(
    segment_labels: Mapping[str, str],
    embeddings: Mapping[str, np.ndarray],
    model: GenerativeClassifierModel,
    tau: float,
    correctness: Mapping[str, bool] | None = None,
) -> FilterReport:
    """Keep segments whose posterior at their assigned label is >= tau.

    `correctness` (from crowd labels, where available) drives the report's
    FPR/FNR and noise-proportion estimates.
    """
    missing = sorted(s for s in segment_labels if s not in embeddings)
    if missing:
        raise DataError(f"missing embeddings for segments: {', '.join(missing)}")
    ids = sorted(segment_labels)
    if not ids:
        return FilterReport(frozenset(), frozenset(), None, None, None, None)
    X = np.stack([embeddings[s] for s in ids])
    scores = model.posterior_at(X, [segment_labels[s] for s in ids])
    kept = frozenset(s for s, sc in zip(ids, scores) if sc >= tau)
    removed = frozenset(ids) - kept

    est_fpr = est_fnr = noise_before = noise_after = None
    if correctness:
        labeled = [s for s in ids if s in correctness]
        if labeled:
            bad = [s for s in labeled if not correctness[s]]
            good = [s for s in labeled if correctness[s]]
            if bad:
                est_fpr = sum(1 for s in bad if s in kept) / len(bad)
                noise_before = len(bad) / len(labeled)
            if good:
                est_fnr = sum(1 for s in good if s not in kept) / len(good)
            kept_labeled = [s for s in labeled if s in kept]
            if kept_labeled:
                noise_after = sum(1 for s in kept_labeled if not correctness[s]) / len(kept_labeled)
            elif bad:
                noise_after = 0.0
    return FilterReport(
        kept=kept,
        removed=removed,
        est_fpr=est_fpr,
        est_fnr=est_fnr,
        noise_before=noise_before,
        noise_after=noise_after,
    )


_FORMAT_VERSION = "voxmine-rog v1"


def save_model(model: GenerativeClassifierModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_FORMAT_VERSION}\n")
        fh.write(f"dim\t{model.pooled_scatter.shape[0]}\n")
        fh.write("classes\t" + "\t".join(model.classes) + "\n")
        fh.write(f"tau\t{'' if model.threshold is None else repr(model.threshold)}\n")
        for c in model.classes:
            fh.write(f"prior\t{c}\t{model.priors[c]!r}\n")
            fh.write(f"mean\t{c}\t" + ",".join(repr(float(v)) for v in model.class_means[c]) + "\n")
        for row in model.pooled_scatter:
            fh.write("scatter\t" + ",".join(repr(float(v)) for v in row) + "\n")


def load_model(path) -> GenerativeClassifierModel:
    with open(path, "r", encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != _FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format")
        classes: list[str] = []
        priors: dict[str, float] = {}
        means: dict[str, np.ndarray] = {}
        scatter_rows: list[list[float]] = []
        tau: float | None = None
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "classes":
                classes = parts[1:]
            elif parts[0] == "tau":
                tau = float(parts[1]) if parts[1] else None
            elif parts[0] == "prior":
                priors[parts[1]] = float(parts[2])
            elif parts[0] == "mean":
                means[parts[1]] = np.array([float(v) for v in parts[2].split(",")])
            elif parts[0] == "scatter":
                scatter_rows.append([float(v) for v in parts[1].split(",")])
    return GenerativeClassifierModel(
        classes=classes,
        class_means=means,
        pooled_scatter=np.array(scatter_rows),
        priors=priors,
        threshold=tau,
    )
