"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The fallback path is selected with ``VOXMINE_NUMBA=0`` (or when numba is not
importable). Both paths implement identical semantics and are parity-tested;
``benchmarks/bench_accel.py`` compares their throughput.

Kernels:
  - FastMCD concentration trials (the inner loop of the robust covariance
    estimator): hundreds of restarts, each iterating C-steps to convergence.
  - VAD flag smoothing (hangover gap merging over frame decisions).
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("VOXMINE_NUMBA", "1").strip().lower()
_WANT_NUMBA = _env not in ("0", "false", "no", "off")

if _WANT_NUMBA:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# FastMCD trial loop.
#
# Written twice: once in loop style (compiled by numba) and once vectorized
# in numpy. Both take the same arguments:
#
#   X        (n, d) float64 data
#   starts   (m, p) int64 initial point-index subsets, p >= 1
#   h        concentration subset size
#   max_steps  C-step cap per trial
#   tol      relative determinant-change convergence tolerance
#
# and return
#
#   support  (h,) int64 sorted indices of the best subset found
#   det      float, determinant of the (h-1)-divisor covariance of `support`
#   violations  int, count of C-steps that increased the determinant beyond
#               a 1e-9 relative tolerance (must stay 0; asserted by callers)
#
# A C-step replaces the current subset with the h points of smallest
# Mahalanobis distance under the current estimates; it never increases the
# subset covariance determinant.
# ---------------------------------------------------------------------------

_RIDGE_REL = 1e-10
_RIDGE_ABS = 1e-300
_MONO_TOL = 1e-9


def _mcd_trials_loops(X, starts, h, max_steps, tol):
    n, d = X.shape
    m = starts.shape[0]

    best_det = np.inf
    best_support = np.empty(h, dtype=np.int64)
    violations = 0

    mean = np.empty(d)
    cov = np.empty((d, d))
    inv = np.empty((d, d))
    dist = np.empty(n)

    for t in range(m):
        idx = starts[t]
        k = idx.shape[0]
        _mean_cov_loops(X, idx, k, mean, cov)
        prev_det = -1.0
        trial_det = np.inf
        trial_support = np.empty(0, dtype=np.int64)
        have_support = False
        for _step in range(max_steps):
            det = _inv_spd_loops(cov, inv)
            if det <= 0.0:
                # degenerate estimate: ridge and retry the inversion once
                tr = 0.0
                for a in range(d):
                    tr += cov[a, a]
                eps = _RIDGE_REL * tr / d + _RIDGE_ABS
                for a in range(d):
                    cov[a, a] += eps
                det = _inv_spd_loops(cov, inv)
                if det <= 0.0:
                    break
            for i in range(n):
                s = 0.0
                for a in range(d):
                    row = 0.0
                    for b in range(d):
                        row += inv[a, b] * (X[i, b] - mean[b])
                    s += (X[i, a] - mean[a]) * row
                dist[i] = s
            # sorted support: accumulation below is permutation-independent
            support = np.sort(np.argsort(dist)[:h])
            if have_support:
                same = True
                for i in range(h):
                    if support[i] != trial_support[i]:
                        same = False
                        break
                if same:
                    break  # fixed point: the subset cannot improve further
            _mean_cov_loops(X, support, h, mean, cov)
            new_det = _det_spd_loops(cov)
            if prev_det >= 0.0 and new_det > prev_det * (1.0 + _MONO_TOL) + _RIDGE_ABS:
                violations += 1
            trial_det = new_det
            trial_support = support
            have_support = True
            if new_det <= 0.0:
                break  # exact fit: the determinant cannot go lower
            if prev_det >= 0.0 and abs(prev_det - new_det) <= tol * prev_det:
                break
            prev_det = new_det
        if have_support and trial_det < best_det:
            best_det = trial_det
            best_support = trial_support
    return best_support, best_det, violations


def _mean_cov_loops(X, idx, k, mean, cov):
    d = X.shape[1]
    for a in range(d):
        s = 0.0
        for i in range(k):
            s += X[idx[i], a]
        mean[a] = s / k
    denom = k - 1 if k > 1 else 1
    for a in range(d):
        for b in range(a, d):
            s = 0.0
            for i in range(k):
                s += (X[idx[i], a] - mean[a]) * (X[idx[i], b] - mean[b])
            cov[a, b] = s / denom
            cov[b, a] = cov[a, b]


def _det_spd_loops(cov):
    # LU with partial pivoting on a copy; det of a PSD matrix clamps to >= 0
    d = cov.shape[0]
    lu = cov.copy()
    det = 1.0
    for col in range(d):
        piv = col
        big = abs(lu[col, col])
        for r in range(col + 1, d):
            if abs(lu[r, col]) > big:
                big = abs(lu[r, col])
                piv = r
        if big == 0.0:
            return 0.0
        if piv != col:
            for c in range(d):
                tmp = lu[col, c]
                lu[col, c] = lu[piv, c]
                lu[piv, c] = tmp
            det = -det
        det *= lu[col, col]
        for r in range(col + 1, d):
            f = lu[r, col] / lu[col, col]
            for c in range(col, d):
                lu[r, c] -= f * lu[col, c]
    if det < 0.0:
        return 0.0
    return det


def _inv_spd_loops(cov, inv):
    # Gauss-Jordan inverse; returns det (0.0 signals a singular matrix)
    d = cov.shape[0]
    aug = np.empty((d, 2 * d))
    for a in range(d):
        for b in range(d):
            aug[a, b] = cov[a, b]
            aug[a, d + b] = 1.0 if a == b else 0.0
    det = 1.0
    for col in range(d):
        piv = col
        big = abs(aug[col, col])
        for r in range(col + 1, d):
            if abs(aug[r, col]) > big:
                big = abs(aug[r, col])
                piv = r
        if big == 0.0:
            return 0.0
        if piv != col:
            for c in range(2 * d):
                tmp = aug[col, c]
                aug[col, c] = aug[piv, c]
                aug[piv, c] = tmp
            det = -det
        det *= aug[col, col]
        f = aug[col, col]
        for c in range(2 * d):
            aug[col, c] /= f
        for r in range(d):
            if r == col:
                continue
            f = aug[r, col]
            if f != 0.0:
                for c in range(2 * d):
                    aug[r, c] -= f * aug[col, c]
    for a in range(d):
        for b in range(d):
            inv[a, b] = aug[a, d + b]
    if det < 0.0:
        return 0.0
    return det


def _mcd_trials_numpy(X, starts, h, max_steps, tol):
    n, d = X.shape
    best_det = np.inf
    best_support = np.empty(h, dtype=np.int64)
    violations = 0

    for idx in starts:
        sub = X[idx]
        mean = sub.mean(axis=0)
        cov = _cov1(sub)
        prev_det = -1.0
        trial_det = np.inf
        trial_support = None
        for _step in range(max_steps):
            det, inv = _inv_spd_numpy(cov)
            if det <= 0.0:
                cov = cov + np.eye(d) * (_RIDGE_REL * np.trace(cov) / d + _RIDGE_ABS)
                det, inv = _inv_spd_numpy(cov)
                if det <= 0.0:
                    break
            diff = X - mean
            dist = np.einsum("ij,jk,ik->i", diff, inv, diff)
            support = np.sort(np.argsort(dist)[:h]).astype(np.int64)
            if trial_support is not None and np.array_equal(support, trial_support):
                break  # fixed point: the subset cannot improve further
            sub = X[support]
            mean = sub.mean(axis=0)
            cov = _cov1(sub)
            new_det = max(float(np.linalg.det(cov)), 0.0)
            if prev_det >= 0.0 and new_det > prev_det * (1.0 + _MONO_TOL) + _RIDGE_ABS:
                violations += 1
            trial_det = new_det
            trial_support = support
            if new_det <= 0.0:
                break  # exact fit: the determinant cannot go lower
            if prev_det >= 0.0 and abs(prev_det - new_det) <= tol * prev_det:
                break
            prev_det = new_det
        if trial_support is not None and trial_det < best_det:
            best_det = trial_det
            best_support = trial_support
    return best_support, best_det, violations


def _cov1(sub):
    k = sub.shape[0]
    diff = sub - sub.mean(axis=0)
    return diff.T @ diff / (k - 1 if k > 1 else 1)


def _inv_spd_numpy(cov):
    det = float(np.linalg.det(cov))
    if not np.isfinite(det) or det <= 0.0:
        return 0.0, None
    try:
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        return 0.0, None
    return det, inv


# ---------------------------------------------------------------------------
# VAD hangover smoothing: fill 0-gaps of at most `max_gap` frames that sit
# between speech runs.
# ---------------------------------------------------------------------------


def _smooth_gaps_loops(flags, max_gap):
    n = flags.shape[0]
    out = flags.copy()
    last_speech = -1
    for i in range(n):
        if flags[i] == 1:
            if last_speech >= 0 and 0 < i - last_speech - 1 <= max_gap:
                for j in range(last_speech + 1, i):
                    out[j] = 1
            last_speech = i
    return out


def _smooth_gaps_numpy(flags, max_gap):
    out = flags.copy()
    speech_idx = np.flatnonzero(flags)
    if speech_idx.size < 2:
        return out
    gaps = np.diff(speech_idx) - 1
    for k in np.flatnonzero((gaps > 0) & (gaps <= max_gap)):
        out[speech_idx[k] + 1 : speech_idx[k + 1]] = 1
    return out


if NUMBA_ENABLED:
    _mean_cov_loops = njit(cache=True)(_mean_cov_loops)
    _det_spd_loops = njit(cache=True)(_det_spd_loops)
    _inv_spd_loops = njit(cache=True)(_inv_spd_loops)
    _mcd_trials_jit = njit(cache=True)(_mcd_trials_loops)
    _smooth_gaps_jit = njit(cache=True)(_smooth_gaps_loops)
else:
    _mcd_trials_jit = None
    _smooth_gaps_jit = None


def mcd_trials(X, starts, h, max_steps=100, tol=1e-12):
    """Run FastMCD concentration from every start; return the best subset.

    Returns (support, det, violations): sorted indices of the best h-subset,
    the determinant of its (h-1)-divisor covariance, and the count of
    monotonicity violations (a C-step increasing the determinant), which is
    asserted to be zero by the caller.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    if NUMBA_ENABLED:
        return _mcd_trials_jit(X, starts, int(h), int(max_steps), float(tol))
    return _mcd_trials_numpy(X, starts, int(h), int(max_steps), float(tol))


def smooth_gaps(flags, max_gap):
    """Merge non-speech gaps of at most `max_gap` frames between speech runs."""
    flags = np.ascontiguousarray(flags, dtype=np.uint8)
    if NUMBA_ENABLED:
        return _smooth_gaps_jit(flags, int(max_gap))
    return _smooth_gaps_numpy(flags, int(max_gap))


def warmup():
    """Trigger JIT compilation of all kernels (no-op on the numpy path)."""
    X = np.random.default_rng(0).normal(size=(8, 2))
    starts = np.array([[0, 1, 2], [3, 4, 5]], dtype=np.int64)
    mcd_trials(X, starts, 5)
    smooth_gaps(np.array([1, 0, 1], dtype=np.uint8), 1)
