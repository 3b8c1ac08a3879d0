"""Location/scatter estimators: classical moments and six robust variants.

Every fit is a pure function of ``(data, spec, seed)``: all random draws
(subset indices, projection directions) are made up front from the supplied
generator, so results are reproducible and affine-equivariance holds with a
fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.stats import chi2

from .errors import DegenerateData, NotPositiveDefinite, TooFewObservations
from .linalg import SpdMatrix, cholesky, mahalanobis_sq_many

KINDS = ("classical", "winsorized", "mve", "mcd", "m-huber", "s-tukey", "sd")

# Labels used in reports and plots; the classifier built on the classical
# estimator is plain GQDA, the robust ones carry the estimator's name.
REPORT_LABELS = {
    "classical": "GQDA",
    "winsorized": "W",
    "mve": "MVE",
    "mcd": "MCD",
    "m-huber": "M",
    "s-tukey": "S",
    "sd": "SD",
}
REPORT_ORDER = ("GQDA", "W", "MVE", "MCD", "M", "S", "SD")

_TINY = 1e-300


@dataclass(frozen=True)
class EstimatorSpec:
    """Configuration selecting one estimator and its tuning constants.

    Fields not applicable to the selected ``kind`` are ignored.  ``None``
    defaults are resolved at fit time from (n, p):

    - ``subset_size``: floor((n + p + 1) / 2)
    - ``huber_k``: sqrt of the chi-square(p) 0.95 quantile
    - ``n_directions``: max(1000, 200 p) plus min(n(n-1)/2, 1000) extra draws
    """

    kind: str
    winsor_fraction: float = 0.1
    subset_size: int | None = None
    n_subsamples: int = 500
    huber_k: float | None = None
    breakdown: float = 0.5
    n_directions: int | None = None
    trim_fraction: float = 0.05
    tol: float = 1e-8
    max_iterations: int = 200
    n_refine: int = 10
    unbiased: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if not 0.0 < self.winsor_fraction < 0.5:
            raise ValueError("winsor_fraction must be in (0, 0.5)")
        # trim_fraction = 0 is allowed: it disables downweighting entirely.
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ValueError("trim_fraction must be in [0, 0.5)")
        if not 0.0 < self.breakdown <= 0.5:
            raise ValueError("breakdown must be in (0, 0.5]")
        if self.n_subsamples < 1 or self.max_iterations < 1 or self.n_refine < 1:
            raise ValueError("iteration/subsample counts must be >= 1")
        if self.huber_k is not None and self.huber_k <= 0:
            raise ValueError("huber_k must be positive")

    @property
    def label(self) -> str:
        return REPORT_LABELS[self.kind]


@dataclass(frozen=True)
class FitDetails:
    """Optional diagnostics attached to a fit (contents vary by estimator)."""

    support: np.ndarray | None = None
    weights: np.ndarray | None = None
    iterations: int = 0
    raw_log_det: float | None = None
    scale: float | None = None


@dataclass(frozen=True)
class LocationScatter:
    """An estimated center and SPD scatter, with provenance."""

    location: np.ndarray
    scatter: SpdMatrix
    n_used: int
    estimator_tag: str
    converged: bool = True
    details: FitDetails | None = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return self.location.shape[0]


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def _moments(data: np.ndarray, unbiased: bool = False):
    """Mean vector and scatter with divisor n (or n-1 when unbiased)."""
    n = data.shape[0]
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (n - 1 if unbiased else n)
    return mean, cov


def _finish(location, cov, n_used, tag, converged=True, details=None) -> LocationScatter:
    try:
        scatter = cholesky(cov)
    except NotPositiveDefinite as exc:
        raise DegenerateData(f"{tag}: scatter estimate is singular ({exc})") from None
    return LocationScatter(
        location=np.asarray(location, dtype=float),
        scatter=scatter,
        n_used=int(n_used),
        estimator_tag=tag,
        converged=converged,
        details=details,
    )


def fit_classical(data: np.ndarray, unbiased: bool = False, tag: str = "classical") -> LocationScatter:
    """Sample mean and dispersion matrix (divisor n by default)."""
    data = np.asarray(data, dtype=float)
    if data.shape[0] < 2:
        raise TooFewObservations("need at least 2 observations")
    mean, cov = _moments(data, unbiased)
    return _finish(mean, cov, data.shape[0], tag)


def fit_winsorized(data: np.ndarray, winsor_fraction: float = 0.1) -> LocationScatter:
    """Classical moments of the coordinate-wise winsorized sample.

    Per column, the floor(gamma n) smallest values are replaced by the
    smallest retained value and the floor(gamma n) largest by the largest
    retained value.
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if n < 2:
        raise TooFewObservations("need at least 2 observations")
    k = int(math.floor(winsor_fraction * n))
    if k > 0:
        srt = np.sort(data, axis=0)
        data = np.clip(data, srt[k], srt[n - 1 - k])
    mean, cov = _moments(data)
    return _finish(mean, cov, n, "winsorized")


# ---------------------------------------------------------------------------
# Subset machinery shared by the subsampling estimators.


def _default_h(n: int, p: int) -> int:
    return (n + p + 1) // 2


def _resolve_h(spec: EstimatorSpec, n: int, p: int) -> int:
    h = spec.subset_size if spec.subset_size is not None else _default_h(n, p)
    if not (p < h <= n):
        raise ValueError(f"subset size h={h} out of range ({p}, {n}]")
    if h < _default_h(n, p):
        raise ValueError(f"subset size h={h} below breakdown bound {_default_h(n, p)}")
    return h


def _draw_subsets(rng: np.random.Generator, k: int, n: int, m: int) -> np.ndarray:
    """k random m-subsets of range(n), as a (k, m) index array."""
    return np.argsort(rng.random((k, n)), axis=1)[:, :m]


def _subset_moments(data: np.ndarray, subsets: np.ndarray):
    pts = data[subsets]
    means = pts.mean(axis=1)
    centered = pts - means[:, None, :]
    covs = np.einsum("kmi,kmj->kij", centered, centered) / subsets.shape[1]
    return means, covs


def _batched_pd_inverse(covs: np.ndarray):
    """Inverses of a stack of matrices plus a mask of the PD ones."""
    sign, logdet = np.linalg.slogdet(covs)
    valid = (sign > 0) & np.isfinite(logdet)
    inv = np.zeros_like(covs)
    idx = np.where(valid)[0]
    for i in idx:
        try:
            inv[i] = np.linalg.inv(covs[i])
        except np.linalg.LinAlgError:
            valid[i] = False
    return inv, valid, logdet


def _batched_sq_distances(data: np.ndarray, means: np.ndarray, inv: np.ndarray) -> np.ndarray:
    centered = data[None, :, :] - means[:, None, :]
    return np.einsum("kni,kij,knj->kn", centered, inv, centered)


# ---------------------------------------------------------------------------
# MVE


def fit_mve(data: np.ndarray, spec: EstimatorSpec, rng=None) -> LocationScatter:
    """Minimum volume ellipsoid by (p+1)-subset search.

    Each subset's ellipsoid is inflated by the h-th smallest squared
    distance so it covers h points, and candidates are scored by volume,
    0.5 log det + (p/2) log inflation.  The fit returned is the classical
    moments of the h points inside the winning ellipsoid with the Normal-
    consistency factor (the bare (p+1)-point center would carry O(1) noise;
    refitting on the covered set is what production MVE code does).
    ``details.raw_log_det`` keeps the winning log-volume for oracle checks.
    """
    data = np.asarray(data, dtype=float)
    rng = _as_rng(rng)
    n, p = data.shape
    h = _resolve_h(spec, n, p)
    subsets = _draw_subsets(rng, spec.n_subsamples, n, p + 1)
    means, covs = _subset_moments(data, subsets)
    inv, valid, logdet = _batched_pd_inverse(covs)
    if not valid.any():
        raise DegenerateData("mve: no subset produced a nonsingular scatter")
    d2 = _batched_sq_distances(data, means, inv)
    m2 = np.partition(d2, h - 1, axis=1)[:, h - 1]
    valid &= m2 > _TINY
    if not valid.any():
        raise DegenerateData("mve: no subset produced a usable ellipsoid")
    score = np.where(valid, 0.5 * logdet + 0.5 * p * np.log(np.maximum(m2, _TINY)), np.inf)
    best = int(np.argmin(score))
    support = np.sort(np.argpartition(d2[best], h - 1)[:h])
    pts = data[support]
    loc = pts.mean(axis=0)
    centered = pts - loc
    cov = centered.T @ centered / h * _mcd_consistency(h / n, p)
    return _finish(
        loc, cov, h, "mve",
        details=FitDetails(support=support, raw_log_det=float(score[best])),
    )


# ---------------------------------------------------------------------------
# MCD


def _c_step(data: np.ndarray, location: np.ndarray, cov: np.ndarray, h: int):
    """One concentration step: refit on the h nearest points.

    Returns (support, location, cov, log_det) with cov over the new support
    (divisor h).  The determinant never increases across successive steps.
    """
    spd = cholesky(cov)
    d2 = mahalanobis_sq_many(data, location, spd)
    support = np.sort(np.argpartition(d2, h - 1)[:h])
    pts = data[support]
    new_loc = pts.mean(axis=0)
    centered = pts - new_loc
    new_cov = centered.T @ centered / h
    sign, logdet = np.linalg.slogdet(new_cov)
    if sign <= 0:
        raise NotPositiveDefinite("c-step produced a singular scatter")
    return support, new_loc, new_cov, float(logdet)


def _mcd_consistency(alpha: float, p: int) -> float:
    return alpha / chi2.cdf(chi2.ppf(alpha, df=p), df=p + 2)


def fit_mcd(data: np.ndarray, spec: EstimatorSpec, rng=None) -> LocationScatter:
    """Fast minimum covariance determinant.

    Random (p+1)-subset starts are concentrated with two batched C-steps;
    the best ``n_refine`` candidates are iterated to convergence and the
    smallest-determinant solution kept (ties broken by draw order).  The
    raw h-subset scatter is rescaled by the Normal-consistency factor.
    """
    data = np.asarray(data, dtype=float)
    rng = _as_rng(rng)
    n, p = data.shape
    h = _resolve_h(spec, n, p)
    if h == n:
        fit = fit_classical(data, tag="mcd")
        return replace(
            fit,
            details=FitDetails(support=np.arange(n), raw_log_det=fit.scatter.log_det),
        )

    subsets = _draw_subsets(rng, spec.n_subsamples, n, p + 1)
    means, covs = _subset_moments(data, subsets)
    inv, valid, _ = _batched_pd_inverse(covs)
    if not valid.any():
        raise DegenerateData("mcd: no subset produced a nonsingular scatter")

    # Two batched concentration passes over all valid starts.  Exact
    # C-steps never increase the determinant; with 1e6-scale outliers the
    # batched inverses can reorder near-tied supports, so a refit is only
    # accepted when it does not increase the objective.
    logdets = np.full(len(subsets), np.inf)
    idx = np.where(valid)[0]
    d2 = _batched_sq_distances(data, means[idx], inv[idx])
    supports = np.argpartition(d2, h - 1, axis=1)[:, :h]

    def _refit(sup):
        pts = data[sup]
        locs = pts.mean(axis=1)
        centered = pts - locs[:, None, :]
        hcovs = np.einsum("kmi,kmj->kij", centered, centered) / h
        return (locs, hcovs) + _batched_pd_inverse(hcovs)

    locs, hcovs, hinv, hvalid, hlogdet = _refit(supports)
    d2 = _batched_sq_distances(data, locs, hinv)
    new_supports = np.argpartition(d2, h - 1, axis=1)[:, :h]
    new_locs, new_hcovs, new_hinv, new_hvalid, new_hlogdet = _refit(new_supports)
    improved = new_hvalid & (~hvalid | (new_hlogdet <= hlogdet))
    supports = np.where(improved[:, None], new_supports, supports)
    locs = np.where(improved[:, None], new_locs, locs)
    hcovs = np.where(improved[:, None, None], new_hcovs, hcovs)
    hlogdet = np.where(improved, new_hlogdet, hlogdet)
    hvalid = hvalid | improved
    logdets[idx] = np.where(hvalid, hlogdet, np.inf)
    if not np.isfinite(logdets).any():
        raise DegenerateData("mcd: all concentration starts degenerate")

    # Full refinement of the leading candidates; stable order keeps ties
    # resolved toward the earliest draw.
    order = np.argsort(logdets, kind="stable")[: spec.n_refine]
    best = None
    for ci in order:
        if not np.isfinite(logdets[ci]):
            continue
        pos = int(np.where(idx == ci)[0][0])
        loc, cov = locs[pos], hcovs[pos]
        logdet = float(logdets[ci])
        support = np.sort(supports[pos])
        try:
            cholesky(cov)
        except NotPositiveDefinite:
            continue
        for _ in range(spec.max_iterations):
            try:
                new_support, new_loc, new_cov, new_logdet = _c_step(data, loc, cov, h)
            except NotPositiveDefinite:
                break
            if new_logdet > logdet + 1e-9 * max(1.0, abs(logdet)):
                break  # numerical non-decrease: keep the previous iterate
            done = np.array_equal(new_support, support)
            support, loc, cov, logdet = new_support, new_loc, new_cov, new_logdet
            if done:
                break
        if best is None or logdet < best[0] - 1e-12 * max(1.0, abs(logdet)):
            best = (logdet, loc, cov, support)
    if best is None:
        raise DegenerateData("mcd: refinement found no nonsingular candidate")

    raw_logdet, loc, cov, support = best
    factor = _mcd_consistency(h / n, p)
    return _finish(
        loc, cov * factor, h, "mcd",
        details=FitDetails(support=support, raw_log_det=float(raw_logdet)),
    )


# ---------------------------------------------------------------------------
# Huber M-estimator


@lru_cache(maxsize=None)
def _huber_normalizer(k: float, p: int) -> float:
    """E[min(chi2_p, k^2)] / p, the Normal-expectation normalizer.

    The body integrates numerically up to min(k^2, far tail) and closes the
    remainder with the chi-square identity E[s 1(s>B)] = p (1 - F_{p+2}(B)).
    """
    ksq = k * k
    upper = min(ksq, float(chi2.ppf(1.0 - 1e-15, df=p)))
    body, _ = integrate.quad(lambda s: s * chi2.pdf(s, df=p), 0.0, upper, limit=200)
    remainder = p * (chi2.sf(upper, df=p + 2) - chi2.sf(ksq, df=p + 2))
    tail = ksq * chi2.sf(ksq, df=p)
    return (body + remainder + tail) / p


def fit_m_huber(data: np.ndarray, spec: EstimatorSpec) -> LocationScatter:
    """Huber-weight M-estimator by fixed-point iteration.

    Location weights min(1, k/d) on Mahalanobis distances, scatter weights
    min(1, k^2/d^2) normalized so the scatter is Normal-consistent.  As
    k grows both weights tend to 1 and the fit reduces to the classical
    moments.  If the iteration cap is hit the last iterate is returned
    with ``converged=False``.
    """
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    k = spec.huber_k if spec.huber_k is not None else math.sqrt(chi2.ppf(0.95, df=p))
    sigma_k = _huber_normalizer(k, p)
    loc, cov = _moments(data)
    converged = False
    iterations = 0
    for iterations in range(1, spec.max_iterations + 1):
        try:
            spd = cholesky(cov)
        except NotPositiveDefinite as exc:
            raise DegenerateData(f"m-huber: scatter became singular ({exc})") from None
        d2 = mahalanobis_sq_many(data, loc, spd)
        d = np.sqrt(np.maximum(d2, 0.0))
        w1 = np.minimum(1.0, k / np.maximum(d, _TINY))
        new_loc = (w1[:, None] * data).sum(axis=0) / w1.sum()
        w2 = np.minimum(1.0, k * k / np.maximum(d2, _TINY)) / sigma_k
        centered = data - new_loc
        new_cov = (w2[:, None] * centered).T @ centered / n
        shift = float(np.linalg.norm(new_loc - loc))
        delta = float(np.linalg.norm(new_cov - cov))
        loc, cov = new_loc, new_cov
        if shift < spec.tol and delta < spec.tol:
            converged = True
            break
    return _finish(
        loc, cov, n, "m-huber",
        converged=converged, details=FitDetails(iterations=iterations),
    )


# ---------------------------------------------------------------------------
# Tukey biweight S-estimator


def _rho_tukey(u: np.ndarray, b: float) -> np.ndarray:
    """Integrated Tukey biweight, increasing on [0, b), constant b^2/6 after."""
    u = np.minimum(np.abs(u), b)
    usq = u * u
    return usq / 2.0 - usq * usq / (2.0 * b * b) + usq * usq * usq / (6.0 * b**4)


def _weight_tukey(u: np.ndarray, b: float) -> np.ndarray:
    t = np.clip(1.0 - (u / b) ** 2, 0.0, None)
    return t * t


@lru_cache(maxsize=None)
def _tukey_b(p: int, breakdown: float) -> tuple[float, float]:
    """Solve E[rho_b(||Z||)] = breakdown * b^2/6 under N_p(0, I).

    Uses truncated chi-square moments E[s^m 1(s<=x)] = prod(p+2i) F_{p+2m}(x)
    to evaluate the expectation in closed form; returns (b, constraint c).
    """

    def expected_rho(b: float) -> float:
        bsq = b * b
        return (
            0.5 * p * chi2.cdf(bsq, df=p + 2)
            - p * (p + 2) / (2.0 * bsq) * chi2.cdf(bsq, df=p + 4)
            + p * (p + 2) * (p + 4) / (6.0 * bsq * bsq) * chi2.cdf(bsq, df=p + 6)
            + bsq / 6.0 * chi2.sf(bsq, df=p)
        )

    b = brentq(lambda t: expected_rho(t) - breakdown * t * t / 6.0, 1e-2, 1e3, xtol=1e-12)
    return float(b), float(breakdown * b * b / 6.0)


def _solve_m_scale(d: np.ndarray, b: float, c: float) -> float:
    """The M-scale s with mean(rho(d/s)) = c; raises if unattainable."""
    rho_max = b * b / 6.0
    frac_positive = float(np.mean(d > 0))
    if frac_positive * rho_max <= c:
        raise DegenerateData("s-tukey: too many coincident points for the M-scale")
    s = float(np.median(d[d > 0])) / math.sqrt(chi2.ppf(0.5, df=1))
    s = max(s, _TINY)
    lo, hi = s, s
    while np.mean(_rho_tukey(d / lo, b)) <= c:
        lo /= 8.0
        if lo < 1e-280:
            raise DegenerateData("s-tukey: M-scale underflow")
    while np.mean(_rho_tukey(d / hi, b)) > c:
        hi *= 8.0
        if hi > 1e280:
            raise DegenerateData("s-tukey: M-scale overflow")
    return float(brentq(lambda t: np.mean(_rho_tukey(d / t, b)) - c, lo, hi, xtol=1e-14, rtol=1e-14))


def _approx_scale(d: np.ndarray, s: np.ndarray, b: float, c: float, steps: int = 2) -> np.ndarray:
    """Cheap vectorized refinement s^2 <- s^2 mean(rho(d/s))/c, per candidate."""
    for _ in range(steps):
        mean_rho = np.mean(_rho_tukey(d / s[:, None], b), axis=1)
        s = s * np.sqrt(np.maximum(mean_rho, _TINY) / c)
    return s


def fit_s_tukey(data: np.ndarray, spec: EstimatorSpec, rng=None) -> LocationScatter:
    """S-estimator with Tukey's biweight, fast subset search.

    Minimizes the scatter determinant subject to mean(rho(d_i)) = c.  The
    tuning constant b is solved so the estimator is Normal-consistent at the
    requested breakdown point.  Candidates from random (p+1)-subsets are
    screened with cheap reweighting steps; the best few are iterated with
    exact M-scale solves, which decrease monotonically.  The returned
    scatter satisfies the rho-constraint with equality.
    """
    data = np.asarray(data, dtype=float)
    rng = _as_rng(rng)
    n, p = data.shape
    b, c = _tukey_b(p, spec.breakdown)

    subsets = _draw_subsets(rng, spec.n_subsamples, n, p + 1)
    means, covs = _subset_moments(data, subsets)
    inv, valid, logdet = _batched_pd_inverse(covs)
    if not valid.any():
        raise DegenerateData("s-tukey: no subset produced a nonsingular scatter")
    idx = np.where(valid)[0]
    # Unit-determinant shapes; distances depend on the shape, not its scale.
    det_root = np.exp(logdet[idx] / p)
    locs = means[idx]
    shapes = covs[idx] / det_root[:, None, None]
    shape_inv = inv[idx] * det_root[:, None, None]
    d = np.sqrt(np.maximum(_batched_sq_distances(data, locs, shape_inv), 0.0))
    scales = np.median(d, axis=1) / math.sqrt(chi2.ppf(0.5, df=p))
    scales = _approx_scale(d, np.maximum(scales, _TINY), b, c, steps=3)
    dead = ~np.isfinite(scales)

    for _ in range(2):  # screening I-steps across all candidates at once
        w = _weight_tukey(d / np.where(dead, 1.0, scales)[:, None], b)
        wsum = w.sum(axis=1)
        step_ok = ~dead & (wsum > p + 1)
        wsum = np.where(step_ok, wsum, n)
        new_locs = (w[:, :, None] * data[None, :, :]).sum(axis=1) / wsum[:, None]
        centered = data[None, :, :] - new_locs[:, None, :]
        m = np.einsum("kn,kni,knj->kij", w, centered, centered) / n
        minv, mvalid, mlogdet = _batched_pd_inverse(m)
        step_ok &= mvalid
        droot = np.exp(np.where(step_ok, mlogdet, 0.0) / p)
        locs = np.where(step_ok[:, None], new_locs, locs)
        shapes = np.where(step_ok[:, None, None], m / droot[:, None, None], shapes)
        shape_inv = np.where(step_ok[:, None, None], minv * droot[:, None, None], shape_inv)
        d = np.sqrt(np.maximum(_batched_sq_distances(data, locs, shape_inv), 0.0))
        scales = np.where(dead, np.inf, _approx_scale(d, np.where(dead, 1.0, scales), b, c))
        dead |= ~np.isfinite(scales)

    order = np.argsort(scales, kind="stable")[: spec.n_refine]
    best = None
    for ci in order:
        if not np.isfinite(scales[ci]):
            continue
        loc = locs[ci]
        shape = shapes[ci]
        try:
            spd = cholesky(shape)
            d1 = np.sqrt(np.maximum(mahalanobis_sq_many(data, loc, spd), 0.0))
            s = _solve_m_scale(d1, b, c)
        except (NotPositiveDefinite, DegenerateData):
            continue
        converged = False
        iterations = 0
        for iterations in range(1, spec.max_iterations + 1):
            w = _weight_tukey(d1 / s, b)
            if w.sum() <= p + 1:
                break
            new_loc = (w[:, None] * data).sum(axis=0) / w.sum()
            centered = data - new_loc
            m = (w[:, None] * centered).T @ centered / n
            sign, mlogdet = np.linalg.slogdet(m)
            if sign <= 0:
                break
            new_shape = m * math.exp(-mlogdet / p)
            try:
                spd = cholesky(new_shape)
            except NotPositiveDefinite:
                break
            d1 = np.sqrt(np.maximum(mahalanobis_sq_many(data, new_loc, spd), 0.0))
            try:
                new_s = _solve_m_scale(d1, b, c)
            except DegenerateData:
                break
            if new_s > s * (1.0 + 1e-10):
                break  # accepted sequence of scales stays monotone
            done = abs(new_s - s) < spec.tol * max(s, 1.0)
            loc, shape, s = new_loc, new_shape, new_s
            if done:
                converged = True
                break
        if best is None or s < best[0] * (1.0 - 1e-12):
            best = (s, loc, shape, converged, iterations)
    if best is None:
        raise DegenerateData("s-tukey: no usable candidate")
    s, loc, shape, converged, iterations = best
    return _finish(
        loc, s * s * shape, n, "s-tukey",
        converged=converged, details=FitDetails(iterations=iterations, scale=float(s)),
    )


# ---------------------------------------------------------------------------
# Stahel-Donoho


def _sd_directions(data: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit normals of hyperplanes through p random data points.

    Hyperplane normals transform contravariantly under affine maps, which
    makes the projection outlyingness of every point invariant direction by
    direction; raw random directions would not give that.  For p = 1 the
    set collapses to +-1.
    """
    n, p = data.shape
    if p == 1:
        return np.array([[1.0], [-1.0]])
    subsets = _draw_subsets(rng, count, n, p)
    base = data[subsets[:, 0]]
    diffs = data[subsets[:, 1:]] - base[:, None, :]
    # Null vector of each (p-1, p) difference block via batched SVD.
    _, _, vh = np.linalg.svd(diffs, full_matrices=True)
    normals = vh[:, -1, :]
    norms = np.linalg.norm(normals, axis=1)
    return normals[norms > 0]


def fit_sd(data: np.ndarray, spec: EstimatorSpec, rng=None) -> LocationScatter:
    """Stahel-Donoho estimator with hard zero/one weights.

    Outlyingness is the maximum over the direction set of the
    median/MAD-standardized projection deviation.  Points beyond a
    median-calibrated chi-square cutoff get weight zero: at the Normal
    model the extreme ``trim_fraction`` of observations is discarded in
    expectation, while arbitrarily gross outliers land past the cutoff no
    matter how many there are (up to the median's breakdown point).  A
    fixed-rank trim would cap the breakdown at ``trim_fraction`` itself.
    """
    data = np.asarray(data, dtype=float)
    rng = _as_rng(rng)
    n, p = data.shape
    base = spec.n_directions if spec.n_directions is not None else max(1000, 200 * p)
    count = base + min(n * (n - 1) // 2, 1000)
    directions = _sd_directions(data, count, rng)
    proj = data @ directions.T
    med = np.median(proj, axis=0)
    dev = np.abs(proj - med)
    mad = np.median(dev, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mad > 0, dev / mad, np.where(dev > 0, np.inf, 0.0))
    outlyingness = ratio.max(axis=1)

    weights = np.ones(n)
    if spec.trim_fraction > 0:
        scale = float(np.median(outlyingness))
        cutoff = scale * math.sqrt(
            chi2.ppf(1.0 - spec.trim_fraction, df=p) / chi2.ppf(0.5, df=p)
        )
        weights[outlyingness > cutoff] = 0.0
    kept = int(weights.sum())
    if kept <= p:
        raise DegenerateData("sd: trimming left too few points")
    wsum = weights.sum()
    loc = (weights[:, None] * data).sum(axis=0) / wsum
    centered = data - loc
    cov = (weights[:, None] * centered).T @ centered / wsum
    return _finish(
        loc, cov, kept, "sd",
        details=FitDetails(weights=weights, iterations=directions.shape[0]),
    )


# ---------------------------------------------------------------------------
# Dispatch


def fit(data: np.ndarray, spec: EstimatorSpec, rng=None) -> LocationScatter:
    """Fit the estimator selected by ``spec``; deterministic for a fixed seed."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise TooFewObservations("data must be a 2-D matrix")
    n, p = data.shape
    if n <= p + 1:
        raise TooFewObservations(f"need n > p + 1 (= {p + 1}), got n = {n}")
    if not np.isfinite(data).all():
        raise DegenerateData("data contains non-finite entries")
    if spec.kind == "classical":
        return fit_classical(data, unbiased=spec.unbiased)
    if spec.kind == "winsorized":
        return fit_winsorized(data, spec.winsor_fraction)
    if spec.kind == "mve":
        return fit_mve(data, spec, rng)
    if spec.kind == "mcd":
        return fit_mcd(data, spec, rng)
    if spec.kind == "m-huber":
        return fit_m_huber(data, spec)
    if spec.kind == "s-tukey":
        return fit_s_tukey(data, spec, rng)
    if spec.kind == "sd":
        return fit_sd(data, spec, rng)
    raise ValueError(f"unknown estimator kind {spec.kind!r}")
