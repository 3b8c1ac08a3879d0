"""The GQDA decision rule, threshold selection, and model (de)serialization.

The rule assigns x to the class minimizing d_i^2(x) + c * log|Sigma_i|,
which is the max-min-margin extension of the pairwise comparisons
"Delta^2_ij >= c * (log|Sigma_i| - log|Sigma_j|) for all j".  c = 0 gives
the minimum-Mahalanobis-distance rule, c = 1 the usual quadratic rule.
The threshold is chosen from the training set by resubstitution-error
minimization; see ``select_c_two_class`` and ``select_c_multiclass``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, DimensionMismatch, EmptyDataset
from .estimators import EstimatorSpec, LocationScatter, fit as fit_estimator
from .linalg import cholesky, mahalanobis_sq, mahalanobis_sq_many

# Pairs whose |log-determinant difference| falls below this are degenerate:
# the ratio u = Delta^2 / Sigma_d is meaningless, the rule itself is not.
SIGMA_TOL = 1e-8

MODEL_FORMAT = "rgqda-model-v1"


@dataclass(frozen=True)
class PairStatistic:
    """Oriented log-determinant gap for one unordered class pair."""

    first: int
    second: int
    sigma_d: float
    degenerate: bool


@dataclass(frozen=True)
class GqdaModel:
    """A trained classifier: per-class fits plus the selected threshold."""

    classes: tuple
    fits: tuple[LocationScatter, ...]
    c_star: float
    estimator_tag: str
    pair_cache: tuple[PairStatistic, ...] = field(default=(), compare=False)
    degenerate_two_class: bool = False

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("need at least two classes")
        if not 0.0 <= self.c_star <= 1.0:
            raise ValueError("c_star must lie in [0, 1]")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return self.fits[0].dim

    @property
    def log_dets(self) -> np.ndarray:
        return np.array([f.scatter.log_det for f in self.fits])


def class_indices(labels, classes) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(classes)}
    return np.fromiter((lookup[l] for l in labels), dtype=int, count=len(labels))


def sigma_d(i: int, j: int, model: GqdaModel) -> PairStatistic:
    """Oriented pair statistic: ``first`` has the larger log-determinant."""
    log_dets = model.log_dets
    gap = float(log_dets[i] - log_dets[j])
    if gap < 0:
        i, j, gap = j, i, -gap
    return PairStatistic(first=i, second=j, sigma_d=gap, degenerate=gap < SIGMA_TOL)


def delta_sq(x: np.ndarray, i: int, j: int, model: GqdaModel) -> float:
    """Difference of squared Mahalanobis distances, d_j^2(x) - d_i^2(x)."""
    fi, fj = model.fits[i], model.fits[j]
    return mahalanobis_sq(x, fj.location, fj.scatter) - mahalanobis_sq(x, fi.location, fi.scatter)


def _distance_matrix(features: np.ndarray, fits) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != fits[0].dim:
        raise DimensionMismatch(
            f"features {features.shape} incompatible with model dimension {fits[0].dim}"
        )
    return np.column_stack(
        [mahalanobis_sq_many(features, f.location, f.scatter) for f in fits]
    )


def _scores(d2: np.ndarray, log_dets: np.ndarray, c: float) -> np.ndarray:
    return d2 + c * log_dets[None, :]


def predict_indices(model: GqdaModel, features: np.ndarray, c: float | None = None) -> np.ndarray:
    """Class index per row; ties go to the lowest class index."""
    d2 = _distance_matrix(features, model.fits)
    q = _scores(d2, model.log_dets, model.c_star if c is None else c)
    return np.argmin(q, axis=1)


def predict(model: GqdaModel, features: np.ndarray) -> list:
    return [model.classes[i] for i in predict_indices(model, features)]


def classify(x: np.ndarray, model: GqdaModel):
    """Class label for a single observation."""
    return predict(model, np.asarray(x, dtype=float)[None, :])[0]


def margins(model: GqdaModel, features: np.ndarray, c: float | None = None) -> np.ndarray:
    """Per-class margins min_{j != i} [Delta^2_ij(x) - c Sigma_d_ij].

    The predicted class is the argmax row-wise; equivalently the argmin of
    d_i^2 + c log|Sigma_i|, since the margin equals the gap between class
    i's score and the best other score.
    """
    d2 = _distance_matrix(features, model.fits)
    q = _scores(d2, model.log_dets, model.c_star if c is None else c)
    order = np.argsort(q, axis=1, kind="stable")
    best = q[np.arange(len(q)), order[:, 0]]
    second = q[np.arange(len(q)), order[:, 1]]
    out = best[:, None] - q
    rows = np.arange(len(q))
    out[rows, order[:, 0]] = second - best
    return out


def misclassification_error(model: GqdaModel, features: np.ndarray, labels) -> float:
    """Fraction of rows whose predicted class differs from the label."""
    features = np.asarray(features, dtype=float)
    if features.shape[0] == 0:
        raise EmptyDataset("cannot score an empty dataset")
    truth = class_indices(labels, model.classes)
    return float(np.mean(predict_indices(model, features) != truth))


# ---------------------------------------------------------------------------
# Threshold selection


def _pick_candidate(candidates: np.ndarray, errors: np.ndarray) -> float:
    """Smallest error; ties resolved toward the value nearest 1, then smaller."""
    best = errors.min()
    tied = candidates[errors == best]
    dist = np.abs(tied - 1.0)
    tied = tied[dist == dist.min()]
    return float(tied.min())


def _two_class_ratios(features, labels, fits, classes):
    pair = sigma_d(0, 1, _ModelView(fits))
    if pair.degenerate:
        return pair, None, None
    d2 = _distance_matrix(features, fits)
    idx = class_indices(labels, classes)
    u = (d2[:, pair.second] - d2[:, pair.first]) / pair.sigma_d
    r_first = np.sort(u[idx == pair.first])
    r_second = np.sort(u[idx == pair.second])
    if r_first.size == 0 or r_second.size == 0:
        raise EmptyDataset("both classes need training points")
    return pair, r_first, r_second


def _count_errors(pair, r_first, r_second, candidates):
    # The rule assigns a boundary point (u == c) to the oriented first
    # class ("Delta^2 >= c Sigma_d" is inclusive), so a first-class point
    # errs only when u < c and a second-class point whenever u >= c.
    err_first = np.searchsorted(r_first, candidates, side="left")
    err_second = r_second.size - np.searchsorted(r_second, candidates, side="left")
    return err_first + err_second


def two_class_error_curve(features, labels, fits, classes):
    """Overlap-case candidates and their resubstitution error counts.

    Empty arrays when the pair is degenerate or the ratio sets are
    disjoint (no overlapping order statistics to choose among).
    """
    pair, r_first, r_second = _two_class_ratios(features, labels, fits, classes)
    if r_first is None or r_second[-1] < r_first[0]:
        return np.array([]), np.array([], dtype=int), pair
    candidates = np.unique(r_second[r_second > r_first[0]])
    return candidates, _count_errors(pair, r_first, r_second, candidates), pair


def select_c_two_class(features, labels, fits, classes) -> tuple[float, bool]:
    """Resubstitution threshold for g = 2.

    The pair is oriented so the log-determinant gap is positive; ratios
    u(x) = Delta^2(x) / Sigma_d are formed for every training point.  If
    the two classes' ratio sets are disjoint the midpoint of the gap is
    returned; otherwise the overlapping order statistics of the second
    class are the candidates and the resubstitution-error minimizer wins
    (ties toward 1), the errors being evaluated at the raw candidate
    values.  The result is clamped to [0, 1] afterwards.  A degenerate
    pair (equal determinants) returns (0, True): the rule reduces to MMD.
    """
    pair, r_first, r_second = _two_class_ratios(features, labels, fits, classes)
    if r_first is None:
        return 0.0, True

    candidates = np.array([])
    if r_second[-1] >= r_first[0]:
        candidates = np.unique(r_second[r_second > r_first[0]])
    if candidates.size == 0:
        c = 0.5 * (r_second[-1] + r_first[0])
        return min(max(c, 0.0), 1.0), False
    errors = _count_errors(pair, r_first, r_second, candidates)
    c = _pick_candidate(candidates, errors)
    return min(max(c, 0.0), 1.0), False


class _ModelView:
    """Just enough of the model surface for sigma_d before a model exists."""

    def __init__(self, fits):
        self.fits = tuple(fits)
        self.log_dets = np.array([f.scatter.log_det for f in fits])


def _correctness_intervals(d2: np.ndarray, labels_idx: np.ndarray, log_dets: np.ndarray):
    """Per point: the closed interval of c where all pairwise tests pass.

    For a point of class i and opponent j, the test Delta^2_ij >= c Sigma_d_ij
    caps c from above when Sigma_d_ij > 0, bounds it from below when negative,
    and is a constant pass/fail when the pair is degenerate.
    """
    n = d2.shape[0]
    g = d2.shape[1]
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    feasible = np.ones(n, dtype=bool)
    for i in range(g):
        mask = labels_idx == i
        if not mask.any():
            continue
        for j in range(g):
            if j == i:
                continue
            gap = log_dets[i] - log_dets[j]
            delta = d2[mask, j] - d2[mask, i]
            if abs(gap) < SIGMA_TOL:
                feasible[mask] &= delta >= 0
            else:
                u = delta / gap
                if gap > 0:
                    upper[mask] = np.minimum(upper[mask], u)
                else:
                    lower[mask] = np.maximum(lower[mask], u)
    return lower, upper, feasible


def multiclass_mc_curve(features, labels, fits, classes):
    """Candidate thresholds and their total misclassification counts.

    Candidates are the ratios u_ij(x) in [0, 1] over ordered class pairs
    and the training points of those two classes; MC(c) counts, per class,
    the points failing at least one pairwise test at threshold c.
    """
    fits = tuple(fits)
    log_dets = np.array([f.scatter.log_det for f in fits])
    d2 = _distance_matrix(features, fits)
    idx = class_indices(labels, classes)
    g = len(fits)

    values = []
    for i in range(g):
        for j in range(i + 1, g):
            gap = log_dets[i] - log_dets[j]
            if abs(gap) < SIGMA_TOL:
                continue
            mask = (idx == i) | (idx == j)
            u = (d2[mask, j] - d2[mask, i]) / gap
            values.append(u[(u >= 0.0) & (u <= 1.0)])
    if not values:
        return np.array([]), np.array([], dtype=int)
    candidates = np.unique(np.concatenate(values))
    if candidates.size == 0:
        return np.array([]), np.array([], dtype=int)

    lower, upper, feasible = _correctness_intervals(d2, idx, log_dets)
    feasible &= lower <= upper
    lo = np.sort(lower[feasible])
    hi = np.sort(upper[feasible])
    started = np.searchsorted(lo, candidates, side="right")
    ended = np.searchsorted(hi, candidates, side="left")
    correct = started - ended
    return candidates, d2.shape[0] - correct


def select_c_multiclass(features, labels, fits, classes) -> float:
    """Threshold for g > 2: the MC-curve minimizer.

    Ties go to the candidate nearest 1; an empty candidate set (all pairs
    degenerate) yields c = 1.
    """
    candidates, errors = multiclass_mc_curve(features, labels, fits, classes)
    if candidates.size == 0:
        return 1.0
    return _pick_candidate(candidates, errors)


def select_c(features, labels, fits, classes) -> tuple[float, bool]:
    """Dispatch to the two-class or multi-class selection by class count."""
    if len(classes) == 2:
        return select_c_two_class(features, labels, fits, classes)
    return select_c_multiclass(features, labels, fits, classes), False


def select_c_on_test(model: GqdaModel, features, labels) -> float:
    """The same selection algorithm run on held-out data (diagnostic only)."""
    c, _ = select_c(features, labels, model.fits, model.classes)
    return c


# ---------------------------------------------------------------------------
# Fitting


def _build_pair_cache(fits) -> tuple[PairStatistic, ...]:
    view = _ModelView(fits)
    g = len(view.fits)
    return tuple(
        sigma_d(i, j, view) for i in range(g) for j in range(i + 1, g)
    )


def fit_gqda(features, labels, spec: EstimatorSpec, rng=None) -> GqdaModel:
    """Fit per-class location/scatter estimates and select the threshold.

    Classes are taken in order of first appearance in ``labels``.  Each class
    must contribute at least p + 2 rows.  Robust fits draw from per-class
    child streams of ``rng`` so the result is reproducible for a fixed seed.
    """
    features = np.asarray(features, dtype=float)
    labels = list(labels)
    if features.shape[0] != len(labels):
        raise DimensionMismatch("features and labels disagree on n")
    classes = tuple(dict.fromkeys(labels))
    if len(classes) < 2:
        raise DegenerateData("need at least two classes in the training data")
    p = features.shape[1]
    variances = features.var(axis=0)
    flat = np.where(variances == 0.0)[0]
    if flat.size:
        raise DegenerateData(
            f"feature column {flat[0]} has zero variance; drop it before fitting"
        )
    idx = class_indices(labels, classes)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng or 0)
    streams = rng.spawn(len(classes))
    fits = []
    for k in range(len(classes)):
        block = features[idx == k]
        if block.shape[0] < p + 2:
            raise DegenerateData(
                f"class {classes[k]!r} has {block.shape[0]} rows; need at least {p + 2}"
            )
        fits.append(fit_estimator(block, spec, streams[k]))
    fits = tuple(fits)
    degenerate = False
    if len(classes) == 2:
        c_star, degenerate = select_c_two_class(features, labels, fits, classes)
    else:
        c_star = select_c_multiclass(features, labels, fits, classes)
    return GqdaModel(
        classes=classes,
        fits=fits,
        c_star=float(c_star),
        estimator_tag=spec.kind,
        pair_cache=_build_pair_cache(fits),
        degenerate_two_class=degenerate,
    )


# ---------------------------------------------------------------------------
# Serialization (lossless: floats stored as hex strings)


def _vec_hex(v: np.ndarray) -> list[str]:
    return [float(x).hex() for x in v]


def _vec_unhex(v) -> np.ndarray:
    return np.array([float.fromhex(x) for x in v], dtype=float)


def model_to_dict(model: GqdaModel, spec: EstimatorSpec | None = None) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "classes": list(model.classes),
        "c_star": float(model.c_star).hex(),
        "estimator_tag": model.estimator_tag,
        "degenerate_two_class": model.degenerate_two_class,
        "fits": [
            {
                "location": _vec_hex(f.location),
                "scatter": [_vec_hex(row) for row in f.scatter.entries],
                "n_used": f.n_used,
                "estimator_tag": f.estimator_tag,
                "converged": f.converged,
            }
            for f in model.fits
        ],
    }
    if spec is not None:
        doc["estimator_spec"] = {
            k: v for k, v in vars(spec).items() if not k.startswith("_")
        }
    return doc


def model_to_json(model: GqdaModel, spec: EstimatorSpec | None = None) -> str:
    return json.dumps(model_to_dict(model, spec), indent=2)


def model_from_dict(doc: dict) -> GqdaModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unrecognized model format {doc.get('format')!r}")
    fits = []
    for fd in doc["fits"]:
        entries = np.array([_vec_unhex(row) for row in fd["scatter"]])
        fits.append(
            LocationScatter(
                location=_vec_unhex(fd["location"]),
                scatter=cholesky(entries),
                n_used=int(fd["n_used"]),
                estimator_tag=fd["estimator_tag"],
                converged=bool(fd.get("converged", True)),
            )
        )
    fits = tuple(fits)
    return GqdaModel(
        classes=tuple(doc["classes"]),
        fits=fits,
        c_star=float.fromhex(doc["c_star"]),
        estimator_tag=doc["estimator_tag"],
        pair_cache=_build_pair_cache(fits),
        degenerate_two_class=bool(doc.get("degenerate_two_class", False)),
    )


def model_from_json(text: str) -> GqdaModel:
    return model_from_dict(json.loads(text))
