"""Distances between generated and reference conditionals, and their bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateError, DimensionError, EmptySampleError, SingularityError
from .nets import Network, generate
from .synthdata import AnalyticConditional, SliceSample

HIST_LO = -0.5
HIST_HI = 1.5
HIST_BINS = 200
KL_FLOOR = 1e-12
BLOCK_SIZE = 100


@dataclass
class Histogram:
    mass: np.ndarray
    lo: float = HIST_LO
    hi: float = HIST_HI
    n_bins: int = HIST_BINS
    n_clamped: int = 0

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    def same_binning(self, other: "Histogram") -> bool:
        return (self.lo, self.hi, self.n_bins) == (other.lo, other.hi, other.n_bins)


@dataclass(frozen=True)
class MomentSet:
    mean: float
    variance: float
    skewness: float  # nan when the sample has zero variance
    kurtosis: float  # non-excess: 3 for a Normal

    @property
    def degenerate(self) -> bool:
        return self.variance == 0.0


@dataclass
class MetricRecord:
    run_id: str
    update: int
    condition: float
    ks: float
    kl: float
    js: float
    mean_abs_diff: float
    moments: MomentSet


@dataclass
class BlockSummary:
    block: int
    count: int
    mean: float
    min: float
    q3: float
    max: float
    iqr: float
    partial: bool = False


def _sample(x, name="sample") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySampleError(f"{name} is empty")
    return x


def ks_distance(sample_p, sample_q) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_p - F_q|``."""
    p = np.sort(_sample(sample_p))
    q = np.sort(_sample(sample_q))
    pts = np.concatenate([p, q])
    fp = np.searchsorted(p, pts, side="right") / p.size
    fq = np.searchsorted(q, pts, side="right") / q.size
    return float(np.max(np.abs(fp - fq)))


def ks_to_cdf(sample, cdf) -> float:
    """One-sample KS statistic of ``sample`` against a continuous ``cdf``."""
    x = np.sort(_sample(sample))
    n = x.size
    f = cdf(x)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def histogram(sample, lo: float = HIST_LO, hi: float = HIST_HI, n_bins: int = HIST_BINS) -> Histogram:
    """Bins ``[lo + k w, lo + (k+1) w)`` with the last bin closed.

    Values outside ``[lo, hi]`` are clamped into the end bins and counted.
    """
    if n_bins < 1 or not lo < hi:
        raise ValueError("need n_bins >= 1 and lo < hi")
    x = _sample(sample)
    w = (hi - lo) / n_bins
    idx = np.floor((x - lo) / w).astype(np.int64)
    outside = int(np.count_nonzero((x < lo) | (x > hi)))
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return Histogram(counts / x.size, lo, hi, n_bins, outside)


def normal_histogram(mean: float, sd: float, lo=HIST_LO, hi=HIST_HI, n_bins=HIST_BINS) -> Histogram:
    """Exact bin probabilities of N(mean, sd^2), tails folded into the end bins."""
    edges = np.linspace(lo, hi, n_bins + 1)
    cdf = ndtr((edges - mean) / sd)
    cdf[0], cdf[-1] = 0.0, 1.0
    return Histogram(np.diff(cdf), lo, hi, n_bins)


def _check_binning(P: Histogram, Q: Histogram):
    if not P.same_binning(Q) or P.mass.shape != Q.mass.shape:
        raise DimensionError("histograms have different binning")


def kl_discrete(P: Histogram, Q: Histogram) -> float:
    """``sum P ln(P/Q)`` after flooring both masses at 1e-12 and renormalising."""
    _check_binning(P, Q)
    p = np.maximum(P.mass, KL_FLOOR)
    q = np.maximum(Q.mass, KL_FLOOR)
    p /= p.sum()
    q /= q.sum()
    return float(max(np.sum(p * np.log(p / q)), 0.0))


def _kl_raw(p, q):
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def js_divergence(P: Histogram, Q: Histogram) -> float:
    _check_binning(P, Q)
    m = 0.5 * (P.mass + Q.mass)
    js = 0.5 * _kl_raw(P.mass, m) + 0.5 * _kl_raw(Q.mass, m)
    return float(min(max(js, 0.0), np.log(2.0)))


def moments(sample) -> MomentSet:
    """Mean, 1/n variance, skewness m3/m2^1.5 and kurtosis m4/m2^2."""
    x = _sample(sample)
    if x.size < 2:
        raise EmptySampleError("moments need at least two values")
    mu = x.mean()
    d = x - mu
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        return MomentSet(float(mu), 0.0, float("nan"), float("nan"))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return MomentSet(float(mu), m2, m3 / m2**1.5, m4 / m2**2)


def kde(sample, grid, bandwidth: float = 0.01, chunk: int = 2_000_000) -> np.ndarray:
    """Gaussian kernel density estimate of ``sample`` evaluated on ``grid``."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    x = _sample(sample)
    grid = np.asarray(grid, dtype=np.float64)
    out = np.zeros(grid.shape)
    step = max(1, chunk // max(grid.size, 1))
    norm = 1.0 / (x.size * bandwidth * np.sqrt(2.0 * np.pi))
    for start in range(0, x.size, step):
        z = (grid[:, None] - x[None, start : start + step]) / bandwidth
        out += np.exp(-0.5 * z * z).sum(axis=1)
    return out * norm


# ---------------------------------------------------------------------------
# references and evaluation


@dataclass
class Reference:
    """A reference conditional prepared once for repeated evaluation."""

    condition: float
    mean: float
    hist: Histogram
    moments: MomentSet
    default_n_eval: int
    analytic: AnalyticConditional | None = None
    values: np.ndarray | None = field(default=None, repr=False)

    def ks(self, sample) -> float:
        if self.analytic is not None:
            mu, sd = self.analytic.mean, self.analytic.sd
            return ks_to_cdf(sample, lambda x: ndtr((x - mu) / sd))
        return ks_distance(sample, self.values)


def make_reference(condition: float, ref, n_eval_forward: int = 10_000) -> Reference:
    """Wrap an analytic Normal or a slice sample as a :class:`Reference`."""
    if isinstance(ref, AnalyticConditional):
        if ref.variance <= 0:
            raise DegenerateError("reference variance must be positive")
        m = MomentSet(ref.mean, ref.variance, 0.0, 3.0)
        return Reference(condition, ref.mean, normal_histogram(ref.mean, ref.sd), m, n_eval_forward, analytic=ref)
    if isinstance(ref, SliceSample):
        values = np.sort(_sample(ref.values, "slice"))
        if values.size < 2 or values[0] == values[-1]:
            raise DegenerateError("slice sample has no spread")
        return Reference(condition, float(values.mean()), histogram(values), moments(values), ref.count, values=values)
    raise TypeError(f"unsupported reference {type(ref).__name__}")


def condition_rows(condition, n: int, cond_dim: int) -> np.ndarray:
    return np.full((n, cond_dim), float(condition))


def sample_conditional(net: Network, condition, n: int, rng: np.random.Generator, chunk: int = 50_000) -> np.ndarray:
    """``n`` generated values at a fixed condition, first output column."""
    cond_dim = net.spec.cond_dim
    noise_dim = net.spec.input_dim - cond_dim
    out = []
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        z = rng.standard_normal((m, noise_dim))
        out.append(generate(net, condition_rows(condition, m, cond_dim), z)[:, 0])
    return np.concatenate(out) if out else np.zeros(0)


def score_sample(gen, reference: Reference, run_id: str = "", update: int = 0) -> MetricRecord:
    gen = _sample(gen, "generated sample")
    h = histogram(gen)
    return MetricRecord(
        run_id=run_id,
        update=update,
        condition=reference.condition,
        ks=reference.ks(gen),
        kl=kl_discrete(reference.hist, h),
        js=js_divergence(reference.hist, h),
        mean_abs_diff=abs(float(gen.mean()) - reference.mean),
        moments=moments(gen),
    )


def evaluate(net: Network, reference: Reference, n_eval: int | None, rng, run_id="", update=0) -> MetricRecord:
    """Score ``n_eval`` generated values at the reference's condition.

    ``n_eval=None`` uses the reference default: the slice count for inverse
    references, 10,000 for analytic ones.
    """
    n = reference.default_n_eval if not n_eval else int(n_eval)
    gen = sample_conditional(net, reference.condition, n, rng)
    return score_sample(gen, reference, run_id, update)


def block_aggregate(records, metric: str = "js", block_size: int = BLOCK_SIZE) -> list[BlockSummary]:
    """Mean/min/q3/max/iqr of consecutive blocks of ``block_size`` records."""
    vals = np.array([getattr(r, metric) if not isinstance(r, (int, float)) else r for r in records], dtype=float)
    out = []
    for b, start in enumerate(range(0, len(vals), block_size)):
        v = vals[start : start + block_size]
        q1, q3 = np.quantile(v, [0.25, 0.75])
        out.append(
            BlockSummary(b, v.size, float(v.mean()), float(v.min()), float(q3), float(v.max()), float(q3 - q1),
                         partial=v.size < block_size)
        )
    return out


def ensemble_sample(nets, condition, n_per: int, rng) -> np.ndarray:
    """Pool ``n_per`` conditional draws from each generator state."""
    nets = list(nets)
    if len(nets) < 2:
        raise ValueError("an ensemble needs at least two checkpoints")
    spec = nets[0].spec
    if any(n.spec != spec for n in nets[1:]):
        raise DimensionError("checkpoints in an ensemble must share one network spec")
    return np.concatenate([sample_conditional(n, condition, n_per, rng) for n in nets])


# ---------------------------------------------------------------------------
# ordinary least squares baseline


@dataclass
class OLSFit:
    beta: np.ndarray
    sigma2: float
    xtx_inv: np.ndarray
    n: int
    p: int


def ols_fit(X, y) -> OLSFit:
    """Closed-form ``beta = (X'X)^-1 X'y`` and ``sigma2 = e'e / (n - p)``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = X.shape
    if n <= p:
        raise SingularityError(f"need n > p, got n={n}, p={p}")
    if np.linalg.matrix_rank(X) < p:
        raise SingularityError("design matrix is rank deficient")
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    e = y - X @ beta
    return OLSFit(beta, float(e @ e / (n - p)), xtx_inv, n, p)


def ols_predict(fit: OLSFit, x_star):
    """Point prediction and predictive variance ``sigma2 (x* (X'X)^-1 x*' + 1)``."""
    x_star = np.asarray(x_star, dtype=np.float64)
    point = x_star @ fit.beta
    var = fit.sigma2 * (np.einsum("...i,ij,...j->...", x_star, fit.xtx_inv, x_star) + 1.0)
    return point, var
