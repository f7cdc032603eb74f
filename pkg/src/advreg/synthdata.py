"""Synthetic ground-truth regression models and their reference conditionals.

Three bivariate models on ``X ~ Uniform[0, 1]``::

    model1:  Y = a X + b + e,              e ~ N(0, 0.05^2)
    model2:  Y = a X + b + e,              e ~ N(0, (0.1 X)^2)
    model3:  Y = a X + c sin(d X) + e,     e ~ N(0, 0.05^2)

with a=1, b=0, c=0.2, d=20, and a five-input model ``highdim5``::

    Y = (x1 + x2^2 + ln(x3 + 1) + 0.2 sin(20 x4) - x5 + 1) / 3.5 + e

The forward conditional p(Y | x) is Normal and known in closed form.  The
inverse conditional p(X | y) is estimated by slicing a large simulated sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateError, EmptySliceError
from .rng import substream

MODEL_KINDS = ("model1", "model2", "model3", "highdim5")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "model1"
    a: float = 1.0
    b: float = 0.0
    c: float = 0.2
    d: float = 20.0
    noise_sd: float = 0.05

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model {self.kind!r}; expected one of {MODEL_KINDS}")

    @property
    def p(self) -> int:
        return 5 if self.kind == "highdim5" else 1

    def mean(self, x) -> np.ndarray:
        """E[Y | x] for ``x`` of shape (n, p) or (p,)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "highdim5":
            x1, x2, x3, x4, x5 = np.moveaxis(x, -1, 0)
            return (x1 + x2**2 + np.log(x3 + 1.0) + 0.2 * np.sin(20.0 * x4) - x5 + 1.0) / 3.5
        x = x[..., 0]
        if self.kind == "model3":
            return self.a * x + self.c * np.sin(self.d * x)
        return self.a * x + self.b

    def sd(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "model2":
            return 0.1 * np.abs(x[..., 0])
        return np.full(x.shape[:-1], self.noise_sd)


@dataclass
class Dataset:
    X: np.ndarray  # (n, p)
    Y: np.ndarray  # (n, 1)
    seed: int
    model: ModelSpec

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class AnalyticConditional:
    mean: float
    variance: float

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass
class SliceSample:
    y0: float
    width: float
    values: np.ndarray
    count: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def sample_y(model: ModelSpec, X, rng: np.random.Generator) -> np.ndarray:
    """Draw Y given predictor rows ``X`` of shape (n, p)."""
    X = np.asarray(X, dtype=np.float64)
    return model.mean(X) + model.sd(X) * rng.standard_normal(X.shape[0])


def _simulate(model: ModelSpec, n: int, rng: np.random.Generator):
    X = rng.uniform(0.0, 1.0, size=(n, model.p))
    return X, sample_y(model, X, rng)


def sample_dataset(model: ModelSpec, n: int, seed: int) -> Dataset:
    if n <= 0:
        raise ConfigurationError(f"dataset size must be positive, got {n}")
    X, Y = _simulate(model, n, substream(seed, "data"))
    return Dataset(X, Y.reshape(-1, 1), seed, model)


def analytic_forward_conditional(model: ModelSpec, x) -> AnalyticConditional:
    """The Normal law of Y given ``x`` (scalar, or length-5 vector for highdim5)."""
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), (model.p,))
    var = float(model.sd(x) ** 2)
    if var <= 0.0:
        raise DegenerateError(f"{model.kind} has zero noise variance at x={x.tolist()}")
    return AnalyticConditional(float(model.mean(x)), var)


def slice_oracle(
    model: ModelSpec,
    y0: float,
    width: float = 0.01,
    n_oracle: int = 10_000_000,
    seed: int = 0,
    chunk: int = 1_000_000,
) -> SliceSample:
    """Monte-Carlo estimate of p(X | Y = y0) from events with ``|y - y0| <= width``."""
    return slice_oracle_many(model, [y0], width, n_oracle, seed, chunk)[0]


def slice_oracle_many(model, y0s, width=0.01, n_oracle=10_000_000, seed=0, chunk=1_000_000):
    """One simulation pass sliced at every value of ``y0s``.

    Chunk ``i`` draws from its own substream, so the retained events depend
    only on the seed, ``n_oracle`` and ``chunk``.
    """
    if width <= 0:
        raise ConfigurationError("slice width must be positive")
    kept = [[] for _ in y0s]
    n_chunks = -(-n_oracle // chunk)
    for i in range(n_chunks):
        size = min(chunk, n_oracle - i * chunk)
        X, Y = _simulate(model, size, substream(seed, "oracle", i))
        for j, y0 in enumerate(y0s):
            hit = np.abs(Y - y0) <= width
            kept[j].append(X[hit])
    out = []
    for y0, parts in zip(y0s, kept):
        values = np.concatenate(parts)
        if model.p == 1:
            values = values[:, 0]
        if len(values) == 0:
            raise EmptySliceError(f"no simulated event within {width} of y={y0}")
        out.append(SliceSample(float(y0), float(width), values, len(values)))
    return out


def write_dataset_csv(ds: Dataset, path) -> Path:
    p = ds.X.shape[1]
    lines = [",".join([f"x{i + 1}" for i in range(p)] + ["y"])]
    for xrow, y in zip(ds.X, ds.Y[:, 0]):
        lines.append(",".join(repr(float(v)) for v in (*xrow, y)))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_dataset_csv(path, model: ModelSpec, seed: int = 0) -> Dataset:
    rows = Path(path).read_text().splitlines()
    header = rows[0].split(",")
    if header[-1] != "y" or any(h != f"x{i + 1}" for i, h in enumerate(header[:-1])):
        raise ConfigurationError(f"{path}: unexpected header {rows[0]!r}")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:] if r], dtype=np.float64)
    return Dataset(data[:, :-1].copy(), data[:, -1:].copy(), seed, model)
