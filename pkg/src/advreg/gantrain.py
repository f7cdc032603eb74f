"""Conditional GAN objectives and the alternating training loop."""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigurationError, DimensionError, DivergedError
from .metrics import MetricRecord, Reference, evaluate, make_reference
from .nets import (
    DISCRIMINATOR_WIDTHS,
    GENERATOR_WIDTHS,
    Network,
    build_network,
    clip_weights,
    discriminator_spec,
    generate,
    generator_spec,
    save_checkpoint,
)
from .numkit import OptimizerState, Tape, adam_step, grad, input_gradient, ops as T
from .rng import substream
from .synthdata import (
    MODEL_KINDS,
    Dataset,
    ModelSpec,
    analytic_forward_conditional,
    slice_oracle_many,
)

log = logging.getLogger(__name__)

GAN_KINDS = ("sgan", "wgan_clip", "wgan_gp", "rsgan", "rasgan")
DIRECTIONS = ("forward", "inverse")
KIND_DEFAULTS = {
    "sgan": {"batch_size": 2000, "lr": 1e-4, "d_steps": 5},
    "wgan_clip": {"batch_size": 2000, "lr": 1e-5, "d_steps": 5},
    "wgan_gp": {"batch_size": 2000, "lr": 1e-5, "d_steps": 5},
    "rsgan": {"batch_size": 500, "lr": 1e-5, "d_steps": 1},
    "rasgan": {"batch_size": 500, "lr": 1e-5, "d_steps": 5},
}
DEFAULT_CONDITIONS = (0.1, 0.4, 0.7, 1.0)

# clamp applied to sigmoid outputs before logs
LOG_EPS = 1e-12


@dataclass(frozen=True)
class GanKind:
    tag: str = "sgan"
    clip_c: float = 0.01
    lambda_gp: float = 0.1

    def __post_init__(self):
        if self.tag not in GAN_KINDS:
            raise ConfigurationError(f"unknown GAN kind {self.tag!r}; expected one of {GAN_KINDS}")
        if self.clip_c <= 0:
            raise ConfigurationError("clip_c must be positive")
        if self.lambda_gp < 0:
            raise ConfigurationError("lambda_gp must be non-negative")

    @property
    def uses_critic(self) -> bool:
        return self.tag != "sgan"

    @property
    def relativistic(self) -> bool:
        return self.tag in ("rsgan", "rasgan")


@dataclass
class TrainConfig:
    """Every knob of one training run.

    ``batch_size``, ``lr`` and ``d_steps`` left as ``None`` take the defaults
    of the chosen GAN kind.
    """

    gan: str = "sgan"
    model: str = "model1"
    direction: str = "forward"
    n_data: int = 10_000
    noise_dim: int = 10
    batch_size: int | None = None
    lr: float | None = None
    beta1: float = 0.0
    beta2: float = 0.9
    epsilon: float = 1e-8
    d_steps: int | None = None
    g_steps: int = 1
    total_updates: int = 20_000
    eval_every: int = 100
    checkpoint_every: int = 10_000
    conditions: tuple = DEFAULT_CONDITIONS
    seed: int = 0
    clip_c: float = 0.01
    lambda_gp: float = 0.1
    n_eval: int = 0
    n_oracle: int = 10_000_000
    slice_width: float = 0.01
    out_dim: int = 0
    g_widths: tuple = GENERATOR_WIDTHS
    d_widths: tuple = DISCRIMINATOR_WIDTHS

    def __post_init__(self):
        if self.gan not in GAN_KINDS:
            raise ConfigurationError(f"unknown GAN kind {self.gan!r}; expected one of {GAN_KINDS}")
        for key, value in KIND_DEFAULTS[self.gan].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        self.conditions = tuple(float(c) for c in self.conditions)
        self.g_widths = tuple(int(w) for w in self.g_widths)
        self.d_widths = tuple(int(w) for w in self.d_widths)
        self.validate()

    def validate(self):
        if self.model not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(f"direction must be one of {DIRECTIONS}")
        if self.direction == "inverse" and self.model == "highdim5":
            raise ConfigurationError("inverse regression needs a scalar predictor")
        if self.n_data < 1:
            raise ConfigurationError("n_data must be positive")
        if not 1 <= self.batch_size <= self.n_data:
            raise ConfigurationError(f"batch_size must lie in [1, n_data], got {self.batch_size}")
        if self.noise_dim < 1 or self.d_steps < 1 or self.g_steps < 1:
            raise ConfigurationError("noise_dim, d_steps and g_steps must be positive")
        if self.total_updates < 0:
            raise ConfigurationError("total_updates must be non-negative")
        if self.eval_every < 0 or self.checkpoint_every < 1:
            raise ConfigurationError("eval_every must be >= 0 and checkpoint_every >= 1")
        if self.eval_every and self.checkpoint_every % self.eval_every:
            raise ConfigurationError("eval_every must divide checkpoint_every")
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")
        if self.out_dim and self.out_dim != self.target_dim:
            raise ConfigurationError(f"out_dim {self.out_dim} does not match the predicted variable ({self.target_dim})")
        GanKind(self.gan, self.clip_c, self.lambda_gp)

    @property
    def kind(self) -> GanKind:
        return GanKind(self.gan, self.clip_c, self.lambda_gp)

    @property
    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.model)

    @property
    def cond_dim(self) -> int:
        return self.model_spec.p if self.direction == "forward" else 1

    @property
    def target_dim(self) -> int:
        return 1 if self.direction == "forward" else self.model_spec.p

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """Canonical ``key=value`` lines, sorted by key."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name}={format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        """Build from a mapping of keys to values or their text form."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            kwargs[key] = parse_value(key, raw)
        return cls(**kwargs)


_INT_KEYS = {"n_data", "noise_dim", "batch_size", "d_steps", "g_steps", "total_updates", "eval_every",
             "checkpoint_every", "seed", "n_eval", "n_oracle", "out_dim"}
_FLOAT_KEYS = {"lr", "beta1", "beta2", "epsilon", "clip_c", "lambda_gp", "slice_width"}
_TUPLE_KEYS = {"conditions": float, "g_widths": int, "d_widths": int}


def parse_value(key: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(float(raw)) if raw.lower() not in ("none", "") else None
        if key in _FLOAT_KEYS:
            return float(raw) if raw.lower() not in ("none", "") else None
        if key in _TUPLE_KEYS:
            return tuple(_TUPLE_KEYS[key](v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc
    return raw


def format_value(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class TrainRun:
    run_id: str
    config: TrainConfig
    config_digest: str
    status: str = "running"
    g_updates: int = 0
    d_updates: int = 0
    checkpoints: dict = field(default_factory=dict)  # update -> generator Network
    records: list = field(default_factory=list)
    d_losses: list = field(default_factory=list)
    g_losses: list = field(default_factory=list)
    wall_time: float = 0.0
    diagnostic: dict | None = None
    generator: Network | None = None
    discriminator: Network | None = None

    def records_for(self, condition: float) -> list[MetricRecord]:
        return [r for r in self.records if r.condition == condition]


# ---------------------------------------------------------------------------
# batching


def minibatches(dataset, m: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Endless index batches: each epoch is a fresh shuffle cut into ceil(n/m) batches."""
    n = dataset if isinstance(dataset, (int, np.integer)) else len(dataset.X)
    if not 1 <= m <= n:
        raise ConfigurationError(f"batch size {m} must lie in [1, {n}]")

    def _gen():
        while True:
            perm = rng.permutation(n)
            for start in range(0, n, m):
                yield perm[start : start + m]

    return _gen()


class ShuffledStream:
    """Endless reshuffled pass over ``values``, read ``k`` rows at a time."""

    def __init__(self, values: np.ndarray, rng: np.random.Generator):
        self.values = values
        self.rng = rng
        self._order = rng.permutation(len(values))
        self._pos = 0

    def take(self, k: int) -> np.ndarray:
        out = []
        while k > 0:
            if self._pos == len(self._order):
                self._order = self.rng.permutation(len(self.values))
                self._pos = 0
            step = min(k, len(self._order) - self._pos)
            out.append(self._order[self._pos : self._pos + step])
            self._pos += step
            k -= step
        return self.values[np.concatenate(out)]


# ---------------------------------------------------------------------------
# objectives


def _log_p(p):
    return T.log(T.clip(p, LOG_EPS, 1.0 - LOG_EPS))


def _log_1mp(p):
    return T.log(T.sub(1.0, T.clip(p, LOG_EPS, 1.0 - LOG_EPS)))


def _pair(a, b):
    if np.shape(_val(a)) != np.shape(_val(b)):
        raise DimensionError("paired objectives need real and fake batches of equal size")


def _val(x):
    return x.value if isinstance(x, T.Var) else x


def _kind_tag(kind) -> str:
    return kind.tag if isinstance(kind, GanKind) else str(kind)


def d_objective(kind, d_real, d_fake):
    """Discriminator/critic loss to minimise.

    ``sgan`` takes sigmoid outputs; every other kind takes raw critic values.
    """
    tag = _kind_tag(kind)
    if tag == "sgan":
        return T.neg(T.add(T.mean(_log_p(d_real)), T.mean(_log_1mp(d_fake))))
    if tag in ("wgan_clip", "wgan_gp"):
        return T.sub(T.mean(d_fake), T.mean(d_real))
    if tag == "rsgan":
        _pair(d_real, d_fake)
        return T.neg(T.mean(T.log_sigmoid(T.sub(d_real, d_fake))))
    if tag == "rasgan":
        a = T.mean(T.log_sigmoid(T.sub(d_real, T.mean(d_fake))))
        b = T.mean(T.log_sigmoid(T.sub(T.mean(d_real), d_fake)))
        return T.neg(T.add(a, b))
    raise ConfigurationError(f"unknown GAN kind {tag!r}")


def g_objective(kind, d_fake, d_real=None):
    """Generator loss to minimise (non-saturating form for ``sgan``)."""
    tag = _kind_tag(kind)
    if tag == "sgan":
        return T.neg(T.mean(_log_p(d_fake)))
    if tag in ("wgan_clip", "wgan_gp"):
        return T.neg(T.mean(d_fake))
    if d_real is None:
        raise ConfigurationError(f"{tag} generator loss needs critic values on real data")
    if tag == "rsgan":
        _pair(d_real, d_fake)
        return T.neg(T.mean(T.log_sigmoid(T.sub(d_fake, d_real))))
    if tag == "rasgan":
        a = T.mean(T.log_sigmoid(T.sub(d_fake, T.mean(d_real))))
        b = T.mean(T.log_sigmoid(T.sub(T.mean(d_fake), d_real)))
        return T.neg(T.add(a, b))
    raise ConfigurationError(f"unknown GAN kind {tag!r}")


def gradient_penalty(critic: Network, real_batch, fake_batch, lambda_gp: float = 0.1, rng=None, *, params=None):
    """``lambda * mean((|grad_x C(x_hat)| - 1)^2)`` on random interpolates.

    One uniform weight per pair mixes the whole critic input row, condition
    columns included.  The result is a tape node; pass ``params`` from
    ``critic.bind(tape)`` to make it differentiable w.r.t. the critic weights.
    """
    if lambda_gp < 0:
        raise ConfigurationError("lambda_gp must be non-negative")
    real_batch = np.asarray(real_batch, dtype=np.float64)
    fake_batch = np.asarray(fake_batch, dtype=np.float64)
    if real_batch.shape != fake_batch.shape:
        raise DimensionError("real and fake batches must have the same shape")
    if rng is None:
        rng = np.random.default_rng()
    if params is None:
        params = critic.bind(Tape())
    tape = next(iter(params.values())).tape
    eps = rng.uniform(0.0, 1.0, size=(real_batch.shape[0], 1))
    x_hat = tape.leaf(eps * real_batch + (1.0 - eps) * fake_batch, name="x_hat")
    out = critic.apply(x_hat, params)
    g = input_gradient(T.sum_(out), x_hat)
    norm = T.sqrt(T.sum_(T.mul(g, g), axis=1))
    dev = T.sub(norm, 1.0)
    return T.mul(T.mean(T.mul(dev, dev)), lambda_gp)


# ---------------------------------------------------------------------------
# training


def build_references(config: TrainConfig) -> dict[float, Reference]:
    """Analytic Normals for forward runs, slicing-oracle samples for inverse runs."""
    model = config.model_spec
    if config.direction == "forward":
        return {
            c: make_reference(c, analytic_forward_conditional(model, c))
            for c in config.conditions
        }
    slices = slice_oracle_many(model, config.conditions, config.slice_width, config.n_oracle, config.seed)
    return {c: make_reference(c, s) for c, s in zip(config.conditions, slices)}


def split_dataset(config: TrainConfig, dataset: Dataset):
    """(condition columns, target columns) for the configured direction."""
    if dataset.X.shape[1] != config.model_spec.p:
        raise DimensionError("dataset does not match the configured model")
    if config.direction == "forward":
        return dataset.X, dataset.Y
    return dataset.Y, dataset.X


def build_models(config: TrainConfig) -> tuple[Network, Network]:
    g_spec = generator_spec(config.cond_dim, config.noise_dim, config.target_dim, config.g_widths)
    d_spec = discriminator_spec(config.cond_dim + config.target_dim, config.kind.uses_critic, config.d_widths)
    return build_network(g_spec, config.seed), build_network(d_spec, config.seed)


class _Trainer:
    def __init__(self, config: TrainConfig, dataset: Dataset):
        self.cfg = config
        self.kind = config.kind
        cond, target = split_dataset(config, dataset)
        self.cond = np.ascontiguousarray(cond)
        self.joint = np.ascontiguousarray(np.concatenate([cond, target], axis=1))
        self.G, self.D = build_models(config)
        opt = dict(alpha=config.lr, beta1=config.beta1, beta2=config.beta2, epsilon=config.epsilon)
        self.g_opt = OptimizerState(**opt)
        self.d_opt = OptimizerState(**opt)
        s = config.seed
        self.real_batches = minibatches(len(self.joint), config.batch_size, substream(s, "batches"))
        self.fake_conds = ShuffledStream(self.cond, substream(s, "conditions"))
        self.noise = substream(s, "noise")
        self.gp_rng = substream(s, "penalty")
        self.d_updates = 0

    def _fake(self, k: int):
        cond = self.fake_conds.take(k)
        z = self.noise.standard_normal((k, self.cfg.noise_dim))
        return cond, z

    def d_step(self) -> float:
        real = self.joint[next(self.real_batches)]
        m = len(real)
        cond, z = self._fake(m)
        fake = np.concatenate([cond, generate(self.G, cond, z)], axis=1)
        tape = Tape()
        p = self.D.bind(tape)
        out = self.D.apply(np.concatenate([real, fake]), p)
        loss = d_objective(self.kind, T.index(out, slice(0, m)), T.index(out, slice(m, 2 * m)))
        if self.kind.tag == "wgan_gp":
            loss = T.add(loss, gradient_penalty(self.D, real, fake, self.kind.lambda_gp, self.gp_rng, params=p))
        grads = grad(loss, p.values())
        adam_step(self.d_opt, grads, self.D.arrays())
        if self.kind.tag == "wgan_clip":
            clip_weights(self.D, self.kind.clip_c)
        self.d_updates += 1
        return float(loss.value)

    def g_step(self) -> float:
        d_real = None
        m = self.cfg.batch_size
        if self.kind.relativistic:
            real = self.joint[next(self.real_batches)]
            m = len(real)
            d_real = self.D.forward(real)
        cond, z = self._fake(m)
        tape = Tape()
        gp = self.G.bind(tape)
        dp = self.D.bind(tape, requires_grad=False)
        fake_t = self.G.apply(np.concatenate([cond, z], axis=1), gp)
        d_fake = self.D.apply(T.concat([cond, fake_t], axis=1), dp)
        loss = g_objective(self.kind, d_fake, d_real)
        grads = grad(loss, gp.values())
        adam_step(self.g_opt, grads, self.G.arrays())
        return float(loss.value)


def train(
    config: TrainConfig,
    dataset: Dataset,
    *,
    run_id: str = "run",
    references: dict[float, Reference] | None = None,
    checkpoint_dir=None,
    on_records: Callable[[list[MetricRecord]], None] | None = None,
    keep_checkpoints: bool = True,
) -> TrainRun:
    """Alternate ``d_steps`` critic updates with ``g_steps`` generator updates.

    Every ``eval_every`` generator updates the generator is scored at each
    condition; every ``checkpoint_every`` it is snapshotted (and written to
    ``checkpoint_dir`` when given).  A non-finite loss stops the run with
    status ``diverged``; earlier checkpoints are kept.
    """
    t0 = time.perf_counter()
    digest = config.digest()
    tr = _Trainer(config, dataset)
    run = TrainRun(run_id, config, digest, generator=tr.G, discriminator=tr.D)
    if config.eval_every and references is None:
        references = build_references(config)
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for u in range(1, config.total_updates + 1):
        d_loss = g_loss = float("nan")
        try:
            for _ in range(config.d_steps):
                d_loss = tr.d_step()
                if not np.isfinite(d_loss):
                    break
            if np.isfinite(d_loss):
                for _ in range(config.g_steps):
                    g_loss = tr.g_step()
        except DivergedError as exc:
            log.warning("run %s: %s", run_id, exc)
        run.d_losses.append(d_loss)
        run.g_losses.append(g_loss)
        if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
            run.status = "diverged"
            run.diagnostic = {"update": u, "d_loss": d_loss, "g_loss": g_loss, "d_updates": tr.d_updates}
            log.warning("run %s diverged at update %d (d_loss=%r, g_loss=%r)", run_id, u, d_loss, g_loss)
            break
        run.g_updates = u
        run.d_updates = tr.d_updates

        if config.eval_every and u % config.eval_every == 0:
            rng = substream(config.seed, "eval", u)
            batch = [evaluate(tr.G, references[c], config.n_eval or None, rng, run_id, u) for c in config.conditions]
            run.records.extend(batch)
            if on_records is not None:
                on_records(batch)
        if u % config.checkpoint_every == 0:
            snap = tr.G.copy()
            if keep_checkpoints:
                run.checkpoints[u] = snap
            if checkpoint_dir is not None:
                meta = {"update": u, "seed": config.seed, "config_digest": digest, "run_id": run_id}
                save_checkpoint(snap, checkpoint_dir / checkpoint_name(u), meta)

    if run.status == "running":
        run.status = "completed"
    run.d_updates = tr.d_updates
    run.wall_time = time.perf_counter() - t0
    return run


def checkpoint_name(update: int) -> str:
    return f"G_{update:08d}.ckpt"
