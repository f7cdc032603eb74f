"""Generator, discriminator and critic networks plus checkpoint persistence."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, CorruptionError, DimensionError, FormatError
from .numkit import activation, affine_forward
from .rng import substream

ROLES = ("generator", "discriminator", "critic")
GENERATOR_WIDTHS = (256, 128, 64)
DISCRIMINATOR_WIDTHS = (256, 256, 256)
LEAKY_SLOPE = 0.2
INIT_SCHEME = "glorot_uniform"

MAGIC = b"ADVREG01"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    layers: tuple  # ((width, activation), ...)
    role: str
    leaky_slope: float = LEAKY_SLOPE
    cond_dim: int = 0  # leading input columns that carry the condition (generators)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple((int(w), str(a)) for w, a in self.layers))
        if self.role not in ROLES:
            raise ConfigurationError(f"unknown network role {self.role!r}")
        if self.input_dim < 1:
            raise ConfigurationError("input_dim must be positive")
        if not self.layers:
            raise ConfigurationError("a network needs at least one layer")
        if any(w < 1 for w, _ in self.layers):
            raise ConfigurationError("layer widths must be positive")
        if not 0 <= self.cond_dim <= self.input_dim:
            raise ConfigurationError("cond_dim must lie in [0, input_dim]")

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [list(layer) for layer in self.layers],
            "role": self.role,
            "leaky_slope": self.leaky_slope,
            "cond_dim": self.cond_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        return cls(
            d["input_dim"], tuple(tuple(x) for x in d["layers"]), d["role"], d["leaky_slope"], d.get("cond_dim", 0)
        )


def generator_spec(cond_dim: int, noise_dim: int, out_dim: int = 1, widths=GENERATOR_WIDTHS) -> NetSpec:
    layers = [(w, "relu") for w in widths] + [(out_dim, "identity")]
    return NetSpec(cond_dim + noise_dim, tuple(layers), "generator", cond_dim=cond_dim)


def discriminator_spec(input_dim: int, critic: bool = False, widths=DISCRIMINATOR_WIDTHS) -> NetSpec:
    """Discriminator (sigmoid output) or, with ``critic=True``, critic (linear output)."""
    out = "identity" if critic else "sigmoid"
    layers = [(w, "leaky_relu") for w in widths] + [(1, out)]
    return NetSpec(input_dim, tuple(layers), "critic" if critic else "discriminator")


class Network:
    """Parameters ``W1, b1, ..., WL, bL`` of a dense stack described by a :class:`NetSpec`."""

    def __init__(self, spec: NetSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.params = params
        for name, shape in self.param_shapes(spec).items():
            if name not in params or params[name].shape != shape:
                raise DimensionError(f"parameter {name} missing or not shaped {shape}")

    @staticmethod
    def param_shapes(spec: NetSpec) -> dict[str, tuple]:
        shapes = {}
        n_in = spec.input_dim
        for l, (width, _) in enumerate(spec.layers, start=1):
            shapes[f"W{l}"] = (n_in, width)
            shapes[f"b{l}"] = (width,)
            n_in = width
        return shapes

    @property
    def names(self) -> list[str]:
        return list(self.params)

    def arrays(self) -> list[np.ndarray]:
        return list(self.params.values())

    def copy(self) -> "Network":
        return Network(self.spec, {k: v.copy() for k, v in self.params.items()})

    def bind(self, tape, requires_grad: bool = True) -> dict:
        """Register every parameter as a leaf on ``tape``."""
        return {k: tape.leaf(v, requires_grad=requires_grad, name=k) for k, v in self.params.items()}

    def apply(self, x, params=None):
        """Forward pass; with ``params`` from :meth:`bind` it is recorded on the tape."""
        p = self.params if params is None else params
        a = x
        for l, (_, kind) in enumerate(self.spec.layers, start=1):
            a = activation(affine_forward(a, p[f"W{l}"], p[f"b{l}"]), kind, self.spec.leaky_slope)
        return a

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise DimensionError(f"expected input of width {self.spec.input_dim}, got shape {x.shape}")
        return self.apply(x)


def build_network(spec: NetSpec, seed: int) -> Network:
    """Glorot-uniform weights in +-sqrt(6 / (n_in + n_out)), zero biases."""
    rng = substream(seed, "init", ROLES.index(spec.role))
    params = {}
    for name, shape in Network.param_shapes(spec).items():
        if name.startswith("W"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            params[name] = np.zeros(shape)
    return Network(spec, params)


def generate(net: Network, conditions, noise) -> np.ndarray:
    """Run a generator on rows ``[condition | noise]``."""
    if net.spec.role != "generator":
        raise ConfigurationError("generate() needs a generator network")
    conditions = np.atleast_2d(np.asarray(conditions, dtype=np.float64))
    noise = np.atleast_2d(np.asarray(noise, dtype=np.float64))
    if conditions.shape[0] != noise.shape[0]:
        raise DimensionError("conditions and noise must have the same number of rows")
    if conditions.shape[1] + noise.shape[1] != net.spec.input_dim:
        raise DimensionError(
            f"condition width {conditions.shape[1]} + noise width {noise.shape[1]} "
            f"!= generator input {net.spec.input_dim}"
        )
    return net.forward(np.concatenate([conditions, noise], axis=1))


def clip_weights(net: Network, c: float) -> Network:
    """Clamp every weight and bias into ``[-c, c]`` in place."""
    for v in net.params.values():
        np.clip(v, -c, c, out=v)
    return net


# ---------------------------------------------------------------------------
# checkpoints

_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    network: Network
    meta: dict = field(default_factory=dict)

    @property
    def update(self) -> int:
        return int(self.meta.get("update", 0))


def save_checkpoint(net: Network, path, meta: dict | None = None) -> Path:
    """Write ``net`` to ``path``; ``meta`` may carry update, seed and config digest."""
    header = dict(meta or {})
    header.update(
        format_version=FORMAT_VERSION,
        spec=net.spec.to_dict(),
        init=INIT_SCHEME,
        n_params=len(net.params),
    )
    text = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, _U32.pack(len(text)), text]
    for name, arr in net.params.items():
        raw = name.encode("utf-8")
        chunks += [_U32.pack(len(raw)), raw, _U32.pack(arr.ndim)]
        chunks += [_U32.pack(d) for d in arr.shape]
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    path = Path(path)
    path.write_bytes(b"".join(chunks))
    return path


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptionError("checkpoint payload is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    r = _Reader(buf)
    r.take(8)
    try:
        meta = json.loads(r.take(r.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"{path}: unreadable metadata block") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {meta.get('format_version')}")
    spec = NetSpec.from_dict(meta["spec"])
    params = {}
    for _ in range(meta["n_params"]):
        name = r.take(r.u32()).decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        n = int(np.prod(shape))
        params[name] = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(buf):
        raise CorruptionError(f"{path}: trailing bytes after payload")
    return Checkpoint(Network(spec, params), meta)
