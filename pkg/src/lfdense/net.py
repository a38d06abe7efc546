"""Network assembly: correlation blocks, dense skip wiring, bottleneck, head.

Wiring, with ``g`` the growth rate and ``X`` the luminance input:

* block ``i`` runs ``n_s`` spatial 3x3 convolutions.  The first one reads
  ``X`` (block 1) or the previous block output ``a_{i-1}``; later ones read
  the concatenation of every earlier spatial output of the block when spatial
  connections are on.
* the first angular 3x3 convolution of block ``i`` reads
  ``[S_i, a_{i-1}, ..., a_1, X]`` (angular and image parts switchable),
  followed by ``n_a - 1`` plain angular convolutions.  Its output is ``a_i``.
* the bottleneck reads ``[a_n, ..., a_1, X]`` in spatial mode and the head is
  a ``(u0, v0)`` angular convolution with valid padding, collapsing the
  angular grid to 1x1 with one channel per reconstructed view.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import (
    ANGULAR,
    NATIVE,
    SAME_ZERO,
    SPATIAL,
    VALID,
    ConvKernel,
    ModeTensor,
    ShapeError,
    Tape,
    activation,
    concat_channels,
    conv2d,
    conv_macs,
    reshape_mode,
)

CHECKPOINT_MAGIC = b"SADN1\n"


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint container."""


class ConfigMismatchError(CheckpointError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    u0: int = 2
    v0: int = 2
    n_out: int = 60
    n_cb: int = 6
    n_s: int = 5
    n_a: int = 1
    growth: int = 32
    connect_spatial: bool = True
    connect_angular: bool = True
    connect_image: bool = True
    bottleneck_kernel: int = 3
    bottleneck_channels: int = 32
    activation: str = "relu"
    bottleneck_activation: str = "identity"
    preset: str = "tablefit"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("u0", "v0", "n_out", "n_cb", "n_s", "n_a", "growth", "bottleneck_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.bottleneck_kernel not in (1, 3):
            raise ConfigError(f"bottleneck_kernel must be 1 or 3, got {self.bottleneck_kernel}")
        for name in ("activation", "bottleneck_activation"):
            if getattr(self, name) not in ("relu", "identity"):
                raise ConfigError(f"{name} must be relu or identity")

    def to_text(self) -> str:
        """Canonical form: sorted ``key=value`` lines, newline terminated."""
        items = sorted(asdict(self).items())
        return "".join(f"{k}={_fmt(v)}\n" for k, v in items)

    @classmethod
    def from_text(cls, text: str) -> "NetworkConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, sep, value = line.partition("=")
            if not sep or key not in types:
                raise ConfigError(f"bad config line {line!r}")
            kwargs[key] = _parse(value, types[key])
        return cls(**kwargs)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _parse(value: str, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    if typ == "bool":
        if value not in ("true", "false"):
            raise ConfigError(f"expected true/false, got {value!r}")
        return value == "true"
    if typ == "int":
        return int(value)
    return value


PRESETS = {
    "paper-default": dict(n_cb=6, n_s=5, n_a=1, growth=32, bottleneck_kernel=1, bottleneck_channels=96),
    "tablefit": dict(n_cb=6, n_s=5, n_a=1, growth=32, bottleneck_kernel=3, bottleneck_channels=32),
    "text": dict(n_cb=6, n_s=5, n_a=1, growth=32, bottleneck_kernel=1, bottleneck_channels=96),
}


def preset(name: str, **overrides) -> NetworkConfig:
    """Build a config from a named preset plus overrides."""
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return NetworkConfig(**{**base, "preset": name, **overrides})


# ---------------------------------------------------------------------------
# Layer shapes
# ---------------------------------------------------------------------------


def angular_input_channels(cfg: NetworkConfig, block: int) -> int:
    g = cfg.growth
    spatial = g * cfg.n_s if cfg.connect_spatial else g
    angular = g * (block - 1) if cfg.connect_angular else 0
    image = 1 if cfg.connect_image else 0
    return spatial + angular + image


def layer_specs(cfg: NetworkConfig) -> list[tuple[str, tuple[int, ...]]]:
    """``(layer_id, kernel dims)`` in topological order."""
    g = cfg.growth
    specs = []
    for i in range(1, cfg.n_cb + 1):
        for j in range(1, cfg.n_s + 1):
            if j == 1:
                c_in = 1 if i == 1 else g
            else:
                c_in = g * (j - 1) if cfg.connect_spatial else g
            specs.append((f"cb{i}.s{j}", (1, 1, 3, 3, c_in, g)))
        specs.append((f"cb{i}.a1", (3, 3, 1, 1, angular_input_channels(cfg, i), g)))
        for j in range(2, cfg.n_a + 1):
            specs.append((f"cb{i}.a{j}", (3, 3, 1, 1, g, g)))
    b_in = (g * cfg.n_cb if cfg.connect_angular else g) + (1 if cfg.connect_image else 0)
    k = cfg.bottleneck_kernel
    specs.append(("bottleneck", (1, 1, k, k, b_in, cfg.bottleneck_channels)))
    specs.append(("head", (cfg.u0, cfg.v0, 1, 1, cfg.bottleneck_channels, cfg.n_out)))
    return specs


def kernel_params(dims) -> int:
    return int(np.prod(dims)) + dims[-1]


class ParamCount(NamedTuple):
    total: int
    ledger: list[tuple[str, int]]


def count_params(cfg: NetworkConfig) -> ParamCount:
    ledger = [(lid, kernel_params(dims)) for lid, dims in layer_specs(cfg)]
    return ParamCount(sum(n for _, n in ledger), ledger)


class MacReport(NamedTuple):
    total: int
    ledger: list[tuple[str, int]]
    extraction: int  # correlation blocks only
    full4d: int  # n_cb blocks of one 3x3x3x3 conv, growth -> growth
    ratio: Fraction  # extraction / full4d


def _out_extent(lid, dims, cfg, w, h):
    if lid == "head":
        return (1, 1, w, h, dims[-1])
    return (cfg.u0, cfg.v0, w, h, dims[-1])


def count_macs(cfg: NetworkConfig, w: int, h: int) -> MacReport:
    """Multiply-accumulates of one forward pass on a ``(u0, v0, w, h)`` input.

    Zero-padded taps are counted, matching what the convolution executes.
    """
    ledger = [(lid, conv_macs(dims, _out_extent(lid, dims, cfg, w, h))) for lid, dims in layer_specs(cfg)]
    total = sum(n for _, n in ledger)
    extraction = sum(n for lid, n in ledger if lid.startswith("cb"))
    full4d = cfg.n_cb * 81 * cfg.growth * cfg.growth * cfg.u0 * cfg.v0 * w * h
    return MacReport(total, ledger, extraction, full4d, Fraction(extraction, full4d))


def block_cost_ratio(n_s: int = 1, n_a: int = 1, k_spatial: int = 3, k_angular: int = 3, k_4d: int = 3) -> Fraction:
    """Cost of ``n_s`` spatial plus ``n_a`` angular convolutions relative to one
    full 4D convolution, all with equal channel counts and extents."""
    return Fraction(n_s * k_spatial ** 2 + n_a * k_angular ** 2, k_4d ** 4)


# ---------------------------------------------------------------------------
# Model state
# ---------------------------------------------------------------------------


class ModelState:
    """Ordered ``(layer_id, ConvKernel)`` pairs plus the config they realise."""

    def __init__(self, config: NetworkConfig, layers: list[tuple[str, ConvKernel]]):
        expected = layer_specs(config)
        got = [(lid, k.dims) for lid, k in layers]
        if got != expected:
            raise ShapeError("layers do not match the configuration")
        self.config = config
        self.layers = layers
        self._index = {lid: k for lid, k in layers}

    def __getitem__(self, layer_id: str) -> ConvKernel:
        return self._index[layer_id]

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    @property
    def n_params(self) -> int:
        return sum(k.n_params for _, k in self.layers)

    @property
    def dtype(self):
        return self.layers[0][1].weights.dtype

    def arrays(self) -> list[np.ndarray]:
        """Flat parameter list: weights then bias of each layer, in order."""
        out = []
        for _, k in self.layers:
            out += [k.weights, k.bias]
        return out

    def astype(self, dtype) -> "ModelState":
        return ModelState(self.config, [(lid, k.astype(dtype)) for lid, k in self.layers])

    def copy(self) -> "ModelState":
        return ModelState(self.config, [(lid, ConvKernel(k.weights.copy(), k.bias.copy())) for lid, k in self.layers])


def build_network(cfg: NetworkConfig, seed: int = 0, dtype=np.float32) -> ModelState:
    """He-normal weights (std ``sqrt(2 / fan_in)``) and zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for lid, dims in layer_specs(cfg):
        fan_in = int(np.prod(dims[:5]))
        w = rng.standard_normal(dims) * np.sqrt(2.0 / fan_in)
        layers.append((lid, ConvKernel(w.astype(dtype), np.zeros(dims[-1], dtype=dtype))))
    return ModelState(cfg, layers)


def forward(m: ModelState, x: ModeTensor, tape: Tape | None = None) -> ModeTensor:
    """Run the network on a ``(u0, v0, w, h, 1)`` luminance tensor.

    Returns a native ``(1, 1, w, h, n_out)`` tensor; channel ``n`` is output
    view ``n`` of the view pattern.
    """
    cfg = m.config
    if x.shape[:2] != (cfg.u0, cfg.v0) or x.c != 1:
        raise ShapeError(f"expected input ({cfg.u0}, {cfg.v0}, w, h, 1), got {x.shape}")
    kb = cfg.bottleneck_kernel
    if x.w < kb or x.h < kb:
        raise ShapeError(f"spatial extent {x.w}x{x.h} smaller than the bottleneck kernel")
    act = cfg.activation

    image = reshape_mode(x, ANGULAR, tape)
    blocks: list[ModeTensor] = []  # a_1 .. a_i, angular mode
    feed = x
    for i in range(1, cfg.n_cb + 1):
        cur = reshape_mode(feed, SPATIAL, tape)
        spatial_outs: list[ModeTensor] = []
        for j in range(1, cfg.n_s + 1):
            if j == 1:
                inp = cur
            elif cfg.connect_spatial:
                inp = concat_channels(spatial_outs[::-1], tape)
            else:
                inp = spatial_outs[-1]
            y = conv2d(inp, m[f"cb{i}.s{j}"], SAME_ZERO, tape)
            spatial_outs.append(activation(y, act, tape))
        s_feat = concat_channels(spatial_outs[::-1], tape) if cfg.connect_spatial else spatial_outs[-1]

        parts = [reshape_mode(s_feat, ANGULAR, tape)]
        if cfg.connect_angular:
            parts += blocks[::-1]
        if cfg.connect_image:
            parts.append(image)
        a = concat_channels(parts, tape) if len(parts) > 1 else parts[0]
        for j in range(1, cfg.n_a + 1):
            a = activation(conv2d(a, m[f"cb{i}.a{j}"], SAME_ZERO, tape), act, tape)
        blocks.append(a)
        feed = a

    parts = blocks[::-1] if cfg.connect_angular else [blocks[-1]]
    if cfg.connect_image:
        parts = parts + [image]
    feats = concat_channels(parts, tape) if len(parts) > 1 else parts[0]
    b = conv2d(reshape_mode(feats, SPATIAL, tape), m["bottleneck"], SAME_ZERO, tape)
    b = activation(b, cfg.bottleneck_activation, tape)
    out = conv2d(reshape_mode(b, ANGULAR, tape), m["head"], VALID, tape)
    return reshape_mode(out, NATIVE, tape)


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------


def write_container(path, magic: bytes, header: str, entries) -> None:
    """``entries``: iterable of ``(name, weights, bias)``, stored as float32 LE."""
    buf = bytearray(magic)
    head = header.encode()
    buf += struct.pack("<I", len(head)) + head
    for name, w, b in entries:
        if w.ndim != 6:
            raise ShapeError(f"entry {name} is not 6D")
        nm = name.encode()
        buf += struct.pack("<I", len(nm)) + nm
        buf += struct.pack("<6I", *w.shape)
        buf += np.ascontiguousarray(w, dtype="<f4").tobytes()
        buf += np.ascontiguousarray(b, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_container(path, magic: bytes):
    """Return ``(header, [(name, weights, bias), ...])`` with float32 arrays."""
    data = Path(path).read_bytes()
    if data[: len(magic)] != magic:
        raise CheckpointError(f"{path}: bad magic, expected {magic!r}")
    pos = len(magic)

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"{path}: truncated at byte {pos}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (hlen,) = struct.unpack("<I", take(4))
    header = take(hlen).decode()
    entries = []
    while pos < len(data):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode()
        dims = struct.unpack("<6I", take(24))
        count = int(np.prod(dims))
        w = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
        b = np.frombuffer(take(4 * dims[-1]), dtype="<f4").astype(np.float32)
        entries.append((name, w, b))
    return header, entries


def save_checkpoint(m: ModelState, cfg: NetworkConfig, path) -> None:
    if cfg != m.config:
        raise ConfigMismatchError("model state was built for a different configuration")
    write_container(path, CHECKPOINT_MAGIC, cfg.to_text(), ((lid, k.weights, k.bias) for lid, k in m.layers))


def load_checkpoint(path, expect: NetworkConfig | None = None) -> tuple[ModelState, NetworkConfig]:
    """Load a checkpoint; with ``expect`` the stored config must match it exactly."""
    header, entries = read_container(path, CHECKPOINT_MAGIC)
    try:
        cfg = NetworkConfig.from_text(header)
    except (ConfigError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed config: {exc}") from None
    if expect is not None and expect.digest() != cfg.digest():
        raise ConfigMismatchError(
            f"{path}: checkpoint config (preset {cfg.preset}) differs from requested (preset {expect.preset})"
        )
    specs = layer_specs(cfg)
    got = [(name, w.shape) for name, w, _ in entries]
    if got != specs:
        raise CheckpointError(f"{path}: layer list does not match its config")
    layers = [(name, ConvKernel(w, b)) for name, w, b in entries]
    return ModelState(cfg, layers), cfg
