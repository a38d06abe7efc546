"""Patch-based training: loss, Adam, dihedral augmentation, sampler, loop."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import ConvKernel, ModeTensor, Tape, mse_loss, view_stack
from .data import LightField, ViewPattern, extract_sparse
from .net import (
    ModelState,
    NetworkConfig,
    build_network,
    forward,
    load_checkpoint,
    read_container,
    save_checkpoint,
    write_container,
)

__all__ = [
    "TrainConfig",
    "TrainSample",
    "AdamState",
    "NonFiniteError",
    "mse_loss",
    "adam_step",
    "augment",
    "augment_array",
    "dihedral_inverse",
    "sample_batch",
    "loss_and_grads",
    "train",
]

log = logging.getLogger(__name__)

MOMENTS_MAGIC = b"SADM1\n"


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 2
    patch_size: int = 128
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    iterations: int = 0
    seed: int = 0
    checkpoint_every: int = 0
    loss_reduction: str = "mean"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.iterations < 0 or self.checkpoint_every < 0:
            raise ValueError("iterations and checkpoint_every must be >= 0")
        if self.loss_reduction not in ("mean", "sum"):
            raise ValueError("loss_reduction must be mean or sum")


class TrainSample(NamedTuple):
    input: np.ndarray  # (u0, v0, p, p, 1)
    target: np.ndarray  # (n_out, p, p)
    provenance: tuple  # (scene, (row offset, col offset), dihedral element)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


class AdamState(NamedTuple):
    step: int
    m: list
    v: list

    @classmethod
    def fresh(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, moments: AdamState, t: int, beta1=0.9, beta2=0.999, eps=1e-8, lr=1e-4):
    """One bias-corrected Adam update.  Returns ``(new_params, new_moments)``;
    the inputs are left untouched."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise NonFiniteError(f"gradient {i} (shape {np.shape(g)}) has {bad} non-finite entries at step {t}")
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, moments.m, moments.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_p.append((p - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype, copy=False))
        new_m.append(m.astype(p.dtype, copy=False))
        new_v.append(v.astype(p.dtype, copy=False))
    return new_p, AdamState(t, new_m, new_v)


def save_moments(state: AdamState, model: ModelState, path) -> None:
    header = f"net_sha256={model.config.digest()}\nstep={state.step}\n"
    entries = []
    for i, (lid, _) in enumerate(model.layers):
        entries.append((f"m:{lid}", state.m[2 * i], state.m[2 * i + 1]))
        entries.append((f"v:{lid}", state.v[2 * i], state.v[2 * i + 1]))
    write_container(path, MOMENTS_MAGIC, header, entries)


def load_moments(path, model: ModelState) -> AdamState:
    header, entries = read_container(path, MOMENTS_MAGIC)
    meta = dict(line.split("=", 1) for line in header.splitlines() if line)
    if meta.get("net_sha256") != model.config.digest():
        raise ValueError(f"{path}: optimizer state belongs to a different network config")
    m, v = [], []
    for name, w, b in entries:
        (m if name.startswith("m:") else v).extend([w, b])
    if len(m) != 2 * len(model.layers) or len(v) != 2 * len(model.layers):
        raise ValueError(f"{path}: wrong number of moment entries")
    return AdamState(int(meta["step"]), m, v)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def dihedral_inverse(g: int) -> int:
    """Element ``g = 4*flip + k`` means rotate by ``k`` quarter turns, then flip."""
    k, flip = g % 4, g // 4
    return g if flip else (4 - k) % 4


def augment_array(data: np.ndarray, g: int) -> np.ndarray:
    """Apply dihedral element ``g`` jointly to the angular ``(0, 1)`` and
    spatial ``(2, 3)`` axes of a ``(u, v, w, h, ...)`` array."""
    if not 0 <= g < 8:
        raise ValueError(f"dihedral element must be in 0..7, got {g}")
    k, flip = g % 4, g // 4
    if k % 2 and (data.shape[0] != data.shape[1] or data.shape[2] != data.shape[3]):
        raise ValueError(f"quarter-turn rotation needs square extents, got {data.shape[:4]}")
    out = np.rot90(np.rot90(data, k, axes=(0, 1)), k, axes=(2, 3))
    if flip:
        out = out[:, ::-1, :, ::-1]
    return np.ascontiguousarray(out)


def augment(lf: LightField, g: int) -> LightField:
    return LightField(augment_array(lf.data, g), lf.colorspace)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _luminance_scenes(dataset):
    return [lf.luminance() if isinstance(lf, LightField) else np.asarray(lf) for lf in dataset]


def sample_batch(dataset, pattern: ViewPattern, cfg: TrainConfig, iteration: int) -> list[TrainSample]:
    """Draw ``cfg.batch_size`` samples; deterministic in ``(cfg.seed, iteration)``.

    ``dataset`` is a sequence of light fields (or ``(u, v, w, h)`` luminance
    arrays) on the pattern's grid.
    """
    scenes = _luminance_scenes(dataset)
    if not scenes:
        raise ValueError("empty dataset")
    p = cfg.patch_size
    for i, s in enumerate(scenes):
        if s.shape[:2] != pattern.grid:
            raise ValueError(f"scene {i} grid {s.shape[:2]} does not match pattern grid {pattern.grid}")
        if s.shape[2] < p or s.shape[3] < p:
            raise ValueError(f"scene {i} ({s.shape[2]}x{s.shape[3]}) is smaller than the {p}px patch")
    rng = np.random.default_rng([cfg.seed, iteration])
    batch = []
    for _ in range(cfg.batch_size):
        idx = int(rng.integers(len(scenes)))
        s = scenes[idx]
        r0 = int(rng.integers(s.shape[2] - p + 1))
        c0 = int(rng.integers(s.shape[3] - p + 1))
        g = int(rng.integers(8))
        patch = augment_array(s[:, :, r0:r0 + p, c0:c0 + p, None], g)
        inputs, targets = extract_sparse(LightField(patch, "y_only"), pattern)
        batch.append(TrainSample(inputs.data, targets[..., 0], (idx, (r0, c0), g)))
    return batch


# ---------------------------------------------------------------------------
# Loop
# ---------------------------------------------------------------------------


def loss_and_grads(model: ModelState, batch: Sequence[TrainSample], reduction: str = "mean"):
    """Mean loss over the batch and its gradients, one per ``model.arrays()``
    entry.  Samples are reduced in batch order."""
    params = model.arrays()
    total = None
    grads = [np.zeros_like(p) for p in params]
    dtype = model.dtype
    for sample in batch:
        tape = Tape()
        x = ModeTensor(sample.input.astype(dtype, copy=False))
        pred = view_stack(forward(model, x, tape), tape)
        loss = mse_loss(pred, sample.target.astype(dtype, copy=False), reduction, tape)
        gs = tape.backward(loss)
        for i, p in enumerate(params):
            g = gs.get(p)
            if g is not None:
                grads[i] += g
        total = loss if total is None else total + loss
    n = len(batch)
    return float(total) / n, [g / dtype.type(n) for g in grads]


class TrainResult(NamedTuple):
    model: ModelState
    moments: AdamState
    log: list  # (iteration, loss, seconds)


def _ckpt_paths(out_dir: Path, step: int):
    return out_dir / f"ckpt_{step:06d}.sadn", out_dir / f"ckpt_{step:06d}.sadm"


def train(net_cfg: NetworkConfig, train_cfg: TrainConfig, dataset, pattern: ViewPattern,
          out_dir=None, resume=None, model: ModelState | None = None,
          log_file=None, wall_time: bool = True) -> TrainResult:
    """Sample, forward, loss, backward, Adam; repeated ``train_cfg.iterations`` times.

    Iteration ``t`` (1-based) logs the batch loss before its update.  With
    ``out_dir`` set, checkpoints plus moment sidecars are written every
    ``checkpoint_every`` iterations and after the last one.  ``resume`` is a
    checkpoint path; its ``.sadm`` sidecar must sit next to it.
    """
    if net_cfg.n_out != pattern.n_out or (net_cfg.u0, net_cfg.v0) != pattern.input_grid:
        raise ValueError("network config does not match the view pattern")
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if resume is not None:
        resume = Path(resume)
        model, _ = load_checkpoint(resume, expect=net_cfg)
        moments = load_moments(resume.with_suffix(".sadm"), model)
    else:
        if model is None:
            model = build_network(net_cfg, seed=train_cfg.seed, dtype=np.float32)
        moments = AdamState.fresh(model.arrays())
    out_dir = Path(out_dir) if out_dir is not None else None

    start = moments.step
    history = []
    params = model.arrays()
    t0 = time.perf_counter()
    for t in range(start + 1, train_cfg.iterations + 1):
        batch = sample_batch(dataset, pattern, train_cfg, t)
        loss, grads = loss_and_grads(model, batch, train_cfg.loss_reduction)
        if not math.isfinite(loss):
            raise NonFiniteError(f"non-finite loss {loss} at iteration {t}")
        params, moments = adam_step(params, grads, moments, t, train_cfg.beta1, train_cfg.beta2,
                                    train_cfg.epsilon, train_cfg.learning_rate)
        model = _rebuild(model, params)
        seconds = time.perf_counter() - t0 if wall_time else 0.0
        history.append((t, loss, seconds))
        if log_file is not None:
            log_file.write(f"{t}\t{loss:.9g}\t{seconds:.3f}\n")
        if t % 100 == 0:
            log.info("iter %d loss %.6g", t, loss)
        if out_dir is not None and (
            (train_cfg.checkpoint_every and t % train_cfg.checkpoint_every == 0) or t == train_cfg.iterations
        ):
            ck, mo = _ckpt_paths(out_dir, t)
            save_checkpoint(model, net_cfg, ck)
            save_moments(moments, model, mo)
    return TrainResult(model, moments, history)


def _rebuild(model: ModelState, params: list) -> ModelState:
    layers = [(lid, ConvKernel(params[2 * i], params[2 * i + 1])) for i, (lid, _) in enumerate(model.layers)]
    return ModelState(model.config, layers)
