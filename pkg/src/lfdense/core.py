"""Tensor engine: mode reshaping, 2D convolution over either light field domain,
channel concatenation, activations, and a tape for reverse-mode gradients.

A :class:`ModeTensor` always stores its values as a native ``(u, v, w, h, c)``
array.  The mode tag only decides how that buffer is presented to a
convolution:

* ``spatial``: ``(u*v, w, h, c)``, a batch of ``w x h`` images;
* ``angular``: ``(u, v, w*h, c)``, a batch of ``u x v`` angular patches.

Both are pure relabelings of a row-major buffer, so switching modes never
touches a value.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

NATIVE = "native4d"
SPATIAL = "spatial"
ANGULAR = "angular"
MODES = (NATIVE, SPATIAL, ANGULAR)

SAME_ZERO = "same_zero"
VALID = "valid"


class ShapeError(ValueError):
    """Raised when tensor extents, channels or modes are incompatible."""


class ModeTensor:
    """A 5D light field feature tensor with a mode tag."""

    __slots__ = ("data", "mode")

    def __init__(self, data, mode: str = NATIVE):
        data = np.asarray(data)
        if data.ndim != 5:
            raise ShapeError(f"expected a (u, v, w, h, c) array, got shape {data.shape}")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.data = data
        self.mode = mode

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        return self.data.shape

    @property
    def u(self) -> int:
        return self.data.shape[0]

    @property
    def v(self) -> int:
        return self.data.shape[1]

    @property
    def w(self) -> int:
        return self.data.shape[2]

    @property
    def h(self) -> int:
        return self.data.shape[3]

    @property
    def c(self) -> int:
        return self.data.shape[4]

    @property
    def dtype(self):
        return self.data.dtype

    def view(self) -> np.ndarray:
        """Return the buffer in the layout of the current mode (no copy)."""
        u, v, w, h, c = self.data.shape
        if self.mode == SPATIAL:
            return self.data.reshape(u * v, w, h, c)
        if self.mode == ANGULAR:
            return self.data.reshape(u, v, w * h, c)
        return self.data

    def copy(self) -> "ModeTensor":
        return ModeTensor(self.data.copy(), self.mode)

    def __repr__(self) -> str:
        return f"ModeTensor(shape={self.shape}, mode={self.mode}, dtype={self.dtype})"


def spatial_index(index, shape):
    """Map a native ``(u, v, w, h, c)`` index to its spatial-mode index."""
    u, v, w, h, c = index
    return (u * shape[1] + v, w, h, c)


def angular_index(index, shape):
    """Map a native ``(u, v, w, h, c)`` index to its angular-mode index."""
    u, v, w, h, c = index
    return (u, v, w * shape[3] + h, c)


@dataclass
class ConvKernel:
    """Weights ``(kA_u, kA_v, kS_w, kS_h, c_in, c_out)`` and bias ``(c_out,)``.

    A kernel with a non-trivial angular pair is angular and must have a 1x1
    spatial pair.  Everything else (including 1x1x1x1) runs in spatial mode.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 6:
            raise ShapeError(f"kernel weights must be 6D, got {self.weights.shape}")
        ka_u, ka_v, ks_w, ks_h, _, c_out = self.weights.shape
        if (ka_u, ka_v) != (1, 1) and (ks_w, ks_h) != (1, 1):
            raise ShapeError("a kernel may extend over the angular or the spatial pair, not both")
        if self.bias.shape != (c_out,):
            raise ShapeError(f"bias shape {self.bias.shape} does not match c_out={c_out}")

    @classmethod
    def zeros(cls, dims: Sequence[int], dtype=np.float64) -> "ConvKernel":
        return cls(np.zeros(tuple(dims), dtype=dtype), np.zeros(dims[-1], dtype=dtype))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def c_in(self) -> int:
        return self.weights.shape[4]

    @property
    def c_out(self) -> int:
        return self.weights.shape[5]

    @property
    def is_angular(self) -> bool:
        return self.weights.shape[:2] != (1, 1)

    @property
    def domain(self) -> str:
        return ANGULAR if self.is_angular else SPATIAL

    @property
    def active(self) -> tuple[int, int]:
        """Kernel extents over the pair of dimensions it convolves."""
        return self.weights.shape[:2] if self.is_angular else self.weights.shape[2:4]

    @property
    def n_params(self) -> int:
        return int(self.weights.size + self.bias.size)

    def astype(self, dtype) -> "ConvKernel":
        return ConvKernel(self.weights.astype(dtype), self.bias.astype(dtype))


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------


@dataclass
class Node:
    op: str
    fn: Callable
    inputs: tuple
    attrs: dict
    output: Any
    vjp: Callable
    macs: int = 0


class Gradients:
    """Gradients keyed by the identity of the leaf or intermediate object."""

    def __init__(self):
        self._grads: dict[int, np.ndarray] = {}
        self._keep: dict[int, Any] = {}

    def add(self, obj, g):
        key = id(obj)
        if key in self._grads:
            self._grads[key] = self._grads[key] + g
        else:
            self._grads[key] = g
            self._keep[key] = obj

    def get(self, obj, default=None):
        return self._grads.get(id(obj), default)

    def __contains__(self, obj) -> bool:
        return id(obj) in self._grads

    def __getitem__(self, obj) -> np.ndarray:
        try:
            return self._grads[id(obj)]
        except KeyError:
            raise KeyError(f"no gradient reached {type(obj).__name__} object") from None


def _value_array(x):
    return x.data if isinstance(x, ModeTensor) else x


class Tape:
    """Ordered record of executed primitives.

    Single writer: record into one tape from one thread at a time.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def record(self, op, fn, inputs, attrs, output, vjp, macs=0):
        self.nodes.append(Node(op, fn, tuple(inputs), dict(attrs), output, vjp, macs))

    @property
    def macs(self) -> int:
        return sum(n.macs for n in self.nodes)

    def backward(self, output, seed=None) -> Gradients:
        """Accumulate vector-Jacobian products from ``output`` back to the leaves."""
        grads = Gradients()
        out_arr = _value_array(output)
        if seed is None:
            if np.ndim(out_arr) != 0:
                raise ValueError("backward without a seed needs a scalar output")
            seed = np.ones_like(out_arr)
        grads.add(output, np.asarray(seed))
        for node in reversed(self.nodes):
            g = grads.get(node.output)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is not None:
                    grads.add(inp, gi)
        return grads

    def replay(self) -> list:
        """Re-execute every recorded primitive from the recorded leaves.

        Returns the list of replayed outputs, in tape order.  Intermediate
        inputs are substituted by their replayed counterparts.
        """
        fresh: dict[int, Any] = {}
        outputs = []
        for node in self.nodes:
            args = [fresh.get(id(x), x) for x in node.inputs]
            out, _ = node.fn(*args, **node.attrs)
            fresh[id(node.output)] = out
            outputs.append(out)
        return outputs

    def replay_matches(self) -> bool:
        """True if replaying reproduces every recorded output bit for bit."""
        for node, out in zip(self.nodes, self.replay()):
            if not np.array_equal(_value_array(node.output), _value_array(out)):
                return False
        return True


# ---------------------------------------------------------------------------
# Primitives.  Each ``_impl`` returns ``(output, vjp)``.
# ---------------------------------------------------------------------------


def _reshape_impl(t: ModeTensor, target: str):
    if target not in MODES:
        raise ValueError(f"unknown mode {target!r}")
    out = ModeTensor(t.data, target)
    return out, lambda g: (g,)


def reshape_mode(t: ModeTensor, target: str, tape: Tape | None = None) -> ModeTensor:
    """Relabel ``t`` into ``target`` mode.  Values are shared, not copied."""
    out, vjp = _reshape_impl(t, target)
    if tape is not None:
        tape.record("reshape_mode", _reshape_impl, (t,), {"target": target}, out, vjp)
    return out


def _pads(k: int, padding: str) -> tuple[int, int]:
    if padding == VALID:
        return 0, 0
    lo = (k - 1) // 2
    return lo, k - 1 - lo


def _conv_batch(x: np.ndarray, w: np.ndarray, b: np.ndarray, padding: str):
    """Cross-correlate ``x (B, X, Y, Cin)`` with ``w (kx, ky, Cin, Cout)``."""
    bsz, nx, ny, cin = x.shape
    kx, ky, _, cout = w.shape
    if padding == VALID:
        if kx > nx or ky > ny:
            raise ShapeError(f"valid convolution with a {kx}x{ky} kernel on a {nx}x{ny} extent")
        xp = x
        ox, oy = nx - kx + 1, ny - ky + 1
    elif padding == SAME_ZERO:
        (lx, hx), (ly, hy) = _pads(kx, padding), _pads(ky, padding)
        xp = np.pad(x, ((0, 0), (lx, hx), (ly, hy), (0, 0)))
        ox, oy = nx, ny
    else:
        raise ValueError(f"unknown padding {padding!r}")

    out = np.zeros((bsz * ox * oy, cout), dtype=np.result_type(x, w))
    for dx in range(kx):
        for dy in range(ky):
            patch = xp[:, dx:dx + ox, dy:dy + oy, :].reshape(-1, cin)
            out += patch @ w[dx, dy]
    out += b
    out = out.reshape(bsz, ox, oy, cout)

    def vjp(g):
        g2 = g.reshape(-1, cout)
        gw = np.empty_like(w)
        gxp = np.zeros_like(xp)
        for dx in range(kx):
            for dy in range(ky):
                patch = xp[:, dx:dx + ox, dy:dy + oy, :].reshape(-1, cin)
                gw[dx, dy] = patch.T @ g2
                gxp[:, dx:dx + ox, dy:dy + oy, :] += (g2 @ w[dx, dy].T).reshape(bsz, ox, oy, cin)
        if padding == SAME_ZERO:
            gx = gxp[:, lx:lx + nx, ly:ly + ny, :]
        else:
            gx = gxp
        return gx, gw, g2.sum(axis=0)

    return out, vjp


def _conv_impl(t: ModeTensor, weights: np.ndarray, bias: np.ndarray, padding: str):
    kernel = ConvKernel(weights, bias)
    if t.c != kernel.c_in:
        raise ShapeError(f"input has {t.c} channels, kernel expects {kernel.c_in}")
    if t.mode != kernel.domain:
        raise ShapeError(f"{kernel.domain} kernel applied to a tensor in {t.mode} mode")
    u, v, w, h, _ = t.shape
    ka_u, ka_v, ks_w, ks_h, cin, cout = weights.shape

    if kernel.is_angular:
        x = t.view().transpose(2, 0, 1, 3)  # (w*h, u, v, c)
        w2 = weights.reshape(ka_u, ka_v, cin, cout)
        y, inner = _conv_batch(x, w2, bias, padding)
        uo, vo = y.shape[1], y.shape[2]
        out = ModeTensor(np.ascontiguousarray(y.transpose(1, 2, 0, 3)).reshape(uo, vo, w, h, cout), ANGULAR)

        def vjp(g):
            gy = g.reshape(uo, vo, w * h, cout).transpose(2, 0, 1, 3)
            gx, gw, gb = inner(np.ascontiguousarray(gy))
            return gx.transpose(1, 2, 0, 3).reshape(u, v, w, h, cin), gw.reshape(weights.shape), gb
    else:
        x = t.view()  # (u*v, w, h, c)
        w2 = weights.reshape(ks_w, ks_h, cin, cout)
        y, inner = _conv_batch(x, w2, bias, padding)
        wo, ho = y.shape[1], y.shape[2]
        out = ModeTensor(y.reshape(u, v, wo, ho, cout), SPATIAL)

        def vjp(g):
            gx, gw, gb = inner(g.reshape(u * v, wo, ho, cout))
            return gx.reshape(u, v, w, h, cin), gw.reshape(weights.shape), gb

    return out, vjp


def conv_macs(weights_shape, out_shape) -> int:
    """Multiply-accumulates executed by one convolution (padding taps included)."""
    ka_u, ka_v, ks_w, ks_h, cin, cout = weights_shape
    u, v, w, h, _ = out_shape
    return ka_u * ka_v * ks_w * ks_h * cin * cout * u * v * w * h


def conv2d(t: ModeTensor, k: ConvKernel, padding: str = SAME_ZERO, tape: Tape | None = None) -> ModeTensor:
    """2D cross-correlation over the kernel's active pair of dimensions."""
    out, vjp = _conv_impl(t, k.weights, k.bias, padding)
    if tape is not None:
        tape.record("conv2d", _conv_impl, (t, k.weights, k.bias), {"padding": padding}, out, vjp,
                    macs=conv_macs(k.weights.shape, out.shape))
    return out


def _concat_impl(*parts: ModeTensor):
    if not parts:
        raise ShapeError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if p.shape[:4] != first.shape[:4]:
            raise ShapeError(f"extent mismatch: {p.shape[:4]} vs {first.shape[:4]}")
        if p.mode != first.mode:
            raise ShapeError(f"mode mismatch: {p.mode} vs {first.mode}")
    if len(parts) == 1:
        data = first.data
    else:
        data = np.concatenate([p.data for p in parts], axis=-1)
    out = ModeTensor(data, first.mode)
    bounds = np.cumsum([0] + [p.c for p in parts])

    def vjp(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return out, vjp


def concat_channels(parts: Sequence[ModeTensor], tape: Tape | None = None) -> ModeTensor:
    """Stack channels of ``parts`` in the given order."""
    parts = tuple(parts)
    out, vjp = _concat_impl(*parts)
    if tape is not None:
        tape.record("concat_channels", _concat_impl, parts, {}, out, vjp)
    return out


def split_channels(t: ModeTensor, sizes: Sequence[int]) -> list[ModeTensor]:
    """Inverse of :func:`concat_channels` for known part sizes."""
    if sum(sizes) != t.c:
        raise ShapeError(f"sizes sum to {sum(sizes)}, tensor has {t.c} channels")
    bounds = np.cumsum([0, *sizes])
    return [ModeTensor(t.data[..., bounds[i]:bounds[i + 1]], t.mode) for i in range(len(sizes))]


def _activation_impl(t: ModeTensor, kind: str):
    if kind == "identity":
        return ModeTensor(t.data, t.mode), lambda g: (g,)
    if kind != "relu":
        raise ValueError(f"unknown activation {kind!r}")
    mask = t.data > 0
    out = ModeTensor(np.where(mask, t.data, 0).astype(t.dtype, copy=False), t.mode)
    return out, lambda g: (g * mask,)


def activation(t: ModeTensor, kind: str = "relu", tape: Tape | None = None) -> ModeTensor:
    """Elementwise ``relu`` (subgradient 0 at 0) or ``identity``."""
    out, vjp = _activation_impl(t, kind)
    if tape is not None:
        tape.record("activation", _activation_impl, (t,), {"kind": kind}, out, vjp)
    return out


def _stack_impl(t: ModeTensor):
    if t.u != 1 or t.v != 1:
        raise ShapeError(f"view stack needs a 1x1 angular extent, got {t.u}x{t.v}")
    out = np.ascontiguousarray(t.data[0, 0].transpose(2, 0, 1))
    return out, lambda g: (g.transpose(1, 2, 0)[None, None],)


def view_stack(t: ModeTensor, tape: Tape | None = None) -> np.ndarray:
    """Turn a ``(1, 1, w, h, n)`` head output into an ``(n, w, h)`` image stack."""
    out, vjp = _stack_impl(t)
    if tape is not None:
        tape.record("view_stack", _stack_impl, (t,), {}, out, vjp)
    return out


def _mse_impl(pred: np.ndarray, target: np.ndarray, reduction: str):
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    diff = pred - target
    scale = 1.0 / diff.size if reduction == "mean" else 1.0
    loss = np.asarray(np.sum(diff * diff) * scale, dtype=diff.dtype)
    return loss, lambda g: ((2.0 * scale) * g * diff, None)


def mse_loss(pred: np.ndarray, target: np.ndarray, reduction: str = "mean",
             tape: Tape | None = None) -> np.ndarray:
    """Squared error summed over views and pixels, divided by the count for ``mean``.

    Returns a 0-d array so that the result can seed :meth:`Tape.backward`.
    """
    loss, vjp = _mse_impl(pred, target, reduction)
    if tape is not None:
        tape.record("mse_loss", _mse_impl, (pred, target), {"reduction": reduction}, loss, vjp)
    return loss


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def grad_check(f: Callable[[Tape], Any], x, eps: float = 1e-5, max_coords: int | None = None,
               seed: int = 0, floor: float = 1e-8) -> float:
    """Worst relative error between tape gradients and central differences.

    ``f(tape)`` must record a scalar on ``tape`` and read ``x`` (a
    :class:`ModeTensor` or a parameter array) by reference; ``x`` is perturbed
    in place and restored.  The relative error of a coordinate is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    arr = x.data if isinstance(x, ModeTensor) else x
    if arr.dtype != np.float64:
        raise TypeError("gradient checks need 64-bit arrays")
    if not arr.flags.c_contiguous:
        raise ValueError("x must be C-contiguous so it can be perturbed in place")
    tape = Tape()
    out = f(tape)
    if np.ndim(_value_array(out)) != 0:
        raise ValueError("grad_check needs a scalar-valued function")
    analytic = tape.backward(out).get(x)
    if analytic is None:
        analytic = np.zeros_like(arr)
    analytic = np.broadcast_to(analytic, arr.shape)

    flat = arr.reshape(-1)
    coords = np.arange(flat.size)
    if max_coords is not None and flat.size > max_coords:
        coords = np.random.default_rng(seed).choice(flat.size, max_coords, replace=False)
    worst = 0.0
    a_flat = analytic.reshape(-1)
    for i in coords:
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(Tape()))
        flat[i] = orig - eps
        fm = float(f(Tape()))
        flat[i] = orig
        num = (fp - fm) / (2 * eps)
        a = float(a_flat[i])
        err = abs(a - num) / max(abs(a), abs(num), floor)
        worst = max(worst, err)
    return worst
