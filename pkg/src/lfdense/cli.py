"""Command line front end.

Exit codes: 0 success, 1 validation error, 2 runtime or numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from . import data as lfdata
from .core import ModeTensor, ShapeError, Tape
from .data import DataError, LightField
from .metrics import HEAT_COLORMAP, epi_slice, evaluate, heatmap_indices
from .net import (
    PRESETS,
    CheckpointError,
    ConfigError,
    NetworkConfig,
    block_cost_ratio,
    build_network,
    count_macs,
    count_params,
    forward,
    layer_specs,
    load_checkpoint,
    preset,
    save_checkpoint,
)
from .train import NonFiniteError, TrainConfig, train

log = logging.getLogger("lfdense")

VALIDATION_ERRORS = (ConfigError, DataError, ShapeError, CheckpointError, ValueError, FileNotFoundError, IndexError)

# Published parameter totals of the reference architecture, keyed by the swept value.
REPORTED_NS = {1: 359228, 2: 470012, 3: 636092, 4: 857468, 5: 1134140, 6: 1466108}
REPORTED_NA = {1: 1134140, 2: 1189628, 3: 1245116}
REPORTED_NCB = {1: 210240, 2: 376508, 3: 552092, 4: 736892, 5: 930908, 6: 1134140, 7: 1346588}
REPORTED_VARIANTS = {
    "None": 394844, "I": 396860, "S": 947804, "A": 579164,
    "SA": 1132124, "IA": 581180, "IS": 949820, "ISA": 1134140,
}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

NET_KEYS = {f.name: f.type for f in fields(NetworkConfig)}
TRAIN_KEYS = {f.name: f.type for f in fields(TrainConfig)}


@dataclass
class RunConfig:
    preset: str = "tablefit"
    task: str = "2x2to8x8"
    data: list = field(default_factory=list)
    out: str = "run"
    net: dict = field(default_factory=dict)  # NetworkConfig overrides
    train: dict = field(default_factory=dict)  # TrainConfig overrides

    def network_config(self) -> NetworkConfig:
        pattern = lfdata.make_pattern(self.task)
        u0, v0 = pattern.input_grid
        return preset(self.preset, u0=u0, v0=v0, n_out=pattern.n_out, **self.net)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def resolved_text(self) -> str:
        """Every resolved setting as sorted ``key = value`` lines."""
        items = {"preset": self.preset, "task": self.task, "data": ",".join(self.data), "out": self.out}
        items.update({f"net.{k}": v for k, v in asdict(self.network_config()).items()})
        items.update({f"train.{k}": v for k, v in asdict(self.train_config()).items()})
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(items.items()))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(key, value: str, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return value.lower() in ("true", "1", "yes")
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError:
        raise UsageError(f"{key}: cannot parse {value!r} as {typ}") from None
    return value


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{source}:{n}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def build_run_config(raw: dict) -> RunConfig:
    rc = RunConfig()
    for key, value in raw.items():
        if value is None:
            continue
        if key == "preset":
            if value not in PRESETS:
                raise UsageError(f"unknown preset {value!r}")
            rc.preset = value
        elif key == "task":
            lfdata.make_pattern(value)
            rc.task = value
        elif key == "data":
            rc.data = value if isinstance(value, list) else [p for p in value.replace(",", " ").split() if p]
        elif key == "out":
            rc.out = str(value)
        elif key in NET_KEYS and key not in ("u0", "v0", "n_out", "preset"):
            rc.net[key] = value if not isinstance(value, str) else _coerce(key, value, NET_KEYS[key])
        elif key in TRAIN_KEYS:
            rc.train[key] = value if not isinstance(value, str) else _coerce(key, value, TRAIN_KEYS[key])
        else:
            raise UsageError(f"unknown setting {key!r}")
    rc.network_config()
    rc.train_config()
    return rc


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


@contextmanager
def output_lock(path: Path):
    path.mkdir(parents=True, exist_ok=True)
    lock = path / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"{path} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield path
    finally:
        lock.unlink(missing_ok=True)


def _parse_pair(text: str, what: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise UsageError(f"{what} must look like AxB, got {text!r}") from None


def _parse_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad range {text!r}; use LO..HI or a,b,c") from None


def _save_png(arr: np.ndarray, path: Path):
    Image.fromarray(arr).save(path)


def _net_overrides(args) -> dict:
    out = {}
    for key in ("n_cb", "n_s", "n_a", "growth", "bottleneck_kernel", "bottleneck_channels", "activation"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    for key in ("connect_spatial", "connect_angular", "connect_image"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val == "on"
    return out


def _add_net_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--task", choices=sorted(lfdata.TASKS), default=None)
    p.add_argument("--n-cb", dest="n_cb", type=int)
    p.add_argument("--n-s", dest="n_s", type=int)
    p.add_argument("--n-a", dest="n_a", type=int)
    p.add_argument("--growth", type=int)
    p.add_argument("--bottleneck-kernel", dest="bottleneck_kernel", type=int, choices=(1, 3))
    p.add_argument("--bottleneck-channels", dest="bottleneck_channels", type=int)
    p.add_argument("--activation", choices=("relu", "identity"))
    for name in ("spatial", "angular", "image"):
        p.add_argument(f"--connect-{name}", dest=f"connect_{name}", choices=("on", "off"))


def _audit_config(args) -> NetworkConfig:
    task = args.task or "2x2to8x8"
    pattern = lfdata.make_pattern(task)
    u0, v0 = pattern.input_grid
    return preset(args.preset or "tablefit", u0=u0, v0=v0, n_out=pattern.n_out, **_net_overrides(args))


def _load_scene_for(path, pattern) -> LightField:
    lf = lfdata.load_view_directory(path)
    if lf.grid != pattern.grid and lf.grid[0] >= pattern.grid[0] and lf.grid[1] >= pattern.grid[1]:
        if pattern.grid[0] != pattern.grid[1]:
            raise DataError("central cropping needs a square target grid")
        lf = lfdata.prepare_eval_views(lf, pattern.grid[0])
    if lf.grid != pattern.grid:
        raise DataError(f"{path}: grid {lf.grid} does not fit task grid {pattern.grid}")
    return lf


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    raw = {}
    if args.config:
        cfg_path = Path(args.config)
        raw.update(parse_config_text(cfg_path.read_text(), str(cfg_path)))
    cli = {
        "preset": args.preset, "task": args.task, "out": args.out,
        "data": args.data or None,
        "iterations": args.iters, "seed": args.seed, "patch_size": args.patch_size,
        "batch_size": args.batch_size, "learning_rate": args.lr,
        "checkpoint_every": args.checkpoint_every, "loss_reduction": args.loss_reduction,
    }
    cli.update(_net_overrides(args))
    raw.update({k: v for k, v in cli.items() if v is not None})
    rc = build_run_config(raw)
    if not rc.data:
        raise UsageError("no dataset given (--data DIR ...)")
    net_cfg, train_cfg = rc.network_config(), rc.train_config()
    pattern = lfdata.make_pattern(rc.task)
    # load everything before touching the output directory
    scenes = [_load_scene_for(p, pattern) for p in rc.data]

    out = Path(rc.out)
    with output_lock(out):
        (out / "config.resolved").write_text(rc.resolved_text())
        resume = Path(args.resume) if args.resume else None
        with open(out / "train.log", "a" if resume else "w") as fh:
            result = train(net_cfg, train_cfg, scenes, pattern, out_dir=out, resume=resume,
                           log_file=fh, wall_time=args.log_wall_time)
        if train_cfg.iterations == 0:
            save_checkpoint(result.model, net_cfg, out / "ckpt_000000.sadn")
    last = result.log[-1] if result.log else None
    print(f"trained {len(result.log)} iterations; final loss {last[1]:.6g}" if last else "no iterations run")
    return 0


def cmd_reconstruct(args) -> int:
    model, cfg = load_checkpoint(args.checkpoint)
    pattern = lfdata.pattern_for(cfg.u0, cfg.v0, cfg.n_out)
    scene = lfdata.load_view_directory(args.scene)
    if scene.grid == pattern.input_grid:
        inputs = scene
    elif scene.grid == pattern.grid:
        inputs, _ = lfdata.extract_sparse(scene, pattern)
    else:
        raise DataError(
            f"scene grid {scene.grid} fits neither the {pattern.input_grid} inputs nor the {pattern.grid} grid "
            f"of the checkpoint's task"
        )

    if inputs.colorspace == "rgb":
        ycc = lfdata.rgb_to_ycbcr(inputs).data
    else:
        ycc = inputs.data
    x = ModeTensor(ycc[..., :1].astype(np.float32))
    preds = forward(model, x).data[0, 0].transpose(2, 0, 1).astype(np.float64)
    preds = np.clip(preds, 0.0, 1.0)
    luma = lfdata.assemble_dense(LightField(ycc[..., :1], "y_only"), preds[..., None], pattern)
    if inputs.colorspace == "rgb":
        chroma = lfdata.chroma_angular_upsample(ycc[..., 1:], pattern)
        dense = lfdata.ycbcr_to_rgb(LightField(np.concatenate([luma.data, chroma], axis=-1), "ycbcr"))
        data = dense.data
        for i, r in enumerate(pattern.input_rows):
            for j, c in enumerate(pattern.input_cols):
                data[r, c] = inputs.data[i, j]
        result = LightField(np.clip(data, 0, 1), "rgb")
    else:
        result = luma
    out = Path(args.out)
    with output_lock(out):
        lfdata.save_view_directory(result, out)
    print(f"wrote {pattern.grid[0] * pattern.grid[1]} views to {out}")
    return 0


def cmd_eval(args) -> int:
    recon = lfdata.load_view_directory(args.recon)
    truth = lfdata.load_view_directory(args.truth)
    if args.protocol == "lytro8x8":
        if recon.grid != (8, 8):
            recon = lfdata.prepare_eval_views(recon, 8)
        if truth.grid != (8, 8):
            truth = lfdata.prepare_eval_views(truth, 8)
        recon, truth = lfdata.shave_borders(recon, 22), lfdata.shave_borders(truth, 22)
    if recon.shape != truth.shape:
        raise DataError(f"grid mismatch: {recon.shape[:4]} vs {truth.shape[:4]}")
    space = "y_only" if args.space == "y" else "rgb"
    if space == "rgb" and (recon.colorspace != "rgb" or truth.colorspace != "rgb"):
        raise DataError("rgb evaluation needs rgb scenes; use --space y")
    pattern = None
    if args.views == "novel":
        if args.task:
            pattern = lfdata.make_pattern(args.task)
        else:
            matches = [t for t, (grid, _) in lfdata.TASKS.items() if grid == recon.grid]
            if not matches:
                raise DataError(f"no task for a {recon.grid} grid; pass --task or --views all")
            pattern = lfdata.make_pattern(matches[0])
    report = evaluate(recon, truth, space, args.views, pattern)
    print(report.table())
    if args.out:
        out = Path(args.out)
        with output_lock(out):
            (out / "report.txt").write_text(report.table() + "\n")
            (out / "report.tsv").write_text("\n".join(report.lines()) + "\n")
            a = recon.data if space == "rgb" else recon.luminance()[..., None]
            b = truth.data if space == "rgb" else truth.luminance()[..., None]
            if args.heatmaps:
                for r, c in report.views:
                    idx = heatmap_indices(a[r, c], b[r, c], args.heat_scale)
                    _save_png(HEAT_COLORMAP[idx], out / f"heatmap_r{r}_c{c}.png")
            if args.epi:
                u, v, w, h = a.shape[:4]
                for name, arr in (("recon", a), ("truth", b)):
                    ep_h = epi_slice(arr, "horizontal", u // 2, w // 2)
                    ep_v = epi_slice(arr, "vertical", v // 2, h // 2)
                    for tag, img in (("h", ep_h), ("v", ep_v)):
                        img = lfdata.quantize(img)
                        _save_png(img[..., 0] if img.shape[-1] == 1 else img, out / f"epi_{tag}_{name}.png")
    elif args.heatmaps or args.epi:
        raise UsageError("--heatmaps and --epi need --out")
    return 0


def _sweep_rows(base: NetworkConfig, key: str, values, reported: dict):
    totals = {v: count_params(base.with_(**{key: v})).total for v in values}
    rows = []
    for a, b in zip(values, values[1:]):
        ours = totals[b] - totals[a]
        ref = reported[b] - reported[a] if a in reported and b in reported else None
        rows.append((a, b, ours, ref))
    return totals, rows


def cmd_audit(args) -> int:
    cfg = _audit_config(args)
    pc = count_params(cfg)
    print(f"preset {cfg.preset}: {cfg.n_cb} blocks, n_s={cfg.n_s}, n_a={cfg.n_a}, growth {cfg.growth}, "
          f"bottleneck {cfg.bottleneck_kernel}x{cfg.bottleneck_kernel}->{cfg.bottleneck_channels}")
    if not args.quiet:
        print(f"{'layer':<12} {'kernel':<28} {'params':>10}")
        dims = dict(layer_specs(cfg))
        for lid, n in pc.ledger:
            print(f"{lid:<12} {str(dims[lid]):<28} {n:>10,}")
    print(f"total parameters: {pc.total:,}")

    keys = {"ns": ("n_s", REPORTED_NS), "na": ("n_a", REPORTED_NA), "ncb": ("n_cb", REPORTED_NCB)}
    for spec in args.sweep or []:
        name, rng = spec
        if name not in keys:
            raise UsageError(f"unknown sweep {name!r}; choose ns, na or ncb")
        key, reported = keys[name]
        values = _parse_range(rng)
        totals, rows = _sweep_rows(cfg, key, values, reported)
        print(f"\nsweep {key}: " + ", ".join(f"{v}: {totals[v]:,}" for v in values))
        print(f"{'step':<8} {'delta':>10} {'reported':>10}  status")
        diffs = []
        for a, b, ours, ref in rows:
            status = "-" if ref is None else ("match" if ours == ref else f"differs by {ours - ref:+,}")
            print(f"{f'{a}->{b}':<8} {ours:>10,} {('' if ref is None else f'{ref:,}'):>10}  {status}")
            diffs.append(ours)
        if len(diffs) > 1:
            print("second differences: " + ", ".join(f"{b - a:,}" for a, b in zip(diffs, diffs[1:])))
        offsets = {reported[v] - totals[v] for v in values if v in reported}
        if offsets:
            print("reported minus audited: " + ", ".join(f"{o:,}" for o in sorted(offsets)))

    if args.toggles:
        base = cfg.with_(connect_spatial=False, connect_angular=False, connect_image=False)
        none = count_params(base).total
        print(f"\nconnection toggles (relative to all off = {none:,})")
        print(f"{'variant':<8} {'params':>10} {'delta':>10} {'sum of parts':>13} {'reported':>10}  status")
        single = {}
        for flag, letter in (("connect_image", "I"), ("connect_spatial", "S"), ("connect_angular", "A")):
            single[letter] = count_params(base.with_(**{flag: True})).total - none
        for name in REPORTED_VARIANTS:
            letters = "" if name == "None" else name
            c = base.with_(connect_image="I" in letters, connect_spatial="S" in letters, connect_angular="A" in letters)
            total = count_params(c).total
            delta = total - none
            parts = sum(single[ch] for ch in letters)
            ref = REPORTED_VARIANTS[name] - REPORTED_VARIANTS["None"]
            status = "match" if delta == ref == parts else f"differs (ref {ref:,}, parts {parts:,})"
            print(f"{name:<8} {total:>10,} {delta:>10,} {parts:>13,} {ref:>10,}  {status}")
        print("note: absolute totals are not reproduced; every reported total exceeds the audit by "
              f"{REPORTED_VARIANTS['None'] - none:,}")

    if args.macs:
        w, h = _parse_pair(args.macs, "--macs")
        _print_macs(cfg, w, h)
    return 0


def _print_macs(cfg, w, h):
    rep = count_macs(cfg, w, h)
    print(f"\nMACs for a {cfg.u0}x{cfg.v0}x{w}x{h} input: {rep.total:,}")
    print(f"correlation blocks: {rep.extraction:,}; full 4D stack: {rep.full4d:,}; ratio {rep.ratio} "
          f"({float(rep.ratio):.4f})")
    r = block_cost_ratio(cfg.n_s, cfg.n_a)
    print(f"per-block cost vs one 3x3x3x3 conv at equal channels: {r} ({float(r):.4f})")
    sas = block_cost_ratio(1, 1)
    print(f"single spatial+angular pair vs one 3x3x3x3 conv: {sas} ({float(sas):.4f})")


def cmd_bench(args) -> int:
    cfg = _audit_config(args)
    w, h = _parse_pair(args.size, "--size")
    model = build_network(cfg, seed=args.seed, dtype=np.float32)
    rng = np.random.default_rng(args.seed)
    x = ModeTensor(rng.random((cfg.u0, cfg.v0, w, h, 1)).astype(np.float32))
    times = []
    executed = None
    for _ in range(args.repeats):
        tape = Tape()
        t0 = time.perf_counter()
        forward(model, x, tape)
        times.append(time.perf_counter() - t0)
        executed = tape.macs
    rep = count_macs(cfg, w, h)
    best = min(times)
    print(f"forward {cfg.u0}x{cfg.v0}x{w}x{h}: best {best:.4f} s over {args.repeats} runs")
    print(f"executed MACs: {executed:,}")
    print(f"count_macs:    {rep.total:,}  ({'identical' if executed == rep.total else 'MISMATCH'})")
    print(f"throughput: {executed / best / 1e9:.3f} GMAC/s")
    _print_macs(cfg, w, h)
    return 0 if executed == rep.total else 2


def cmd_make_synthetic(args) -> int:
    rows, cols = _parse_pair(args.grid, "--grid")
    width, height = _parse_pair(args.size, "--size")
    need = lfdata.required_texture_size(args.disparity, rows, cols, height, width)
    if args.texture == "random":
        rng = np.random.default_rng(args.seed)
        shape = need if args.channels == 1 else need + (3,)
        texture = rng.random(shape)
    else:
        with Image.open(args.texture) as im:
            texture = np.asarray(im.convert("L" if args.channels == 1 else "RGB"), dtype=np.float64) / 255.0
    lf = lfdata.synth_lf(texture, args.disparity, rows, cols, height, width)
    out = Path(args.out)
    with output_lock(out):
        lfdata.save_view_directory(lf, out)
    print(f"wrote a {rows}x{cols} grid of {width}x{height} views to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfdense", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network on view directories")
    p.add_argument("--config", help="key = value settings file")
    _add_net_flags(p)
    p.add_argument("--data", nargs="+", help="scene directories")
    p.add_argument("--out")
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--loss-reduction", dest="loss_reduction", choices=("mean", "sum"))
    p.add_argument("--resume", help="checkpoint to continue from (sidecar .sadm next to it)")
    p.add_argument("--log-wall-time", action="store_true",
                   help="record elapsed seconds in train.log (otherwise 0, keeping logs reproducible)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="synthesize the dense grid from sparse views")
    p.add_argument("checkpoint")
    p.add_argument("scene")
    p.add_argument("out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="PSNR/SSIM of a reconstruction against ground truth")
    p.add_argument("recon")
    p.add_argument("truth")
    p.add_argument("--protocol", choices=("none", "lytro8x8"), default="none")
    p.add_argument("--space", choices=("rgb", "y"), default="rgb")
    p.add_argument("--views", choices=("novel", "all"), default="novel")
    p.add_argument("--task", choices=sorted(lfdata.TASKS))
    p.add_argument("--heatmaps", action="store_true")
    p.add_argument("--heat-scale", dest="heat_scale", type=float, default=0.1)
    p.add_argument("--epi", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="parameter and MAC ledger")
    _add_net_flags(p)
    p.add_argument("--sweep", nargs=2, action="append", metavar=("NAME", "RANGE"),
                   help="ns|na|ncb and LO..HI, e.g. --sweep ns 1..6")
    p.add_argument("--toggles", action="store_true")
    p.add_argument("--macs", metavar="WxH")
    p.add_argument("--quiet", action="store_true", help="skip the per-layer ledger")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", help="time forward passes and check MAC accounting")
    _add_net_flags(p)
    p.add_argument("--size", default="32x32")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-synthetic", help="write a constant-disparity scene")
    p.add_argument("--texture", default="random", help="PNG path or 'random'")
    p.add_argument("--disparity", "-d", type=float, default=0.0)
    p.add_argument("--grid", default="8x8", help="rows x cols of views")
    p.add_argument("--size", default="32x32", help="view width x height")
    p.add_argument("--channels", type=int, choices=(1, 3), default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (NonFiniteError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
