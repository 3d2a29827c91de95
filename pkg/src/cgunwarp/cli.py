"""Command-line entry point: ``cgunwarp <subcommand> [options]``.

Exit codes: 0 success, 1 I/O / environment / usage, 2 algorithmic failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AlgorithmError, CgunwarpError
from .grid import UnwarpGrid2D

log = logging.getLogger("cgunwarp")

EXIT_OK, EXIT_IO, EXIT_ALGO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(path):
    """JSON or YAML mapping; YAML is chosen by extension."""
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    if "command" in data and isinstance(data.get("params"), dict):
        # a resolved-config snapshot: replay its parameters and seed
        return {**data["params"], "seed": data.get("seed", 0)}
    return data


def resolve(args, file_cfg, command, defaults):
    """defaults < config file (top level, then the subcommand's section) < flags."""
    out = dict(defaults)
    for src in (file_cfg, file_cfg.get(command, {}) if isinstance(file_cfg.get(command), dict) else {}):
        for k, v in src.items():
            if k in out:
                out[k] = v
    for k in out:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def write_snapshot(out_dir, command, seed, params):
    snap = {"command": command, "seed": seed, "version": __version__, "params": params}
    path = Path(out_dir) / f"{command}.resolved.json"
    path.write_text(json.dumps(snap, indent=2, sort_keys=True, default=_jsonable))
    return path


def _jsonable(o):
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    if isinstance(o, (Path,)):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def apply_thread_cap():
    n = os.environ.get("UNWARP_THREADS")
    if not n:
        return None
    try:
        n = int(n)
    except ValueError:
        raise UsageError(f"UNWARP_THREADS must be an integer, got {n!r}") from None
    if n < 1:
        raise UsageError("UNWARP_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits

    # the compiled kernels are serial; only BLAS/OpenMP pools need capping
    return threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

ORDER_DEFAULTS = {
    "image": None,
    "overrides": None,
    "dot_threshold": 0.6,
    "paper_threshold": 0.15,
    "min_area": 3,
    "max_area": 400,
}


def draw_overlay(image, grid, path):
    """Grid lines over the capture, with row/col labels every tenth node."""
    from PIL import Image, ImageDraw

    from .io import to_uint8

    base = np.asarray(image, dtype=np.float64)
    if base.ndim == 2:
        base = np.repeat(base[:, :, None], 3, axis=2)
    im = Image.fromarray(to_uint8(base))
    d = ImageDraw.Draw(im)
    px = grid.pixels
    rows, cols = grid.rows, grid.cols
    for i in range(rows):
        d.line([tuple(p) for p in px[i]], fill=(255, 64, 64), width=1)
    for j in range(cols):
        d.line([tuple(p) for p in px[:, j]], fill=(64, 160, 255), width=1)
    for i in range(rows):
        for j in range(cols):
            if i % 10 == 0 and j % 10 == 0 or (i, j) in ((rows - 1, 0), (0, cols - 1), (rows - 1, cols - 1)):
                x, y = px[i, j]
                d.ellipse([x - 2, y - 2, x + 2, y + 2], fill=(255, 255, 0))
                d.text((x + 3, y + 1), f"{i},{j}", fill=(255, 255, 0))
    im.save(path)


def cmd_order_grid(args, file_cfg):
    from .io import read_image, write_grid
    from .order import OrderParams, order_grid, read_overrides

    p = resolve(args, file_cfg, "order-grid", ORDER_DEFAULTS)
    if not p["image"]:
        raise UsageError("order-grid: an input image is required")
    out = _out_dir(args)
    write_snapshot(out, "order-grid", args.seed, p)
    image = read_image(p["image"])
    params = OrderParams(
        dot_threshold=p["dot_threshold"], paper_threshold=p["paper_threshold"], min_area=p["min_area"], max_area=p["max_area"]
    )
    overrides = read_overrides(p["overrides"]) if p["overrides"] else None
    grid = order_grid(image, params, overrides)
    stem = Path(p["image"]).stem
    write_grid(out / f"{stem}.grid.cgug", UnwarpGrid2D(grid.pixels))
    draw_overlay(image, grid, out / f"{stem}.overlay.png")
    log.info("ordered %dx%d grid -> %s", grid.rows, grid.cols, out)
    return EXIT_OK


SYNTH_DEFAULTS = {
    "n": None,
    "prior": "both",
    "width": 488,
    "height": 712,
    "texture_dir": None,
    "background_dir": None,
    "split": "train",
    "augment": False,
    "flip": False,
}


def cmd_synthesize(args, file_cfg):
    from .synth import SOURCE_DOC3D, SOURCE_UVDOC, AugmentConfig, augment, flip_sample, generate_standin, write_dataset

    p = resolve(args, file_cfg, "synthesize", SYNTH_DEFAULTS)
    if p["n"] is None or int(p["n"]) < 1:
        raise UsageError("synthesize: --n must be a positive integer")
    for key in ("texture_dir", "background_dir"):
        if p[key] and not Path(p[key]).is_dir():
            raise FileNotFoundError(f"{key}: directory not found: {p[key]}")
    priors = {"both": [SOURCE_DOC3D, SOURCE_UVDOC], "doc3d": [SOURCE_DOC3D], "uvdoc": [SOURCE_UVDOC]}
    if p["prior"] not in priors:
        raise UsageError(f"synthesize: unknown prior {p['prior']!r}")
    out = _out_dir(args)
    write_snapshot(out, "synthesize", args.seed, p)
    for k, prior in enumerate(priors[p["prior"]]):
        seed = int(np.random.SeedSequence([args.seed, k]).generate_state(1)[0])
        samples = generate_standin(int(p["n"]), seed, prior, p["width"], p["height"], p["texture_dir"], p["background_dir"])
        if p["augment"]:
            samples = [augment(s, AugmentConfig(), [seed, s.index, 1]) for s in samples]
        if p["flip"]:
            rng = np.random.default_rng([seed, 2])
            samples = [flip_sample(s, "horizontal") if rng.random() < 0.5 else s for s in samples]
        sub = "standin_doc3d" if prior == SOURCE_DOC3D else "uvdoc_style"
        write_dataset(samples, out / sub, p["split"])
        log.info("wrote %d %s samples", len(samples), prior)
    return EXIT_OK


TRAIN_DEFAULTS = {
    "doc3d": None,
    "uvdoc": None,
    "split": "train",
    "batch_size": 8,
    "lr": 1e-3,
    "const_epochs": 10,
    "decay_epochs": 5,
    "steps_per_epoch": None,
    "max_steps": None,
    "enable_w": True,
    "alternate": True,
    "model": {},
}


def cmd_train(args, file_cfg):
    from .nn.checkpoint import save_checkpoint
    from .nn.model import CGUNet, CGUNetConfig
    from .nn.train import GridDataset, TrainConfig, train, write_log

    p = resolve(args, file_cfg, "train", TRAIN_DEFAULTS)
    if args.no_3d_loss:
        p["enable_w"] = False
    model_cfg = dict(p["model"] or {})
    for key, flag in (("input_width", "width"), ("input_height", "height"), ("base_channels", "base_channels")):
        if getattr(args, flag, None) is not None:
            model_cfg[key] = getattr(args, flag)
    if args.tiny:
        mcfg = CGUNetConfig.tiny(**model_cfg)
    else:
        mcfg = CGUNetConfig(**model_cfg)
    p["model"] = mcfg.to_dict()
    roots = {"standin_doc3d": p["doc3d"], "uvdoc_style": p["uvdoc"]}
    roots = {k: v for k, v in roots.items() if v}
    if not roots:
        raise UsageError("train: at least one of --doc3d / --uvdoc is required")
    if p["alternate"] and len(roots) != 2:
        raise UsageError("train: alternation needs both --doc3d and --uvdoc (or set alternate: false)")
    for k, r in roots.items():
        if not Path(r).is_dir():
            raise FileNotFoundError(f"{k} dataset not found: {r}")
    out = _out_dir(args)
    write_snapshot(out, "train", args.seed, p)
    dsets = {k: GridDataset.from_dir(r, mcfg, p["split"]) for k, r in roots.items()}
    tcfg = TrainConfig(
        batch_size=int(p["batch_size"]),
        lr=float(p["lr"]),
        const_epochs=int(p["const_epochs"]),
        decay_epochs=int(p["decay_epochs"]),
        seed=args.seed,
        enable_w=bool(p["enable_w"]),
        alternate=bool(p["alternate"]),
        steps_per_epoch=p["steps_per_epoch"],
    )
    model = CGUNet(mcfg, seed=args.seed)
    rows = train(model, tcfg, dsets, max_steps=p["max_steps"])
    write_log(out / "train_log.csv", rows)
    save_checkpoint(out / "model.cguc", model, {"train": tcfg.to_dict()})
    if rows:
        log.info("trained %d steps, loss %.6g -> %.6g", len(rows), rows[0]["loss"], rows[-1]["loss"])
    return EXIT_OK


UNWARP_DEFAULTS = {"checkpoint": None, "image": None, "width": None, "height": None}


def cmd_unwarp(args, file_cfg):
    from .io import read_image, write_grid, write_image
    from .nn.checkpoint import load_checkpoint
    from .nn.model import infer_unwarp

    p = resolve(args, file_cfg, "unwarp", UNWARP_DEFAULTS)
    if not p["checkpoint"] or not p["image"]:
        raise UsageError("unwarp: --checkpoint and an input image are required")
    out = _out_dir(args)
    write_snapshot(out, "unwarp", args.seed, p)
    model, _ = load_checkpoint(p["checkpoint"])
    image = read_image(p["image"])
    flat, g, w = infer_unwarp(model, image, p["width"], p["height"])
    stem = Path(p["image"]).stem
    write_image(out / f"{stem}.unwarped.png", flat)
    write_grid(out / f"{stem}.G.cgug", g)
    write_grid(out / f"{stem}.W.cgug", w)
    return EXIT_OK


EVAL_DEFAULTS = {"manifest": None, "flow_backend": "internal", "flow_dir": None, "metrics": {}}


def cmd_eval(args, file_cfg):
    from .metrics import MetricsConfig, evaluate_manifest

    p = resolve(args, file_cfg, "eval", EVAL_DEFAULTS)
    if not p["manifest"]:
        raise UsageError("eval: --manifest is required")
    mc = MetricsConfig.from_dict({**(p["metrics"] or {}), "flow_backend": p["flow_backend"]})
    p["metrics"] = mc.to_dict()
    out = _out_dir(args)
    write_snapshot(out, "eval", args.seed, p)
    report = evaluate_manifest(p["manifest"], mc, p["flow_dir"])
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable))
    log.info("evaluated %d pairs (%d skipped)", len(report["rows"]), len(report["skipped"]))
    return EXIT_OK


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON or YAML config file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = _Parser(prog="cgunwarp", description="Grid-based document unwarping toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("order-grid", parents=[common], help="recover the ordered dot grid of a UV capture")
    s.add_argument("image", nargs="?")
    s.add_argument("--overrides", help="manual assignment file (idx row col per line)")
    s.add_argument("--dot-threshold", type=float)
    s.add_argument("--paper-threshold", type=float)
    s.add_argument("--min-area", type=int)
    s.add_argument("--max-area", type=int)
    s.set_defaults(func=cmd_order_grid)

    s = sub.add_parser("synthesize", parents=[common], help="generate training samples")
    s.add_argument("--n", type=int)
    s.add_argument("--prior", choices=["both", "doc3d", "uvdoc"])
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--texture-dir")
    s.add_argument("--background-dir")
    s.add_argument("--split")
    s.add_argument("--augment", action="store_true", default=None)
    s.add_argument("--flip", action="store_true", default=None)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("train", parents=[common], help="train the grid regressor")
    s.add_argument("--doc3d", help="root of the stand-in 3D-supervised dataset")
    s.add_argument("--uvdoc", help="root of the UV-style dataset")
    s.add_argument("--split")
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--const-epochs", type=int)
    s.add_argument("--decay-epochs", type=int)
    s.add_argument("--steps-per-epoch", type=int)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--no-3d-loss", action="store_true", help="drop the 3D grid term from the loss")
    s.add_argument("--tiny", action="store_true", help="use the reduced test-scale network")
    s.add_argument("--width", type=int, help="network input width")
    s.add_argument("--height", type=int, help="network input height")
    s.add_argument("--base-channels", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("unwarp", parents=[common], help="rectify an image with a trained model")
    s.add_argument("image", nargs="?")
    s.add_argument("--checkpoint")
    s.add_argument("--width", type=int, help="output width (default: input width)")
    s.add_argument("--height", type=int, help="output height (default: input height)")
    s.set_defaults(func=cmd_unwarp)

    s = sub.add_parser("eval", parents=[common], help="score rectified images against scans")
    s.add_argument("--manifest")
    s.add_argument("--flow-backend", choices=["internal", "file"])
    s.add_argument("--flow-dir")
    s.set_defaults(func=cmd_eval)
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    if not getattr(args, "command", None):
        build_parser().print_usage(sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        limiter = apply_thread_cap()
        file_cfg = load_config(args.config) if args.config else {}
        if "seed" in file_cfg and "--seed" not in (argv if argv is not None else sys.argv[1:]):
            args.seed = int(file_cfg["seed"])
        if "out" in file_cfg and "--out" not in (argv if argv is not None else sys.argv[1:]):
            args.out = file_cfg["out"]
        code = args.func(args, file_cfg)
        if limiter is not None:
            limiter.unregister()
        return code
    except AlgorithmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ALGO
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (OSError, CgunwarpError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
