"""Command-line driver: inference, analysis, benchmarking, evaluation.

Commands: infer, params, flops, rf, bench, eval, selftest. Every command
exits 0 on success and nonzero with a one-line diagnostic on failure. The
DAB_THREADS environment variable caps the thread count of the underlying
BLAS pools (0 or unset leaves the library default).
"""
from __future__ import annotations

import argparse
import os
import sys

from .analysis import benchmark, count_macs, count_params, receptive_field
from .errors import DabNetError, DataError
from .metrics import ConfusionMatrix, accumulate, iou_per_class, mean_iou
from .model_io import load_image_ppm, load_labels_pgm, load_weights, preprocess, \
    save_labels_pgm, save_tensor, save_weights
from .net import NetworkSpec, dabnet_forward, init_random_weights, predict_labels
from .selftest import run_all


# ===========================================================================
# argument plumbing
# ===========================================================================

def _size(text: str):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _int_list(text: str):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated ints, got {text!r}") from None


def _float_list(text: str):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated floats, got {text!r}") from None


def _read_config(path):
    """key=value network config: classes, block1, block2."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "classes":
                out["num_classes"] = int(value)
            elif key in ("block1", "block2"):
                out[key] = _int_list(value)
            else:
                raise DataError(f"{path}:{lineno}: unknown config key '{key}'")
    return out


def _net_spec(args) -> NetworkSpec:
    """Config file first, explicit flags override."""
    kw = {}
    if getattr(args, "config", None):
        kw = _read_config(args.config)
    if getattr(args, "classes", None) is not None:
        kw["num_classes"] = args.classes
    if getattr(args, "block1", None) is not None:
        kw["block1"] = args.block1
    if getattr(args, "block2", None) is not None:
        kw["block2"] = args.block2
    return NetworkSpec(**kw)


def _weights_for(args, spec: NetworkSpec):
    if getattr(args, "weights", None):
        return load_weights(args.weights, spec)
    return init_random_weights(spec, seed=args.seed)


def _print_table(headers, rows, as_csv: bool):
    if as_csv:
        print(",".join(headers))
        for row in rows:
            print(",".join(str(v) for v in row))
        return
    rows = [[str(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    print("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for row in rows:
        cells = [row[0].ljust(widths[0])]
        cells += [row[i].rjust(widths[i]) for i in range(1, len(row))]
        print("  ".join(cells).rstrip())


# ===========================================================================
# commands
# ===========================================================================

def _cmd_params(args) -> int:
    spec = _net_spec(args)
    reports, total = count_params(spec)
    rows = [(r.name, f"{r.out_channels}x{r.out_h}x{r.out_w}", r.params)
            for r in reports]
    _print_table(("layer", "output", "params"), rows, args.csv)
    print(f"total parameters: {total} ({total / 1e6:.3f} M)")
    return 0


def _cmd_flops(args) -> int:
    spec = _net_spec(args)
    h, w = args.size
    reports, total = count_macs(spec, (h, w))
    rows = [(r.name, f"{r.out_channels}x{r.out_h}x{r.out_w}", r.macs)
            for r in reports]
    _print_table(("layer", "output", "macs"), rows, args.csv)
    print(f"total MACs at {h}x{w}: {total} ({total / 1e9:.3f} G)")
    return 0


def _cmd_rf(args) -> int:
    spec = _net_spec(args)
    rows = receptive_field(spec)
    _print_table(("layer", "rf", "jump"), rows, args.csv)
    return 0


def _cmd_bench(args) -> int:
    spec = _net_spec(args)
    weights = _weights_for(args, spec)
    rep = benchmark(spec, weights, args.size, warmup=args.warmup, iters=args.iters)
    h, w = rep.resolution
    if args.csv:
        print("resolution,warmup,iters,mean_ms,fps,checksum")
        print(f"{h}x{w},{rep.warmup},{rep.iters},{rep.mean_ms:.3f},"
              f"{rep.fps:.3f},{rep.checksum}")
    else:
        print(f"resolution {h}x{w}  warmup {rep.warmup}  iters {rep.iters}  "
              f"mean {rep.mean_ms:.3f} ms  fps {rep.fps:.3f}")
        print(f"logits sha256 {rep.checksum}")
    return 0


def _cmd_infer(args) -> int:
    spec = _net_spec(args)
    weights = _weights_for(args, spec)
    image = preprocess(load_image_ppm(args.input), args.mean)
    logits = dabnet_forward(image, spec, weights)
    labels = predict_labels(logits)
    print(f"logits {logits.dims[1]}x{logits.dims[2]}x{logits.dims[3]} "
          f"from {args.input}")
    if args.output:
        save_labels_pgm(labels, args.output)
        print(f"labels written to {args.output}")
    if args.logits:
        save_tensor(logits, args.logits)
        print(f"logits written to {args.logits}")
    return 0


def _cmd_eval(args) -> int:
    def pgms(d):
        return {f for f in os.listdir(d) if f.endswith(".pgm")}

    preds, gts = pgms(args.pred_dir), pgms(args.gt_dir)
    if preds != gts:
        odd = sorted(preds ^ gts)[:5]
        raise DataError(f"prediction/ground-truth sets differ, e.g. {odd}")
    if not preds:
        raise DataError("no .pgm files to evaluate")
    cm = ConfusionMatrix(args.classes if args.classes is not None else 19)
    for name in sorted(preds):
        pred = load_labels_pgm(os.path.join(args.pred_dir, name))
        gt = load_labels_pgm(os.path.join(args.gt_dir, name))
        accumulate(cm, gt, pred, ignore=args.ignore)
    ious = iou_per_class(cm)
    rows = [(f"class {c}", "absent" if v is None else f"{100.0 * v:.1f}")
            for c, v in enumerate(ious)]
    _print_table(("class", "iou"), rows, args.csv)
    print(f"mIoU {100.0 * mean_iou(cm):.1f}")
    return 0


def _cmd_selftest(args) -> int:
    results = run_all()
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.name:32s}  {r.detail}")
    passed = sum(r.passed for r in results)
    print(f"selftest: {passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


# ===========================================================================
# parser
# ===========================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dabnet",
        description="CPU inference engine and analysis toolkit for the DABNet "
                    "semantic segmentation architecture")
    sub = parser.add_subparsers(dest="command", required=True)

    arch = argparse.ArgumentParser(add_help=False)
    arch.add_argument("--classes", type=int, default=None,
                      help="class count (default 19)")
    arch.add_argument("--block1", type=_int_list, default=None,
                      help="block 1 dilations, e.g. 2,2,2")
    arch.add_argument("--block2", type=_int_list, default=None,
                      help="block 2 dilations, e.g. 4,4,8,8,16,16")
    arch.add_argument("--config", default=None,
                      help="key=value network config file")
    arch.add_argument("--csv", action="store_true", help="emit CSV")

    weighted = argparse.ArgumentParser(add_help=False)
    weighted.add_argument("--weights", default=None, help="weight file (.dabw)")
    weighted.add_argument("--seed", type=int, default=0,
                          help="seed for random weights when none are given")

    p = sub.add_parser("params", parents=[arch],
                       help="per-layer and total parameter counts")
    p.set_defaults(func=_cmd_params)

    p = sub.add_parser("flops", parents=[arch],
                       help="per-layer and total MAC counts")
    p.add_argument("--size", type=_size, default=(512, 1024),
                   help="input size HxW (default 512x1024)")
    p.set_defaults(func=_cmd_flops)

    p = sub.add_parser("rf", parents=[arch],
                       help="receptive field and jump after every layer")
    p.set_defaults(func=_cmd_rf)

    p = sub.add_parser("bench", parents=[arch, weighted],
                       help="time repeated forward passes")
    p.add_argument("--size", type=_size, default=(512, 1024))
    p.add_argument("--iters", type=int, default=100, help="timed iterations")
    p.add_argument("--warmup", type=int, default=10, help="untimed iterations")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("infer", parents=[arch, weighted],
                       help="run one image through the network")
    p.add_argument("--input", required=True, help="input image (.ppm)")
    p.add_argument("--output", default=None, help="label map to write (.pgm)")
    p.add_argument("--logits", default=None, help="raw logits to write (.tns)")
    p.add_argument("--mean", type=_float_list, default=(0.0, 0.0, 0.0),
                   help="per-channel means to subtract, r,g,b in [0,1]")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", parents=[arch],
                       help="mean IoU of predictions against ground truth")
    p.add_argument("pred_dir", help="directory of predicted .pgm label maps")
    p.add_argument("gt_dir", help="directory of ground-truth .pgm label maps")
    p.add_argument("--ignore", type=int, default=255, help="ignore label")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("selftest",
                       help="oracle differentials and invariant checks")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("DAB_THREADS", "0")
    try:
        if threads not in ("", "0"):
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=int(threads)):
                return args.func(args)
        return args.func(args)
    except (DabNetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
