"""``pixshuf`` command line: stylize, mi, gradcheck, eval.

Machine-readable output is a single JSON document on stdout; diagnostics go to
stderr. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import replace

from threadpoolctl import threadpool_limits

from .errors import PixshufError
from .gradcheck import run_gradcheck
from .image import load_image, resize_bilinear, save_image, to_luma
from .metrics import color_hist_chi2, ssim_luma
from .mi import HistogramConfig, entropy, joint_histogram, mutual_information
from .optimizer import LevelSchedule
from .stylize import StylizeConfig, stylize
from .warp import load_field, save_field

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("pixshuf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _iters(text: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid iteration list {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError(f"invalid iteration list {text!r}")
    return vals


def _positive_int(text: str):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pixshuf", description="Mutual-information pixel-shuffle style transfer.")
    sub = p.add_subparsers(dest="command", metavar="{stylize,mi,gradcheck,eval}")
    sub.required = True

    s = sub.add_parser("stylize", help="warp a style image onto a content image's structure")
    s.add_argument("--content", required=True, metavar="PATH")
    s.add_argument("--style", required=True, metavar="PATH")
    s.add_argument("--out", required=True, metavar="PATH")
    s.add_argument("--bins", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--levels", type=_positive_int)
    s.add_argument("--iters", type=_iters, metavar="N[,N,...]", help="per-level budgets, coarsest first")
    s.add_argument("--lr", type=float)
    s.add_argument("--lambda-smooth", type=float, dest="lambda_smooth")
    s.add_argument("--sampling", choices=["bilinear", "nearest"])
    s.add_argument("--mi-channels", choices=["luma", "sum"], dest="mi_channels")
    s.add_argument("--seed", type=int)
    s.add_argument("--trace", metavar="PATH", help="write per-iteration CSV trace")
    s.add_argument("--dump-field", metavar="PATH", dest="dump_field")
    s.add_argument("--load-field", metavar="PATH", dest="load_field", help="initial field (PSF1)")
    s.add_argument("--config", metavar="PATH", help="JSON file mirroring StylizeConfig")
    s.add_argument("--plot", metavar="PATH", help="render a content/style/output/convergence figure")
    s.add_argument("--threads", type=_positive_int)

    m = sub.add_parser("mi", help="mutual information between two images (luma)")
    m.add_argument("a", metavar="A")
    m.add_argument("b", metavar="B")
    m.add_argument("--bins", type=int, default=HistogramConfig.bins)
    m.add_argument("--sigma", type=float, default=HistogramConfig.bandwidth)
    m.add_argument("--threads", type=_positive_int)

    g = sub.add_parser("gradcheck", help="finite-difference checks of every analytic gradient")
    g.add_argument("--size", type=_positive_int, default=16)
    g.add_argument("--bins", type=int, help="single bin count (default: 8, 16 and 32)")
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--pairs", type=_positive_int, default=20)
    g.add_argument("--threads", type=_positive_int)

    e = sub.add_parser("eval", help="proxy content/style metrics for a stylized output")
    e.add_argument("--content", required=True, metavar="PATH")
    e.add_argument("--style", required=True, metavar="PATH")
    e.add_argument("--output", required=True, metavar="PATH")
    e.add_argument("--threads", type=_positive_int)
    return p


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _configure_logging() -> None:
    level = os.environ.get("PIXSHUF_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("pixshuf %(levelname)s: %(message)s"))
    root = logging.getLogger("pixshuf")
    root.handlers[:] = [handler]
    root.setLevel(levels.get(level, logging.ERROR))
    root.propagate = False


def _load_config(path) -> StylizeConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise PixshufError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise PixshufError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise PixshufError(f"config {path} must hold a JSON object")
    try:
        return StylizeConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise PixshufError(f"invalid config {path}: {exc}") from exc


def config_from_args(args) -> StylizeConfig:
    """Config file first, then flags on top."""
    cfg = _load_config(args.config) if args.config else StylizeConfig()
    try:
        hist_kw = {}
        if args.bins is not None:
            hist_kw["bins"] = args.bins
        if args.sigma is not None:
            hist_kw["bandwidth"] = args.sigma
        hist = replace(cfg.hist, **hist_kw) if hist_kw else cfg.hist

        sched = cfg.sched
        levels = args.levels if args.levels is not None else sched.levels
        if args.iters is not None:
            iters = args.iters * levels if len(args.iters) == 1 else args.iters
            if len(iters) != levels:
                raise UsageError(f"--iters lists {len(iters)} budgets for {levels} levels")
        elif levels != sched.levels:
            iters = [sched.iters_per_level[-1]] * levels
        else:
            iters = list(sched.iters_per_level)
        sched_kw = {"levels": levels, "iters_per_level": tuple(iters)}
        if args.lr is not None:
            sched_kw["lr"] = args.lr
        if args.lambda_smooth is not None:
            sched_kw["smooth_weight"] = args.lambda_smooth
        sched = replace(sched, **sched_kw)

        top = {"hist": hist, "sched": sched}
        if args.sampling is not None:
            top["final_sampling"] = args.sampling
        if args.mi_channels is not None:
            top["mi_channels"] = args.mi_channels
        if args.seed is not None:
            top["seed"] = args.seed
        return replace(cfg, **top)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def write_trace(path, traces) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "iteration", "objective", "mi_nats", "smooth_penalty"])
            for lvl, trace in enumerate(traces):
                for t in trace:
                    w.writerow([lvl, t.iteration, repr(t.objective), repr(t.mi), repr(t.smooth)])
    except OSError as exc:
        raise PixshufError(f"cannot write trace {path}: {exc.strerror or exc}") from exc


def cmd_stylize(args) -> int:
    cfg = config_from_args(args)
    content = load_image(args.content)
    style = load_image(args.style)
    init = load_field(args.load_field) if args.load_field else None
    log.info("stylize %s <- %s, %d levels", args.content, args.style, cfg.sched.levels)
    result = stylize(content, style, cfg, init_field=init)
    save_image(result.output, args.out)
    if args.trace:
        write_trace(args.trace, result.pyramid.traces)
    if args.dump_field:
        save_field(result.field, args.dump_field)
    if args.plot:
        from .plotting import save_stylize_figure

        try:
            save_stylize_figure(args.plot, content, style, result.output, result.pyramid.traces,
                                result.pyramid.level_sizes)
        except (OSError, ValueError) as exc:
            raise PixshufError(f"cannot write figure {args.plot}: {exc}") from exc
    _emit(json.loads(result.report.to_json()))
    return EXIT_OK


def cmd_mi(args) -> int:
    try:
        cfg = HistogramConfig(bins=args.bins, bandwidth=args.sigma)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    a = to_luma(load_image(args.a))
    b = to_luma(load_image(args.b))
    if (b.width, b.height) != (a.width, a.height):
        log.info("resizing %s to %dx%d", args.b, a.width, a.height)
        b = resize_bilinear(b, a.width, a.height)
    h = joint_histogram(a, b, cfg)
    _emit({"mi_nats": mutual_information(h), "h_a": entropy(h.p_a), "h_b": entropy(h.p_b)})
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.bins is not None and args.bins < 2:
        raise UsageError("--bins must be >= 2")
    if not args.sigma > 0:
        raise UsageError("--sigma must be > 0")
    bins = None if args.bins is None else (args.bins,)
    res = run_gradcheck(size=args.size, bins=bins, sigma=args.sigma, seed=args.seed, pairs=args.pairs)
    _emit(res)
    if not res["passed"]:
        print("pixshuf: gradcheck failed: an error exceeds its threshold", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_eval(args) -> int:
    content = load_image(args.content)
    style = load_image(args.style)
    output = load_image(args.output)
    if (output.width, output.height) != (content.width, content.height):
        raise PixshufError(
            f"output is {output.width}x{output.height} but content is {content.width}x{content.height}"
        )
    resized = resize_bilinear(style, content.width, content.height)
    _emit(
        {
            "content_ssim": ssim_luma(output, content),
            "style_hist_chi2": color_hist_chi2(output, style),
            "baseline_ssim": ssim_luma(resized, content),
            "baseline_chi2": color_hist_chi2(content, style),
        }
    )
    return EXIT_OK


COMMANDS = {"stylize": cmd_stylize, "mi": cmd_mi, "gradcheck": cmd_gradcheck, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging()
    limit = threadpool_limits(limits=args.threads) if args.threads else nullcontext()
    try:
        with limit:
            return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pixshuf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PixshufError, OSError) as exc:
        print(f"pixshuf: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
