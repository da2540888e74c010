"""Command-line interface.

Subcommands: generate, tile, warp, fit, bench, selftest, init-weights.
Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 numeric
failure (including selftest failures and memory-budget refusals).

Weights are optional everywhere: when --weights is absent, a deterministic
weight set is initialized from --seed, so every run is reproducible from its
flags alone.  --threads caps the renderer's internal parallelism; outputs are
byte-identical for any value.
"""

from __future__ import annotations

import argparse
import re
import sys
import time

import numpy as np

from . import bench as bench_mod
from . import persistence
from .biline import BilineFeature, compose
from .coords import COLUMN, ROW, Transform, grid_coords, make_coord_field
from .errors import FormatError, MemoryBudgetError, NumericError
from .fitter import FitConfig, fit_biline, gradient_check, svd_oracle_mse
from .generator import (
    GeneratorConfig,
    entries_to_weights,
    init_weights,
    synthesize,
    weights_to_entries,
)
from .renderer import (
    RenderRequest,
    latent_for,
    read_image,
    render,
    render_pixelwise,
    render_tiled,
    render_warped,
    write_image,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_resolution(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise UsageError(f"--res expects HxW, got {text!r}")
    height, width = int(m.group(1)), int(m.group(2))
    if height < 1 or width < 1:
        raise UsageError(f"resolution must be >= 1 per axis, got {text!r}")
    return height, width


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise UsageError(f"{flag} expects positive integers, got {text!r}")
    return values


def _load_config(args) -> GeneratorConfig:
    if getattr(args, "config", None):
        return persistence.load_config(args.config)
    return GeneratorConfig()


def _load_weights(args, config: GeneratorConfig):
    if getattr(args, "weights", None):
        entries = persistence.load_container(args.weights)
        try:
            return entries_to_weights(entries, config)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    return init_weights(config, seed=args.seed)


def _transform(args) -> Transform:
    try:
        return Transform(shift_row=args.shift_y, shift_col=args.shift_x, scale=args.scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_generate(args) -> int:
    config = _load_config(args)
    weights = _load_weights(args, config)
    height, width = _parse_resolution(args.res)
    request = RenderRequest(resolution=(height, width), seed=args.seed, transform=_transform(args))
    start = time.perf_counter()
    pixels = render(request, weights, config)
    elapsed = time.perf_counter() - start
    write_image(pixels, args.out)
    print(f"wrote {args.out} ({width}x{height}) in {elapsed:.3f}s")
    return 0


def cmd_tile(args) -> int:
    config = _load_config(args)
    weights = _load_weights(args, config)
    height, width = _parse_resolution(args.res)
    try:
        request = RenderRequest(
            resolution=(height, width),
            seed=args.seed,
            transform=_transform(args),
            tile_size=args.tile,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    start = time.perf_counter()
    pixels = render_tiled(request, weights, config, threads=args.threads)
    elapsed = time.perf_counter() - start
    write_image(pixels, args.out)
    tiles_r = -(-height // request.tile_size)
    tiles_c = -(-width // request.tile_size)
    print(f"wrote {args.out} ({width}x{height}, {tiles_r * tiles_c} tiles) in {elapsed:.3f}s")
    return 0


def cmd_warp(args) -> int:
    config = _load_config(args)
    weights = _load_weights(args, config)
    if args.mode == "rotate":
        if args.res is None:
            raise UsageError("--mode rotate needs --res")
        field = make_coord_field("rotation", _parse_resolution(args.res), angle=args.angle)
    elif args.mode == "elastic":
        if args.field is None:
            raise UsageError("--mode elastic needs --field (a displacement field file)")
        disp = persistence.read_coord_field(args.field)
        field = make_coord_field("elastic", displacements=(disp.rows, disp.cols))
    else:
        if args.field is None:
            raise UsageError("--mode custom needs --field")
        field = make_coord_field("custom", path=args.field)
    z = latent_for(RenderRequest(resolution=field.shape, seed=args.seed), config)
    start = time.perf_counter()
    pixels = render_warped(z, field, weights, config, threads=args.threads)
    elapsed = time.perf_counter() - start
    write_image(pixels, args.out)
    height, width = field.shape
    print(f"wrote {args.out} ({width}x{height}, warped) in {elapsed:.3f}s")
    return 0


def cmd_fit(args) -> int:
    image = read_image(args.image)
    try:
        config = FitConfig(
            thickness=args.thickness,
            iterations=args.iters,
            learning_rate=args.lr,
            optimizer=args.optimizer,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    start = time.perf_counter()
    result = fit_biline(image, config)
    elapsed = time.perf_counter() - start
    if args.out_embeddings:
        persistence.save_container(
            [("fit.row", result.embeddings.row_half), ("fit.col", result.embeddings.col_half)],
            args.out_embeddings,
        )
    if args.out_trace:
        persistence.write_trace(result.mse_trace, args.out_trace)
    oracle = float(
        np.mean([svd_oracle_mse(image[c], args.thickness) for c in range(image.shape[0])])
    )
    print(f"fitted {args.image} at thickness {args.thickness} in {elapsed:.1f}s")
    print(f"final mse:     {result.final_mse:.6e}")
    print(f"oracle mse:    {oracle:.6e} (best possible at this thickness)")
    print(f"storage ratio: {result.compression_ratio:.6f}")
    return 0


def cmd_bench(args) -> int:
    config = _load_config(args)
    resolutions = _parse_int_list(args.resolutions, "--resolutions")
    batches = _parse_int_list(args.batches, "--batches")
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for mode in modes:
        if mode not in ("biline", "dense"):
            raise UsageError(f"--modes entries must be biline or dense, got {mode!r}")
    try:
        rows = bench_mod.run_bench(
            config, resolutions, batches, repeats=args.repeats, modes=modes
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(bench_mod.format_table(rows))
    if args.json:
        persistence.write_bench_report(rows, args.json)
        print(f"wrote {args.json}")
    return 0


def cmd_init_weights(args) -> int:
    config = _load_config(args)
    weights = init_weights(config, seed=args.seed)
    persistence.save_container(weights_to_entries(weights), args.out)
    print(f"wrote {args.out} ({weights.num_parameters()} parameters, seed {args.seed})")
    return 0


def _selftest_checks():
    rng = np.random.default_rng(0)
    config = GeneratorConfig(
        latent_dim=16, style_dim=16, mapping_layers=2, num_blocks=3,
        hidden_channels=32, fourier_channels=8, thickness=4,
    )
    weights = init_weights(config, seed=0)
    z = rng.normal(size=config.latent_dim).astype(np.float32)

    def check_compose():
        b = BilineFeature(rng.normal(size=(2, 5, 3)), rng.normal(size=(2, 4, 3)))
        expected = np.zeros((2, 5, 4))
        for c in range(2):
            for i in range(5):
                for j in range(4):
                    for d in range(3):
                        expected[c, i, j] += b.row_half[c, i, d] * b.col_half[c, j, d]
        return np.max(np.abs(compose(b) - expected)) <= 1e-12

    def check_gradient():
        image = rng.random((6, 6))
        return gradient_check(image, thickness=2, seed=1) <= 1e-4

    def check_subset_purity():
        e_r = grid_coords(12, axis=ROW)
        e_c = grid_coords(12, axis=COLUMN)
        full = synthesize(z, e_r, e_c, weights, config)
        even = np.arange(0, 12, 2)
        sub = synthesize(z, e_r.take(even), e_c.take(even), weights, config)
        return np.array_equal(sub, full[:, ::2, ::2])

    def check_tiling():
        request = RenderRequest(resolution=(24, 24), seed=0, tile_size=8)
        mono = render(RenderRequest(resolution=(24, 24), seed=0), weights, config)
        tiled = render_tiled(request, weights, config)
        return np.array_equal(mono, tiled)

    def check_warp():
        field = make_coord_field("rotation", (6, 6), angle=0.3)
        a = render_warped(z, field, weights, config)
        b = render_pixelwise(z, field, weights, config)
        return np.array_equal(a, b)

    return [
        ("compose-bruteforce", check_compose),
        ("gradient-check", check_gradient),
        ("subset-purity", check_subset_purity),
        ("tiling-equality", check_tiling),
        ("warp-vs-pixelwise", check_warp),
    ]


def cmd_selftest(args) -> int:
    failures = 0
    for name, check in _selftest_checks():
        ok = check()
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return 3 if failures else 0


def _add_common(parser, *, with_out=True):
    parser.add_argument("--config", help="generator config JSON")
    parser.add_argument("--weights", help="weight container; initialized from --seed when absent")
    parser.add_argument("--seed", type=int, default=0, help="latent and weight-init seed")
    parser.add_argument("--threads", type=int, default=1, help="internal parallelism cap")
    if with_out:
        parser.add_argument("--out", required=True, help="output image path (.ppm or .png)")


def _add_view(parser):
    parser.add_argument("--res", required=True, help="output resolution HxW")
    parser.add_argument("--scale", type=float, default=1.0, help=">1 zooms out, <1 zooms in")
    parser.add_argument("--shift-x", type=float, default=0.0, help="column coordinate shift")
    parser.add_argument("--shift-y", type=float, default=0.0, help="row coordinate shift")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="creps", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render one image over a transformed grid")
    _add_common(p)
    _add_view(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("tile", help="render patch-by-patch; byte-identical to generate")
    _add_common(p)
    _add_view(p)
    p.add_argument("--tile", type=int, required=True, help="tile edge length")
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("warp", help="warped rendering via row-by-row diagonal sampling")
    _add_common(p)
    p.add_argument("--mode", required=True, choices=("rotate", "elastic", "custom"))
    p.add_argument("--angle", type=float, default=0.0, help="rotation angle in radians")
    p.add_argument("--field", help="coordinate/displacement field file")
    p.add_argument("--res", help="output resolution HxW (rotate mode)")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("fit", help="fit an image into the factored representation")
    p.add_argument("--image", required=True, help="input image (.ppm or .png)")
    p.add_argument("--thickness", type=int, default=8)
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--optimizer", choices=("adam", "gd"), default="adam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; fit is serial")
    p.add_argument("--out-embeddings", help="write fitted embeddings as a weight container")
    p.add_argument("--out-trace", help="write the per-iteration mse trace CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="activation accounting and wall-time table")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--resolutions", default="64,128", help="comma-separated square sizes")
    p.add_argument("--modes", default="biline,dense")
    p.add_argument("--batches", default="1")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--json", help="also write the machine-readable report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="run the built-in oracle suite")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("init-weights", help="write a deterministic weight container")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"creps: error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"creps: error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, MemoryBudgetError, FloatingPointError) as exc:
        print(f"creps: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
