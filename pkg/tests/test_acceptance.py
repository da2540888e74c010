"""Acceptance suite: one test per release criterion.

Each test prints a single pass/fail line (visible with ``pytest -s`` or in
the captured-output section on failure) and asserts the criterion at its
stated tolerance, including the wall-clock bound.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from creps import sample_image_path
from creps.bench import ActivationRecorder, count_activations, trunk_activations
from creps.biline import BilineFeature, compose
from creps.coords import COLUMN, ROW, CoordField, Transform, grid_coords, make_coord_field
from creps.errors import (
    BadMagicError,
    ConfigError,
    DuplicateNameError,
    LengthMismatchError,
    TruncatedFileError,
)
from creps.fitter import FitConfig, fit_biline, gradient_check, svd_oracle_mse
from creps.generator import GeneratorConfig, init_weights, synthesize
from creps.persistence import (
    ContainerEntry,
    config_from_dict,
    load_container,
    save_config,
    save_container,
)
from creps.renderer import RenderRequest, read_image, render, render_pixelwise, render_tiled, render_warped


class _Criterion:
    def __init__(self, number, name, budget_s):
        self.number = number
        self.name = name
        self.budget_s = budget_s
        self.start = time.perf_counter()

    def finish(self, ok, detail=""):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if ok and elapsed < self.budget_s else "FAIL"
        suffix = f" [{detail}]" if detail else ""
        print(f"[criterion {self.number:02d}] {self.name}: {status} "
              f"({elapsed:.2f}s / budget {self.budget_s:.0f}s){suffix}")
        assert ok, f"criterion {self.number} failed: {detail}"
        assert elapsed < self.budget_s, f"criterion {self.number} exceeded its time budget"


@pytest.fixture(scope="module")
def desk():
    config = GeneratorConfig()
    weights = init_weights(config, seed=0)
    latent = np.random.default_rng(0).normal(size=config.latent_dim).astype(np.float32)
    return config, weights, latent


def test_01_composition_matches_brute_force():
    crit = _Criterion(1, "composition vs quadruple-loop oracle", 1.0)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        channels = int(rng.integers(1, 5))
        size = int(rng.integers(1, 17))
        thickness = int(rng.integers(1, 9))
        feature = BilineFeature(
            rng.normal(size=(channels, size, thickness)),
            rng.normal(size=(channels, size, thickness)),
        )
        got = compose(feature)
        row, col = feature.row_half, feature.col_half
        for c in range(channels):
            for i in range(size):
                for j in range(size):
                    acc = 0.0
                    for d in range(thickness):
                        acc += row[c, i, d] * col[c, j, d]
                    diff = abs(got[c, i, j] - acc)
                    if diff > worst:
                        worst = diff
    crit.finish(worst <= 1e-12, f"max abs diff {worst:.2e}")


def test_02_composed_rank_is_bounded_by_thickness():
    crit = _Criterion(2, "rank bound via singular values", 1.0)
    rng = np.random.default_rng(1)
    ok = True
    detail = []
    for thickness in (1, 2, 4, 8):
        feature = BilineFeature(
            rng.normal(size=(1, 16, thickness)), rng.normal(size=(1, 16, thickness))
        )
        sv = np.linalg.svd(compose(feature)[0], compute_uv=False)
        ratio = sv[thickness] / sv[0]
        detail.append(f"D={thickness}: {ratio:.1e}")
        ok = ok and ratio <= 1e-10
    crit.finish(ok, ", ".join(detail))


def test_03_fit_reaches_truncated_svd_optimum():
    crit = _Criterion(3, "fit within 1.05x of the rank-4 optimum", 10.0)
    rng = np.random.default_rng(0)
    image = rng.random((1, 16, 16))
    result = fit_biline(image, FitConfig(thickness=4, iterations=5000))
    oracle = svd_oracle_mse(image[0], 4)
    ratio = result.final_mse / oracle
    crit.finish(result.final_mse <= 1.05 * oracle, f"fit/oracle = {ratio:.4f}")


def test_04_thickness_trend_on_natural_image():
    crit = _Criterion(4, "natural-image error vs thickness trend", 120.0)
    image = read_image(sample_image_path())
    assert image.shape == (3, 128, 128)
    fitted = {
        d: fit_biline(image, FitConfig(thickness=d, iterations=5000)).final_mse
        for d in (1, 8, 32)
    }
    ratio = fitted[1] / fitted[8]
    ok = ratio >= 3.0 and fitted[8] > fitted[32]
    crit.finish(ok, f"mse(1)/mse(8) = {ratio:.2f}, mse(8) = {fitted[8]:.2e} > mse(32) = {fitted[32]:.2e}")


def test_05_analytic_gradient_matches_finite_differences():
    crit = _Criterion(5, "gradient check on 8x8", 1.0)
    rng = np.random.default_rng(0)
    err = gradient_check(rng.random((8, 8)), thickness=2, seed=0, step=1e-5)
    crit.finish(err <= 1e-4, f"max relative error {err:.2e}")


def test_06_pixel_purity_across_resolutions(desk):
    crit = _Criterion(6, "scale consistency via even-index subset", 5.0)
    config, weights, latent = desk
    e_r = grid_coords(32, axis=ROW)
    e_c = grid_coords(32, axis=COLUMN)
    full = synthesize(latent, e_r, e_c, weights, config)
    even = np.arange(0, 32, 2)
    sub = synthesize(latent, e_r.take(even), e_c.take(even), weights, config)
    diff = float(np.max(np.abs(sub - full[:, ::2, ::2])))
    crit.finish(diff <= 1e-5, f"max abs diff {diff:.1e}")


def test_07_tiled_rendering_is_byte_identical(desk, tmp_path):
    crit = _Criterion(7, "64x64 monolithic vs 16x16 tiles", 10.0)
    config, weights, _ = desk
    mono_path = tmp_path / "mono.ppm"
    tiled_path = tmp_path / "tiled.ppm"
    from creps.renderer import write_image

    write_image(render(RenderRequest(resolution=(64, 64), seed=0), weights, config), mono_path)
    write_image(
        render_tiled(RenderRequest(resolution=(64, 64), seed=0, tile_size=16), weights, config),
        tiled_path,
    )
    same = mono_path.read_bytes() == tiled_path.read_bytes()
    crit.finish(same, "files identical" if same else "files differ")


def test_08_warped_rendering_matches_pixelwise_oracle(desk):
    crit = _Criterion(8, "diagonal sampling vs per-pixel oracle", 120.0)
    config, weights, latent = desk
    rng = np.random.default_rng(5)
    fields = {
        "rotation": make_coord_field("rotation", (16, 16), angle=0.35),
        "random": CoordField(rng.uniform(-1, 1, (16, 16)), rng.uniform(-1, 1, (16, 16))),
    }
    ok = True
    for name, field in fields.items():
        warped = render_warped(latent, field, weights, config)
        reference = render_pixelwise(latent, field, weights, config)
        ok = ok and np.array_equal(warped, reference)
    crit.finish(ok, "byte-identical on rotation and random fields" if ok else "mismatch")


def test_09_translation_crop_equivalence(desk):
    crit = _Criterion(9, "shifted render vs coordinate-subset crop", 5.0)
    config, weights, latent = desk
    shift = Transform(shift_row=1 / 32, shift_col=1 / 32)
    shifted = synthesize(
        latent,
        grid_coords(16, shift, ROW),
        grid_coords(16, shift, COLUMN),
        weights,
        config,
    )
    big = synthesize(
        latent, grid_coords(32, axis=ROW), grid_coords(32, axis=COLUMN), weights, config
    )
    diff = float(np.max(np.abs(shifted - big[:, 1::2, 1::2])))
    crit.finish(diff <= 1e-5, f"max abs diff {diff:.1e}")


def test_10_memory_scaling_structure(desk):
    crit = _Criterion(10, "activation accounting and scaling laws", 30.0)
    config, weights, latent = desk
    checks = []

    dense = trunk_activations(config, "dense", 256, 256)
    factored = trunk_activations(config, "biline", 256, 256)
    checks.append(dense / factored == 256 / (2 * config.thickness))

    checks.append(
        trunk_activations(config, "biline", 256, 256)
        == 2 * trunk_activations(config, "biline", 128, 128)
    )
    checks.append(
        trunk_activations(config, "dense", 256, 256)
        == 4 * trunk_activations(config, "dense", 128, 128)
    )

    recorder = ActivationRecorder()
    synthesize(
        latent,
        grid_coords(256, axis=ROW),
        grid_coords(256, axis=COLUMN),
        weights,
        config,
        recorder=recorder,
    )
    analytic = count_activations(config, "biline", 256, 256)
    deviation = abs(recorder.total - analytic) / analytic
    checks.append(deviation <= 0.10)
    crit.finish(
        all(checks),
        f"dense/factored trunk = {dense / factored:.0f}, instrumented deviation {deviation:.2%}",
    )


def _cli(*argv):
    proc = subprocess.run(
        [sys.executable, "-m", "creps", *argv], capture_output=True, text=True, timeout=300
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def test_11_cli_determinism_across_runs_and_threads(tmp_path):
    crit = _Criterion(11, "byte-identical CLI outputs", 60.0)
    cfg = GeneratorConfig(
        latent_dim=16, style_dim=16, mapping_layers=2, num_blocks=2,
        hidden_channels=24, fourier_channels=8, thickness=4,
    )
    cfg_path = tmp_path / "cfg.json"
    save_config(cfg, cfg_path)
    rng = np.random.default_rng(0)
    from creps.persistence import write_ppm

    fit_image = tmp_path / "fit_input.ppm"
    write_ppm(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8), fit_image)

    outputs = {}
    for threads in ("1", "4"):
        for attempt in ("first", "second"):
            tag = f"{threads}.{attempt}"
            gen = tmp_path / f"gen.{tag}.ppm"
            tile = tmp_path / f"tile.{tag}.ppm"
            warp = tmp_path / f"warp.{tag}.ppm"
            emb = tmp_path / f"emb.{tag}.weights"
            trace = tmp_path / f"trace.{tag}.csv"
            common = ("--config", str(cfg_path), "--seed", "7", "--threads", threads)
            _cli("generate", *common, "--res", "24x24", "--out", str(gen))
            _cli("tile", *common, "--res", "24x24", "--tile", "8", "--out", str(tile))
            _cli("warp", *common, "--mode", "rotate", "--angle", "0.4",
                 "--res", "12x12", "--out", str(warp))
            _cli("fit", "--image", str(fit_image), "--thickness", "2", "--iters", "60",
                 "--seed", "7", "--threads", threads,
                 "--out-embeddings", str(emb), "--out-trace", str(trace))
            outputs[tag] = tuple(
                p.read_bytes() for p in (gen, tile, warp, emb, trace)
            )
    baseline = outputs["1.first"]
    ok = all(blob == baseline for blob in outputs.values())
    crit.finish(ok, "generate/tile/warp/fit stable across runs and thread counts")


def test_12_format_robustness(tmp_path):
    crit = _Criterion(12, "round trips and typed format errors", 1.0)
    rng = np.random.default_rng(0)
    entries = [("a", rng.normal(size=(2, 3)).astype(np.float32)),
               ("b", rng.normal(size=5).astype(np.float32))]
    first = tmp_path / "w1.bin"
    second = tmp_path / "w2.bin"
    save_container(entries, first)
    save_container(load_container(first), second)
    checks = [first.read_bytes() == second.read_bytes()]

    bad_magic = tmp_path / "magic.bin"
    blob = bytearray(first.read_bytes())
    blob[:8] = b"CREPSW99"
    bad_magic.write_bytes(bytes(blob))
    checks.append(_raises(lambda: load_container(bad_magic), BadMagicError))

    cut = tmp_path / "cut.bin"
    cut.write_bytes(first.read_bytes()[:-3])
    checks.append(_raises(lambda: load_container(cut), TruncatedFileError))

    checks.append(
        _raises(lambda: save_container(entries + [("a", np.zeros(1, np.float32))],
                                       tmp_path / "dup.bin"), DuplicateNameError)
    )
    checks.append(
        _raises(lambda: save_container(
            [ContainerEntry("x", (2, 3), np.zeros(5, np.float32))], tmp_path / "len.bin"),
            LengthMismatchError)
    )
    checks.append(_raises(lambda: config_from_dict({"thickness": 0}), ConfigError))
    checks.append(_raises(lambda: config_from_dict({"postnet": 1}), ConfigError))
    crit.finish(all(checks), f"{sum(checks)}/{len(checks)} format checks")


def _raises(fn, exc_type):
    try:
        fn()
    except exc_type:
        return True
    except Exception:
        return False
    return False
