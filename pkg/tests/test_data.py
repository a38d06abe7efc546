import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from lfdense.core import ShapeError
from lfdense.data import (
    DataError,
    LightField,
    assemble_dense,
    chroma_angular_upsample,
    decode_sai_grid,
    encode_sai_grid,
    extract_sparse,
    load_view_directory,
    make_pattern,
    pattern_for,
    prepare_eval_views,
    quantize,
    required_texture_size,
    rgb_to_ycbcr,
    save_view_directory,
    shave_borders,
    synth_lf,
    ycbcr_to_rgb,
)
from lfdense.train import augment_array


def write_scene(path, rows, cols, height, width, seed=0):
    rng = np.random.default_rng(seed)
    path.mkdir()
    (path / "meta.txt").write_text(f"rows={rows}\ncols={cols}\nwidth={width}\nheight={height}\ncolorspace=rgb\n")
    pixels = {}
    for r in range(rows):
        for c in range(cols):
            img = rng.integers(0, 256, (height, width, 3), dtype=np.uint8)
            Image.fromarray(img).save(path / f"view_r{r}_c{c}.png")
            pixels[r, c] = img
    return pixels


class TestViewDirectory:
    def test_shape_and_scaling(self, tmp_path):
        pixels = write_scene(tmp_path / "s", 8, 8, 64, 48)
        lf = load_view_directory(tmp_path / "s")
        assert lf.shape == (8, 8, 64, 48, 3)
        assert lf.data[3, 5, 10, 20, 1] == pixels[3, 5][10, 20, 1] / 255.0
        assert 0.0 <= lf.data.min() and lf.data.max() <= 1.0

    def test_missing_view_named(self, tmp_path):
        write_scene(tmp_path / "s", 2, 3, 4, 4)
        (tmp_path / "s" / "view_r1_c2.png").unlink()
        with pytest.raises(DataError, match=r"row=1, col=2"):
            load_view_directory(tmp_path / "s")

    def test_missing_meta(self, tmp_path):
        (tmp_path / "s").mkdir()
        with pytest.raises(DataError):
            load_view_directory(tmp_path / "s")

    def test_save_load_round_trip(self, tmp_path):
        write_scene(tmp_path / "s", 2, 2, 5, 7)
        lf = load_view_directory(tmp_path / "s")
        save_view_directory(lf, tmp_path / "t")
        assert np.array_equal(load_view_directory(tmp_path / "t").data, lf.data)

    def test_grayscale_round_trip(self, tmp_path):
        data = quantize(np.random.default_rng(1).random((2, 2, 4, 6, 1))) / 255.0
        save_view_directory(LightField(data, "y_only"), tmp_path / "g")
        with Image.open(tmp_path / "g" / "view_r0_c0.png") as im:
            assert im.mode == "L"
        back = load_view_directory(tmp_path / "g")
        assert back.colorspace == "y_only" and np.array_equal(back.data, data)

    def test_quantize_rounds_half_up(self):
        assert quantize(np.array([0.0, 0.5 / 255, 1.0, 1.7, -0.2])).tolist() == [0, 1, 255, 255, 0]


class TestSaiGrid:
    def test_tiled_quadrants(self):
        img = np.arange(16).reshape(4, 4)
        lf = decode_sai_grid(img, 2, 2, "tiled")
        assert lf.shape == (2, 2, 2, 2, 1)
        assert np.array_equal(lf.data[0, 1, ..., 0], img[:2, 2:])
        assert np.array_equal(lf.data[1, 0, ..., 0], img[2:, :2])

    def test_interleaved_strides(self):
        img = np.arange(16).reshape(4, 4)
        lf = decode_sai_grid(img, 2, 2, "interleaved")
        for r in range(2):
            for c in range(2):
                assert np.array_equal(lf.data[r, c, ..., 0], img[r::2, c::2])

    @pytest.mark.parametrize("layout", ["tiled", "interleaved"])
    def test_round_trip(self, layout):
        lf = LightField(np.random.default_rng(2).random((3, 2, 4, 5, 3)))
        back = decode_sai_grid(encode_sai_grid(lf, layout), 3, 2, layout)
        assert np.array_equal(back.data, lf.data)

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            decode_sai_grid(np.zeros((5, 4)), 2, 2)


class TestColor:
    def test_gray_axis(self):
        ycc = rgb_to_ycbcr(LightField(np.full((1, 1, 1, 1, 3), 0.5))).data.ravel()
        np.testing.assert_allclose(ycc, [0.5, 0.5, 0.5], atol=1e-12)

    def test_pure_red(self):
        ycc = rgb_to_ycbcr(LightField(np.array([1.0, 0, 0]).reshape(1, 1, 1, 1, 3))).data.ravel()
        np.testing.assert_allclose(ycc, [0.299, 0.5 - 0.168736, 1.0], atol=1e-12)
        assert abs(ycc[1] - 0.331264) < 1e-12

    def test_round_trip(self):
        lf = LightField(np.random.default_rng(3).random((2, 2, 8, 8, 3)))
        assert np.max(np.abs(ycbcr_to_rgb(rgb_to_ycbcr(lf)).data - lf.data)) < 1e-6


class TestEvalCrops:
    def test_lytro_protocol(self):
        raw = LightField(np.broadcast_to(np.float32(0.5), (14, 14, 376, 541, 3)))
        out = shave_borders(prepare_eval_views(raw))
        assert out.shape == (8, 8, 332, 497, 3)

    def test_central_indices(self):
        data = np.arange(14 * 14, dtype=float).reshape(14, 14, 1, 1, 1)
        crop = prepare_eval_views(LightField(data, "y_only"))
        assert crop.data[0, 0, 0, 0, 0] == data[3, 3, 0, 0, 0]
        assert crop.data[-1, -1, 0, 0, 0] == data[10, 10, 0, 0, 0]

    def test_minimal_shave(self):
        out = shave_borders(LightField(np.zeros((1, 1, 45, 45, 1)), "y_only"))
        assert out.shape[2:4] == (1, 1)
        with pytest.raises(ShapeError):
            shave_borders(LightField(np.zeros((1, 1, 44, 45, 1)), "y_only"))

    def test_small_grid(self):
        with pytest.raises(ShapeError):
            prepare_eval_views(LightField(np.zeros((7, 9, 2, 2, 1)), "y_only"))


class TestPatterns:
    def test_counts(self):
        p = make_pattern("2x2to8x8")
        assert len(p.input_positions) == 4 and p.n_out == 60
        assert set(p.input_positions) == {(0, 0), (0, 7), (7, 0), (7, 7)}
        assert p.output_positions[0] == (0, 1)
        assert make_pattern("3x3to9x9").n_out == 72

    @pytest.mark.parametrize("task", ["2x2to8x8", "3x3to9x9"])
    def test_partition(self, task):
        p = make_pattern(task)
        ins, outs = set(p.input_positions), set(p.output_positions)
        assert not ins & outs
        assert ins | outs == {(r, c) for r in range(p.grid[0]) for c in range(p.grid[1])}

    @pytest.mark.parametrize("task", ["2x2to8x8", "3x3to9x9"])
    def test_dihedral_invariant_inputs(self, task):
        p = make_pattern(task)
        mask = np.zeros(p.grid + (1, 1), dtype=int)
        for r, c in p.input_positions:
            mask[r, c] = 1
        for g in range(8):
            assert np.array_equal(augment_array(mask, g), mask)

    def test_lookup(self):
        assert pattern_for(3, 3, 72).task == "3x3to9x9"
        with pytest.raises(DataError):
            pattern_for(2, 2, 72)
        with pytest.raises(DataError):
            make_pattern("4x4to8x8")

    @pytest.mark.parametrize("task", ["2x2to8x8", "3x3to9x9"])
    def test_extract_assemble_round_trip(self, task):
        p = make_pattern(task)
        lf = LightField(np.random.default_rng(4).random(p.grid + (5, 4, 3)))
        inputs, targets = extract_sparse(lf, p)
        assert inputs.grid == p.input_grid and targets.shape[0] == p.n_out
        assert np.array_equal(assemble_dense(inputs, targets, p).data, lf.data)


class TestChroma:
    def test_constant(self):
        p = make_pattern("2x2to8x8")
        out = chroma_angular_upsample(np.full((2, 2, 3, 3, 2), 0.3), p)
        np.testing.assert_allclose(out, 0.3, atol=1e-12)

    def test_bilinear_on_corners(self):
        p = make_pattern("2x2to8x8")
        planes = np.array([[0.0, 0.0], [1.0, 1.0]]).reshape(2, 2, 1, 1)
        out = chroma_angular_upsample(planes, p)
        for r in range(8):
            np.testing.assert_allclose(out[r, :, 0, 0], r / 7, atol=1e-12)

    def test_nodes_exact(self):
        p = make_pattern("3x3to9x9")
        planes = np.random.default_rng(5).random((3, 3, 4, 4))
        out = chroma_angular_upsample(planes, p)
        for i, r in enumerate(p.input_rows):
            for j, c in enumerate(p.input_cols):
                assert np.array_equal(out[r, c], planes[i, j])

    def test_reproduces_linear_ramps_on_nine_grid(self):
        p = make_pattern("3x3to9x9")
        rr, cc = np.meshgrid([0, 4, 8], [0, 4, 8], indexing="ij")
        planes = (0.1 * rr + 0.03 * cc)[..., None, None]
        out = chroma_angular_upsample(planes, p)
        R, C = np.meshgrid(range(9), range(9), indexing="ij")
        np.testing.assert_allclose(out[..., 0, 0], 0.1 * R + 0.03 * C, atol=1e-12)


class TestSynth:
    def test_zero_disparity(self):
        tex = np.random.default_rng(6).random((20, 30))
        lf = synth_lf(tex, 0, 4, 5, 10, 12)
        assert lf.shape == (4, 5, 10, 12, 1) and lf.colorspace == "y_only"
        for r in range(4):
            for c in range(5):
                assert np.array_equal(lf.data[r, c], lf.data[0, 0])
        assert np.array_equal(lf.data[0, 0, ..., 0], tex[5:15, 9:21])

    def test_unit_shift(self):
        tex = np.random.default_rng(7).random((30, 30, 3))
        lf = synth_lf(tex, 1, 8, 8, 16, 16)
        for r in range(7):
            assert np.array_equal(lf.data[r + 1, 0, :-1], lf.data[r, 0, 1:])
        for c in range(7):
            assert np.array_equal(lf.data[0, c + 1, :, :-1], lf.data[0, c, :, 1:])

    @given(st.integers(-2, 2), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
    @settings(max_examples=30, deadline=None)
    def test_photo_consistency(self, d, r, c, r2, c2):
        tex = np.random.default_rng(8).random((24, 24))
        lf = synth_lf(tex, d, 4, 4, 12, 12)
        a, b = lf.data[r, c, ..., 0], lf.data[r2, c2, ..., 0]
        dx, dy = d * (r - r2), d * (c - c2)
        for x in range(12):
            for y in range(12):
                if 0 <= x + dx < 12 and 0 <= y + dy < 12:
                    assert a[x, y] == b[x + dx, y + dy]

    def test_fractional_is_bilinear(self):
        tex = np.tile(np.arange(40.0), (40, 1))  # value = column index
        lf = synth_lf(tex, 0.5, 2, 2, 8, 8)
        # horizontal ramp: each view is the ramp offset by its origin
        np.testing.assert_allclose(lf.data[0, 1, 0, :, 0] - lf.data[0, 0, 0, :, 0], 0.5, atol=1e-12)

    def test_margin_error_names_size(self):
        assert required_texture_size(2, 8, 8, 16, 16) == (30, 30)
        with pytest.raises(DataError, match="30x30"):
            synth_lf(np.zeros((29, 40)), 2, 8, 8, 16, 16)
