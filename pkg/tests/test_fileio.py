"""File format tests: TDSF round trips, PGM/PNG loading with polarity and
resize, the flat config grammar, and CSV tables.
"""

import numpy as np
import pytest
from PIL import Image

from tides.fileio import (
    InputError,
    bilinear_resize,
    format_config,
    load_field,
    load_grayscale_image,
    parse_bool,
    parse_config_text,
    read_loss_csv,
    render_density_pgm,
    save_field,
    write_loss_csv,
    write_pgm,
    write_trials_csv,
)


class TestTdsfContainer:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.uniform(0, 1, 12).astype(np.float32).astype(np.float64)
        path = tmp_path / "field.tdsf"
        save_field(path, 4, 3, values)
        nx, ny, loaded = load_field(path)
        assert (nx, ny) == (4, 3)
        assert np.array_equal(loaded, values)  # f32 payload, bit-exact

    def test_save_load_save_identical_bytes(self, tmp_path):
        values = np.linspace(0, 1, 6)
        a = tmp_path / "a.tdsf"
        b = tmp_path / "b.tdsf"
        save_field(a, 3, 2, values)
        save_field(b, 3, 2, load_field(a)[2])
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.tdsf"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(InputError, match="magic"):
            load_field(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "short.tdsf"
        save_field(path, 4, 4, np.zeros(16))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(InputError, match="truncated"):
            load_field(path)

    def test_size_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            save_field(tmp_path / "x.tdsf", 4, 4, np.zeros(15))


class TestPgm:
    def test_write_read_dims(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.linspace(0, 1, 12).reshape(3, 4))
        img = Image.open(path)
        assert img.size == (4, 3)
        assert img.mode == "L"

    def test_density_round_trip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(1)
        density = rng.uniform(0, 1, (5, 7))
        path = tmp_path / "density.pgm"
        render_density_pgm(path, 7, 5, density)
        loaded = load_grayscale_image(path, 7, 5)
        assert np.abs(loaded - density).max() <= 1.0 / 255.0

    def test_all_white_is_zero_material(self, tmp_path):
        path = tmp_path / "white.png"
        Image.fromarray(np.full((4, 4), 255, dtype=np.uint8)).save(path)
        field = load_grayscale_image(path, 4, 4)
        assert np.all(field == 0.0)

    def test_checkerboard_identity_resize_exact(self, tmp_path):
        board = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        path = tmp_path / "board.pgm"
        Image.fromarray(board).save(path)
        field = load_grayscale_image(path, 2, 2)
        np.testing.assert_array_equal(field, [[1.0, 0.0], [0.0, 1.0]])

    def test_constant_mid_gray(self, tmp_path):
        path = tmp_path / "gray.pgm"
        Image.fromarray(np.full((4, 4), 128, dtype=np.uint8)).save(path)
        field = load_grayscale_image(path, 4, 4)
        np.testing.assert_allclose(field, 1.0 - 128.0 / 255.0, atol=1e-12)
        assert field[0, 0] == pytest.approx(0.498, abs=1e-3)

    def test_rgb_luminance(self, tmp_path):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 0] = 255  # pure red
        path = tmp_path / "red.png"
        Image.fromarray(rgb, "RGB").save(path)
        field = load_grayscale_image(path, 2, 2)
        np.testing.assert_allclose(field, 1.0 - 0.299, atol=1e-12)

    def test_unsupported_mode(self, tmp_path):
        rgba = np.zeros((2, 2, 4), dtype=np.uint8)
        path = tmp_path / "rgba.png"
        Image.fromarray(rgba, "RGBA").save(path)
        with pytest.raises(InputError, match="mode"):
            load_grayscale_image(path, 2, 2)

    def test_unreadable(self, tmp_path):
        path = tmp_path / "not_an_image.png"
        path.write_bytes(b"garbage")
        with pytest.raises(InputError):
            load_grayscale_image(path, 2, 2)


class TestBilinearResize:
    def test_identity(self):
        arr = np.random.default_rng(2).uniform(0, 1, (5, 4))
        out = bilinear_resize(arr, 5, 4)
        np.testing.assert_array_equal(out, arr)

    def test_constant_preserved(self):
        arr = np.full((3, 3), 0.77)
        out = bilinear_resize(arr, 9, 7)
        np.testing.assert_allclose(out, 0.77, atol=1e-12)

    def test_2x2_to_1x1_averages(self):
        arr = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = bilinear_resize(arr, 1, 1)
        # target pixel center maps to (0.5, 0.5): the 4-pixel average
        assert out[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_upscale_range_bounded(self):
        arr = np.random.default_rng(3).uniform(0, 1, (4, 4))
        out = bilinear_resize(arr, 13, 11)
        assert out.min() >= arr.min() - 1e-12
        assert out.max() <= arr.max() + 1e-12


class TestConfigGrammar:
    def test_parse_basics(self):
        text = "# comment\n\nproblem = tower\nepochs = 100\nuse_mask = true\n"
        assert parse_config_text(text) == {
            "problem": "tower", "epochs": "100", "use_mask": "true"
        }

    def test_duplicate_key(self):
        with pytest.raises(InputError, match="duplicate"):
            parse_config_text("a = 1\na = 2\n")

    def test_missing_equals(self):
        with pytest.raises(InputError, match="key = value"):
            parse_config_text("just some words\n")

    def test_round_trip_through_format(self):
        pairs = {"problem": "hoop", "epochs": 7, "beta1": 12.5, "use_mask": False}
        parsed = parse_config_text(format_config(pairs))
        assert parsed == {
            "problem": "hoop", "epochs": "7", "beta1": "12.5", "use_mask": "false"
        }

    def test_parse_bool(self):
        assert parse_bool("true") and parse_bool("Yes") and parse_bool("1")
        assert not parse_bool("false") and not parse_bool("no")
        with pytest.raises(InputError):
            parse_bool("maybe")


class TestCsvTables:
    def test_loss_round_trip_exact(self, tmp_path):
        rows = [
            {"epoch": 0, "compliance": 1.2345678901234567, "material": 0.1,
             "vision": -0.25, "total": 3.3333333333333335},
            {"epoch": 1, "compliance": 2.0, "material": 0.0,
             "vision": 1e-17, "total": -2.0},
        ]
        path = tmp_path / "loss.csv"
        write_loss_csv(path, rows)
        loaded = read_loss_csv(path)
        assert loaded == rows  # repr round-trips doubles exactly

    def test_trials_csv(self, tmp_path):
        path = tmp_path / "trials.csv"
        write_trials_csv(path, [(0, 1.5, 0.25), (1, 2.5, 0.5)])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "seed,compliance,score"
        assert len(lines) == 3
