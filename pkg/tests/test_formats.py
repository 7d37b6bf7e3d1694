import io
import json
import struct

import numpy as np
import pytest
from PIL import Image

from stereonorm import ErrorStats, FormatError, NormalField, ScalarField
from stereonorm.formats import (read_disparity_png16, read_pfm,
                                read_pfm_normals, read_ply_oriented,
                                read_stats_json, write_disparity_png16,
                                write_normal_png, write_pfm, write_pfm_normals,
                                write_ply_oriented, write_stats_json)


class TestPfm:
    def test_roundtrip_small_grid(self):
        field = ScalarField.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
        back = read_pfm(write_pfm(field))
        assert np.array_equal(back.values, field.values)
        assert back.mask.all()

    def test_byte_level_fixture(self):
        # bottom-up rows: the first payload row is the bottom image row
        payload = struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)
        field = read_pfm(b"Pf\n2 2\n-1.0\n" + payload)
        assert field.shape == (2, 2)
        assert np.array_equal(field.values[1], [1.0, 2.0])
        assert np.array_equal(field.values[0], [3.0, 4.0])

    def test_write_read_write_byte_identity(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(7, 5)).astype(np.float32).astype(np.float64)
        vals[2, 3] = np.nan
        data = write_pfm(ScalarField.from_array(vals))
        assert write_pfm(read_pfm(data)) == data

    def test_mask_roundtrips_as_nan(self):
        vals = np.array([[1.0, np.nan], [np.inf, 4.0]])
        back = read_pfm(write_pfm(ScalarField.from_array(vals)))
        assert np.array_equal(back.mask, [[True, False], [False, True]])

    def test_big_endian_read(self):
        payload = struct.pack(">4f", 5.0, 6.0, 7.0, 8.0)
        field = read_pfm(b"Pf\n2 2\n1.0\n" + payload)
        assert np.array_equal(field.values[1], [5.0, 6.0])

    def test_three_channel_rejected_by_scalar_reader(self):
        with pytest.raises(FormatError):
            read_pfm(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            read_pfm(b"Qx\n1 1\n-1.0\n" + b"\x00" * 4)

    def test_truncated_payload_reports_offset(self):
        with pytest.raises(FormatError) as exc:
            read_pfm(b"Pf\n2 2\n-1.0\n" + b"\x00" * 7)
        assert exc.value.offset is not None

    def test_zero_scale(self):
        with pytest.raises(FormatError):
            read_pfm(b"Pf\n1 1\n0.0\n" + b"\x00" * 4)

    def test_truncated_header(self):
        with pytest.raises(FormatError):
            read_pfm(b"Pf\n2")

    def test_bad_dimensions(self):
        with pytest.raises(FormatError):
            read_pfm(b"Pf\n0 2\n-1.0\n")

    def test_normals_roundtrip(self):
        rng = np.random.default_rng(1)
        vecs = rng.normal(size=(4, 6, 3)).astype(np.float32).astype(np.float64)
        vecs /= np.linalg.norm(vecs, axis=-1, keepdims=True)
        vecs = vecs.astype(np.float32).astype(np.float64)
        nf = NormalField.from_array(vecs)
        nf.mask[1, 1] = False
        nf.vectors[1, 1] = np.nan
        back = read_pfm_normals(write_pfm_normals(nf))
        assert np.array_equal(back.mask, nf.mask)
        assert np.array_equal(back.vectors[back.mask], nf.vectors[nf.mask])

    def test_scalar_reader_rejects_normals_payload(self):
        nf = NormalField.from_array(np.full((2, 2, 3), 0.5))
        with pytest.raises(FormatError):
            read_pfm(write_pfm_normals(nf))


class TestDisparityPng16:
    def test_invalid_raw_masked(self):
        img = Image.fromarray(np.array([[0, 257]], dtype=np.uint16))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        field = read_disparity_png16(buf.getvalue(), scale=256.0)
        assert not field.mask[0, 0]
        assert field.mask[0, 1]

    def test_known_quantization(self):
        img = Image.fromarray(np.array([[257, 513]], dtype=np.uint16))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        field = read_disparity_png16(buf.getvalue(), scale=256.0)
        assert field.values[0, 0] == 1.0
        assert field.values[0, 1] == 2.0

    def test_roundtrip_within_quantization(self):
        rng = np.random.default_rng(5)
        vals = rng.uniform(0.0, 250.0, (9, 11))
        vals[4, 4] = np.nan
        field = ScalarField.from_array(vals)
        back = read_disparity_png16(write_disparity_png16(field))
        assert np.array_equal(back.mask, field.mask)
        assert np.abs(back.values[back.mask] - field.values[field.mask]).max() <= 1.0 / 256.0

    def test_eight_bit_rejected(self):
        buf = io.BytesIO()
        Image.fromarray(np.zeros((3, 3), dtype=np.uint8)).save(buf, format="PNG")
        with pytest.raises(FormatError):
            read_disparity_png16(buf.getvalue())

    def test_rgb_rejected(self):
        buf = io.BytesIO()
        Image.fromarray(np.zeros((3, 3, 3), dtype=np.uint8)).save(buf, format="PNG")
        with pytest.raises(FormatError):
            read_disparity_png16(buf.getvalue())

    def test_garbage_rejected(self):
        with pytest.raises(FormatError):
            read_disparity_png16(b"this is not a png")


class TestPly:
    def test_single_point_header(self):
        data = write_ply_oriented([[1.0, 2.0, 3.0]], [[0.0, 0.0, -1.0]])
        assert b"element vertex 1" in data

    def test_empty_cloud(self):
        for binary in (True, False):
            data = write_ply_oriented(np.zeros((0, 3)), np.zeros((0, 3)), binary=binary)
            assert b"element vertex 0" in data
            pts, nrm = read_ply_oriented(data)
            assert pts.shape == (0, 3)

    def test_ascii_binary_cross_decode(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(25, 3))
        nrm = rng.normal(size=(25, 3))
        nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
        pa, na = read_ply_oriented(write_ply_oriented(pts, nrm, binary=False))
        pb, nb = read_ply_oriented(write_ply_oriented(pts, nrm, binary=True))
        assert np.allclose(pa, pb, rtol=1e-6, atol=1e-7)
        assert np.allclose(na, nb, rtol=1e-6, atol=1e-7)
        assert np.allclose(pb, pts.astype(np.float32))

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            write_ply_oriented(np.zeros((2, 3)), np.zeros((3, 3)))

    def test_reader_rejects_garbage(self):
        with pytest.raises(FormatError):
            read_ply_oriented(b"definitely not ply")

    def test_reader_rejects_truncated_binary(self):
        data = write_ply_oriented(np.ones((4, 3)), np.ones((4, 3)), binary=True)
        with pytest.raises(FormatError):
            read_ply_oriented(data[:-5])


class TestNormalPng:
    def decode(self, data):
        return np.asarray(Image.open(io.BytesIO(data)))

    def test_down_normal_maps_to_expected_rgb(self):
        nf = NormalField.from_array(np.broadcast_to([0.0, 0.0, -1.0], (2, 2, 3)).copy())
        rgb = self.decode(write_normal_png(nf))
        assert tuple(rgb[0, 0]) == (128, 128, 0)

    def test_masked_pixel_white(self):
        arr = np.broadcast_to([0.0, 0.0, -1.0], (2, 2, 3)).copy()
        arr[0, 0] = np.nan
        nf = NormalField.from_array(arr)
        rgb = self.decode(write_normal_png(nf))
        assert tuple(rgb[0, 0]) == (255, 255, 255)
        assert tuple(rgb[1, 1]) == (128, 128, 0)

    def test_half_up_rounding(self):
        # n_x = 0: 127.5 rounds up to 128 in every channel
        nf = NormalField.from_array(np.zeros((1, 1, 3)) + [0.0, 1.0, -1.0])
        rgb = self.decode(write_normal_png(nf))
        assert tuple(rgb[0, 0]) == (128, 255, 0)


class TestStatsJson:
    def stats(self):
        return ErrorStats(avg=1.5, min=0.0, max=9.25, median=1.0, std=0.75,
                          valid_count=1234)

    def test_roundtrip(self):
        data = write_stats_json(self.stats(), label="affine-9",
                                config={"kernel": 9, "sigma": 0.2})
        back, doc = read_stats_json(data)
        assert back == self.stats()
        assert doc["label"] == "affine-9"
        assert doc["config"]["kernel"] == 9

    def test_is_plain_json(self):
        doc = json.loads(write_stats_json(self.stats()))
        assert set(doc["stats"]) == {"avg", "min", "max", "median", "std",
                                     "valid_count"}

    def test_malformed_rejected(self):
        with pytest.raises(FormatError):
            read_stats_json(b"{not json")
        with pytest.raises(FormatError):
            read_stats_json(b"{\"stats\": {\"avg\": 1}}")
