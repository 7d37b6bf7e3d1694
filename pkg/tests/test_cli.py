import numpy as np
import pytest

from stereonorm.cli import main
from stereonorm.formats import (read_pfm, read_pfm_normals, read_ply_oriented,
                                read_stats_json)

SCENE = """
rig { fx 200  fy 200  u0 31.5  v0 23.5  baseline 0.3 }
image { width 64  height 48 }
plane { normal 0.1 0.2 -1  offset -4 }
"""

RIG_CFG = """
fx 200
fy 200
u0 31.5
v0 23.5
baseline 0.3
"""


@pytest.fixture
def scene_file(tmp_path):
    p = tmp_path / "plane.scn"
    p.write_text(SCENE)
    return p


@pytest.fixture
def rig_file(tmp_path):
    p = tmp_path / "rig.cfg"
    p.write_text(RIG_CFG)
    return p


def run(*argv):
    return main([str(a) for a in argv])


class TestSynth:
    def test_writes_all_artifacts(self, tmp_path, scene_file):
        out = tmp_path / "gt"
        assert run("synth", "--scene", scene_file, "--out", out,
                   "--sigma", "0.1", "--seed", "3") == 0
        for name in ("depth.pfm", "disparity.pfm", "normals.pfm",
                     "normals.png", "mask.png"):
            assert (out / name).exists(), name
        depth = read_pfm((out / "depth.pfm").read_bytes())
        assert depth.shape == (48, 64) and depth.mask.all()

    def test_byte_identical_reruns(self, tmp_path, scene_file):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("synth", "--scene", scene_file, "--out", out,
                       "--sigma", "0.25", "--seed", "11") == 0
        assert (a / "disparity.pfm").read_bytes() == (b / "disparity.pfm").read_bytes()
        assert (a / "normals.png").read_bytes() == (b / "normals.png").read_bytes()


class TestEstimateAndEval:
    @pytest.fixture
    def gt_dir(self, tmp_path, scene_file):
        out = tmp_path / "gt"
        run("synth", "--scene", scene_file, "--out", out, "--sigma", "0")
        return out

    @pytest.mark.parametrize("method,extra", [
        ("affine-fixed", ["--kernel", "5"]),
        ("affine-adaptive-cd", ["--threshold", "0.5"]),
        ("affine-adaptive-st", ["--threshold", "5.0"]),
        ("pca", ["--kernel", "5"]),
        ("cross", []),
    ])
    def test_estimate_then_eval_noiseless(self, tmp_path, gt_dir, rig_file,
                                          method, extra, capsys):
        est = tmp_path / "est.pfm"
        assert run("estimate", "--method", method, "--disparity",
                   gt_dir / "disparity.pfm", "--rig", rig_file,
                   "--out", est, "--threads", "1", *extra) == 0
        stats_json = tmp_path / "stats.json"
        assert run("eval", "--est", est, "--gt", gt_dir / "normals.pfm",
                   "--json", stats_json, "--label", method) == 0
        stats, doc = read_stats_json(stats_json.read_bytes())
        assert doc["label"] == method
        assert stats.max < 1e-3  # noiseless plane: every estimator is exact

    def test_eval_of_identical_fields_is_zero(self, tmp_path, gt_dir, capsys):
        json_path = tmp_path / "s.json"
        assert run("eval", "--est", gt_dir / "normals.pfm",
                   "--gt", gt_dir / "normals.pfm", "--json", json_path) == 0
        stats, _ = read_stats_json(json_path.read_bytes())
        assert stats.avg == 0.0 and stats.max == 0.0
        assert "avg" in capsys.readouterr().out

    def test_ply_output(self, tmp_path, gt_dir, rig_file):
        est = tmp_path / "est.pfm"
        ply = tmp_path / "cloud.ply"
        assert run("estimate", "--method", "cross", "--disparity",
                   gt_dir / "disparity.pfm", "--rig", rig_file,
                   "--out", est, "--ply", ply) == 0
        pts, nrm = read_ply_oriented(ply.read_bytes())
        normals = read_pfm_normals(est.read_bytes())
        assert len(pts) == int(normals.mask.sum())
        assert np.allclose(np.linalg.norm(nrm, axis=-1), 1.0, atol=1e-5)

    def test_png16_disparity_input(self, tmp_path, gt_dir, rig_file):
        from stereonorm.formats import write_disparity_png16
        disp = read_pfm((gt_dir / "disparity.pfm").read_bytes())
        png = tmp_path / "d.png"
        png.write_bytes(write_disparity_png16(disp, scale=256.0))
        est = tmp_path / "est.pfm"
        npng = tmp_path / "n.png"
        assert run("estimate", "--method", "affine-fixed", "--kernel", "5",
                   "--disparity", png, "--rig", rig_file, "--out", est,
                   "--normal-png", npng, "--png-scale", "256") == 0
        assert npng.exists()
        normals = read_pfm_normals(est.read_bytes())
        # quantized input: still close to the plane normal
        gt = read_pfm_normals((gt_dir / "normals.pfm").read_bytes())
        both = normals.mask & gt.mask
        dot = np.abs(np.sum(normals.vectors[both] * gt.vectors[both], axis=-1))
        assert np.degrees(np.arccos(np.clip(dot, 0, 1))).mean() < 0.5

    def test_rig_flags_override_file(self, tmp_path, gt_dir, rig_file):
        est = tmp_path / "est.pfm"
        assert run("estimate", "--method", "cross", "--disparity",
                   gt_dir / "disparity.pfm", "--rig", rig_file,
                   "--baseline", "0.6", "--out", est) == 0

    def test_inline_rig_without_file(self, tmp_path, gt_dir):
        est = tmp_path / "est.pfm"
        assert run("estimate", "--method", "cross", "--disparity",
                   gt_dir / "disparity.pfm", "--fx", "200", "--fy", "200",
                   "--u0", "31.5", "--v0", "23.5", "--baseline", "0.3",
                   "--out", est) == 0

    def test_thread_count_does_not_change_bytes(self, tmp_path, gt_dir, rig_file):
        outs = []
        for threads in ("1", "3"):
            est = tmp_path / f"est{threads}.pfm"
            run("estimate", "--method", "affine-fixed", "--kernel", "5",
                "--disparity", gt_dir / "disparity.pfm", "--rig", rig_file,
                "--out", est, "--threads", threads)
            outs.append(est.read_bytes())
        assert outs[0] == outs[1]


class TestBenchAndKernel:
    def test_bench_runs(self, capsys):
        assert run("bench", "--method", "affine-fixed", "--width", "64",
                   "--height", "48", "--repeats", "2", "--threads", "1") == 0
        out = capsys.readouterr().out
        assert "avg" in out and "ms" in out

    def test_kernel_dump_stdout(self, capsys):
        assert run("kernel", "--size", "3") == 0
        out = capsys.readouterr().out
        assert "alpha 6" in out and "s1 kernel:" in out

    def test_kernel_dump_file(self, tmp_path):
        path = tmp_path / "k.txt"
        assert run("kernel", "--size", "5", "--out", path) == 0
        assert "alpha 50" in path.read_text()


class TestExitCodes:
    def test_missing_file_is_io_error(self, tmp_path):
        assert run("estimate", "--method", "cross", "--disparity",
                   tmp_path / "nope.pfm", "--fx", "1", "--fy", "1", "--u0", "0",
                   "--v0", "0", "--baseline", "1", "--out", tmp_path / "o.pfm") == 4

    def test_malformed_input_is_format_error(self, tmp_path):
        bad = tmp_path / "bad.pfm"
        bad.write_bytes(b"garbage")
        assert run("estimate", "--method", "cross", "--disparity", bad,
                   "--fx", "1", "--fy", "1", "--u0", "0", "--v0", "0",
                   "--baseline", "1", "--out", tmp_path / "o.pfm") == 5

    def test_invalid_config_is_config_error(self, tmp_path, scene_file):
        gt = tmp_path / "gt"
        run("synth", "--scene", scene_file, "--out", gt)
        # missing rig parameters
        assert run("estimate", "--method", "cross", "--disparity",
                   gt / "disparity.pfm", "--out", tmp_path / "o.pfm") == 3
        # negative sigma
        assert run("synth", "--scene", scene_file, "--out", gt,
                   "--sigma", "-1") == 3

    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            run("estimate", "--method", "not-a-method", "--disparity", "x",
                "--out", "y")
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 2
