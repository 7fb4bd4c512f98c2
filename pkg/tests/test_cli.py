"""Tests for the fctl command-line tool."""

import pytest

from fctl import __version__
from fctl.cli import run
from fctl.storage.checkpoints import load_checkpoint
from fctl.storage.images import read_ppm, write_ppm
from fctl.storage.tensors import write_tensor_file


def _values(output: str) -> dict[str, str]:
    return dict(line.split("=", 1) for line in output.splitlines() if "=" in line)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text("# unit-test scale\nepochs=1\ndataset_size=12\nbatch_size=4\neval_fraction=0.25\n")
    return path


class TestBasics:
    """Tests for help, version and usage errors."""

    def test_help(self, capsys):
        """Test that --help exits 0 and lists the commands."""
        assert run(["--help"]) == 0
        out = capsys.readouterr().out
        for command in ("degrade", "loss", "gradcheck", "train", "experiment"):
            assert command in out

    def test_version(self, capsys):
        """Test the version command."""
        assert run(["version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_unknown_command(self, capsys):
        """Test that an unknown subcommand is a usage error."""
        assert run(["frobnicate"]) == 1
        assert "No such command" in capsys.readouterr().err


class TestLossCommand:
    """Tests for `fctl loss`."""

    def test_identical_maps(self, tmp_path, maps, capsys):
        """Test that identical maps give a zero loss."""
        path = tmp_path / "a.fmap"
        write_tensor_file(maps.build((1, 2, 8, 8)), path)
        assert run(["loss", "--a", str(path), "--b", str(path)]) == 0
        values = _values(capsys.readouterr().out)
        assert values["total"] == "0.0"
        assert values["radius_used"] == "2"

    def test_different_maps(self, tmp_path, maps, capsys):
        """Test the printed breakdown for two random maps at level 1."""
        a, b = tmp_path / "a.fmap", tmp_path / "b.fmap"
        first, second = maps.pair((1, 1, 6, 6))
        write_tensor_file(first, a)
        write_tensor_file(second, b)
        assert run(["loss", "--a", str(a), "--b", str(b), "--level", "1", "--delta", "0.5"]) == 0
        values = _values(capsys.readouterr().out)
        assert float(values["total"]) > 0.0
        assert values["radius_used"] == "1"
        assert set(values) == {"local_term", "consistency_term", "attenuation", "radius_used", "total"}

    def test_mismatched_dims(self, tmp_path, maps, capsys):
        """Test that maps of different dims exit 1."""
        a, b = tmp_path / "a.fmap", tmp_path / "b.fmap"
        write_tensor_file(maps.build((1, 1, 4, 4)), a)
        write_tensor_file(maps.build((1, 1, 5, 4)), b)
        assert run(["loss", "--a", str(a), "--b", str(b)]) == 1
        assert "Error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        """Test that a missing input is a usage error."""
        assert run(["loss", "--a", str(tmp_path / "nope"), "--b", str(tmp_path / "nope")]) == 1

    def test_invalid_hyperparameter(self, tmp_path, maps, capsys):
        """Test that a non-positive alpha is rejected."""
        path = tmp_path / "a.fmap"
        write_tensor_file(maps.build((1, 1, 4, 4)), path)
        assert run(["loss", "--a", str(path), "--b", str(path), "--alpha", "0"]) == 1
        assert "alpha" in capsys.readouterr().err


class TestGradcheckCommand:
    """Tests for `fctl gradcheck`."""

    def test_passes(self, capsys):
        """Test that the default check passes with a small error."""
        assert run(["gradcheck", "--seed", "7"]) == 0
        values = _values(capsys.readouterr().out)
        assert float(values["max_relative_error"]) < 1e-4
        assert int(values["checked"]) > 0

    def test_failure_exit_code(self, capsys):
        """Test that an impossible tolerance exits 2."""
        assert run(["gradcheck", "--seed", "7", "--tolerance", "0"]) == 2
        assert "Gradient check failed" in capsys.readouterr().err

    def test_bad_dims(self):
        """Test that malformed dims are a usage error."""
        assert run(["gradcheck", "--dims", "1,2,8"]) == 1


class TestDegradeCommand:
    """Tests for `fctl degrade`."""

    def test_zero_fog_is_identity(self, tmp_path, images):
        """Test that fog at intensity 0 rewrites the input bytes unchanged."""
        src, dst = tmp_path / "in.ppm", tmp_path / "out.ppm"
        write_ppm(images.build(10, 6), src)
        assert run(["degrade", "--in", str(src), "--out", str(dst), "--kind", "fog", "--intensity", "0"]) == 0
        assert dst.read_bytes() == src.read_bytes()

    def test_rain_is_deterministic(self, tmp_path, images):
        """Test that the same seed writes the same bytes."""
        src = tmp_path / "in.ppm"
        write_ppm(images.build(32, 32), src)
        outputs = []
        for name in ("a.ppm", "b.ppm"):
            dst = tmp_path / name
            assert run(["degrade", "--in", str(src), "--out", str(dst), "--kind", "rain", "--seed", "5"]) == 0
            outputs.append(dst.read_bytes())
        assert outputs[0] == outputs[1]

    def test_bayer(self, tmp_path, images):
        """Test that the bayer output keeps one channel per pixel."""
        src, dst = tmp_path / "in.ppm", tmp_path / "out.ppm"
        write_ppm(images.build(8, 8), src)
        assert run(["degrade", "--in", str(src), "--out", str(dst), "--kind", "bayer"]) == 0
        assert ((read_ppm(dst).pixels > 0).sum(axis=0) <= 1).all()

    def test_odd_bayer(self, tmp_path, images):
        """Test that odd dims exit 1."""
        src, dst = tmp_path / "in.ppm", tmp_path / "out.ppm"
        write_ppm(images.build(7, 8), src)
        assert run(["degrade", "--in", str(src), "--out", str(dst), "--kind", "bayer"]) == 1
        assert not dst.exists()

    def test_bad_intensity(self, tmp_path, images, capsys):
        """Test that intensity outside [0, 1] exits 1."""
        src, dst = tmp_path / "in.ppm", tmp_path / "out.ppm"
        write_ppm(images.build(4, 4), src)
        assert run(["degrade", "--in", str(src), "--out", str(dst), "--intensity", "1.5"]) == 1
        assert "intensity" in capsys.readouterr().err

    def test_not_a_ppm(self, tmp_path):
        """Test that a malformed image exits 1."""
        src = tmp_path / "in.ppm"
        src.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
        assert run(["degrade", "--in", str(src), "--out", str(tmp_path / "out.ppm")]) == 1


class TestTrainCommand:
    """Tests for `fctl train`."""

    def test_ideal_then_fctl(self, tmp_path, tiny_config_file, capsys):
        """Test training the ideal model and reusing its checkpoint."""
        ideal_dir = tmp_path / "ideal"
        assert run(["train", "--mode", "ideal", "--config", str(tiny_config_file), "--out", str(ideal_dir)]) == 0
        assert (ideal_dir / "curves.csv").exists()
        ideal = load_checkpoint(ideal_dir / "checkpoint")
        assert ideal.image_size == 64
        capsys.readouterr()

        fctl_dir = tmp_path / "fctl"
        args = ["train", "--mode", "fctl", "--config", str(tiny_config_file), "--out", str(fctl_dir)]
        assert run(args + ["--ideal", str(ideal_dir / "checkpoint"), "--kind", "dark", "--lambda-fs", "0.2"]) == 0
        values = _values(capsys.readouterr().out)
        assert 0.0 <= float(values["f1"]) <= 1.0
        assert (fctl_dir / "checkpoint" / "manifest.txt").exists()

    def test_unknown_config_key(self, tmp_path, capsys):
        """Test that an unknown config key exits 1 and names the key."""
        path = tmp_path / "bad.cfg"
        path.write_text("epochz=3\n")
        assert run(["train", "--mode", "ideal", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
        assert "epochz" in capsys.readouterr().err


class TestExperimentCommand:
    """Tests for `fctl experiment`."""

    def test_too_few_seeds(self, tiny_config_file, tmp_path):
        """Test that two seeds are rejected."""
        args = ["experiment", "--config", str(tiny_config_file), "--seeds", "0,1", "--out", str(tmp_path)]
        assert run(args) == 1

    def test_bad_kind(self, tiny_config_file, tmp_path):
        """Test that an unknown kind is a usage error."""
        args = ["experiment", "--config", str(tiny_config_file), "--kinds", "snow", "--out", str(tmp_path)]
        assert run(args) == 1

    def test_report(self, tiny_config_file, tmp_path, capsys):
        """Test a three-seed run writes and prints the report."""
        args = [
            "experiment",
            "--config",
            str(tiny_config_file),
            "--seeds",
            "0,1,2",
            "--kinds",
            "",
            "--out",
            str(tmp_path),
            "--skip-reduction-check",
        ]
        assert run(args) == 0
        out = capsys.readouterr().out
        values = _values(out)
        assert values["primary_kind"] == "fog"
        assert values["seeds"] == "0,1,2"
        assert "reduction_bitwise_equal" not in values
        assert (tmp_path / "report.txt").read_text() == out

    def test_require_gate_exit_code(self, tiny_config_file, tmp_path, capsys):
        """Test that --require-gate exits 2 unless the gate status is passed."""
        args = [
            "experiment",
            "--config",
            str(tiny_config_file),
            "--seeds",
            "0,1,2",
            "--kinds",
            "",
            "--out",
            str(tmp_path),
            "--skip-reduction-check",
            "--require-gate",
        ]
        code = run(args)
        values = _values(capsys.readouterr().out)
        assert values["gate_status"] in ("passed", "failed", "degenerate")
        assert code == (0 if values["gate_status"] == "passed" else 2)
