"""Command-line behaviour: exit codes, config precedence, determinism."""

import numpy as np
import pytest

from kgmrf import cli, regioncov
from kgmrf.cli import UsageError, load_config, main


class TestConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        cfg = load_config(path)
        assert cfg["sigma2"] == 0.1
        assert cfg["m_dof"] == 8
        assert cfg["omega"] == 0.08
        assert cfg["eta"] == 0.05
        assert cfg["gamma"] == 0.95
        assert cfg["seeds"] == "5,6,7,8,9"

    def test_unknown_key_names_the_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("sigm2 = 0.2\n")
        with pytest.raises(UsageError, match="sigm2"):
            load_config(path)

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text("# heading\n\nsigma2 = 0.3  # inline\n")
        assert load_config(path)["sigma2"] == 0.3

    def test_bad_numeric_value(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("m_dof = eight\n")
        with pytest.raises(UsageError, match="m_dof"):
            load_config(path)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(UsageError, match="config"):
            load_config(tmp_path / "missing.cfg")


class TestExitCodes:
    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not_a_key = 1\n")
        code = main(["ellipse-sweep", "--config", str(cfg),
                     "--out", str(tmp_path)])
        assert code == 2
        assert "not_a_key" in capsys.readouterr().err

    def test_missing_otb_directory_exit_2(self, tmp_path, capsys):
        code = main(["otb-track", str(tmp_path / "nope"),
                     "--out", str(tmp_path)])
        assert code == 2

    def test_unknown_flag_exit_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["ellipse-sweep", "--no-such-flag"])
        assert exc.value.code == 2


class TestSelftest:
    def test_passes_and_reports_count(self, tmp_path, capsys):
        code = main(["selftest", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "10/10 checks passed" in out
        assert out.count("[PASS]") == 10


class TestSweepDeterminism:
    def test_ellipse_sweep_identical_bytes(self, tmp_path, capsys):
        cfg = tmp_path / "fast.cfg"
        cfg.write_text("seeds = 5\nhorizon = 60\nemit = csv\n")
        outputs = []
        for name in ("one", "two"):
            out = tmp_path / name
            code = main(["ellipse-sweep", "--config", str(cfg),
                         "--out", str(out)])
            assert code == 0
            outputs.append((out / "ellipse_sweep.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_flag_overrides_config(self, tmp_path, capsys):
        cfg = tmp_path / "fast.cfg"
        cfg.write_text("seeds = 5\nhorizon = 60\nemit = csv\n")
        a = tmp_path / "a"
        b = tmp_path / "b"
        main(["ellipse-sweep", "--config", str(cfg), "--out", str(a)])
        main(["ellipse-sweep", "--config", str(cfg), "--seeds", "6",
              "--out", str(b)])
        csv_a = (a / "ellipse_sweep.csv").read_text()
        csv_b = (b / "ellipse_sweep.csv").read_text()
        assert ",5," in csv_a and ",6," not in csv_a
        assert ",6," in csv_b and ",5," not in csv_b


class TestStabilityMap:
    def test_shallow_grid_reports_divergence(self, tmp_path, capsys):
        code = main(["stability-map", "--eta-max", "0.5", "--gamma", "1.99",
                     "--grid-size", "6", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        line = [l for l in out.splitlines() if l.startswith("divergent")][0]
        divergent = int(line.split(":")[1].split("/")[0])
        assert divergent >= 1
        assert (tmp_path / "stability_map.csv").exists()


class TestOtbTrack:
    def test_end_to_end(self, tmp_path, capsys):
        seq = tmp_path / "seq"
        seq.mkdir()
        rng = np.random.default_rng(7)
        bg = rng.integers(0, 80, size=(60, 80, 3), dtype=np.uint8)
        patch = rng.integers(150, 256, size=(16, 16, 3), dtype=np.uint8)
        lines = []
        x, y = 10, 20
        for t in range(6):
            canvas = bg.copy()
            canvas[y:y + 16, x:x + 16] = patch
            img = regioncov.Image(80, 60, 3, canvas)
            (seq / f"{t:04d}.ppm").write_bytes(regioncov.encode_pnm(img))
            lines.append(f"{x},{y},16,16")
            x += 2
        (seq / "groundtruth_rect.txt").write_text("\n".join(lines) + "\n")
        out = tmp_path / "out"
        code = main(["otb-track", str(seq), "--out", str(out)])
        assert code == 0
        assert (out / "track.csv").exists()
        assert (out / "track_summary.json").exists()


class TestHelp:
    def test_help_lists_flags_with_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["ellipse-sweep", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--out", "--config", "--seeds", "--jobs", "--emit",
                     "--tune", "--sigma2", "--m-dof", "--horizon"):
            assert flag in out
        assert "default 0.1" in out  # sigma2 default surfaces in help
