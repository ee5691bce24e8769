import numpy as np
import pytest

from evfi.cli import main
from evfi.events import read_binary
from evfi.images import save_image
from evfi.synth import SceneSpec, generate_sequence


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    generate_sequence(root, SceneSpec(name="t0", kind="translate", velocity=(2.0, 0.0)))
    return root


class TestSimulateCommand:
    def test_simulate_writes_events(self, tmp_path, rng):
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        video = rng.integers(0, 256, size=(4, 16, 16, 3)).astype(np.uint8)
        for i in range(4):
            save_image(video[i], frames_dir / f"{i:06d}.png")
        ts_file = tmp_path / "timestamps.txt"
        ts_file.write_text("0\n10000\n20000\n30000\n")
        out = tmp_path / "events.evt1"
        code = main(
            [
                "simulate",
                "--frames-dir", str(frames_dir),
                "--timestamps-file", str(ts_file),
                "--out", str(out),
            ]
        )
        assert code == 0
        stream = read_binary(out)
        assert len(stream) > 0
        assert stream.window == (0, 30000)

    def test_simulate_count_mismatch_fails(self, tmp_path, rng):
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        save_image(rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8), frames_dir / "0.png")
        ts_file = tmp_path / "timestamps.txt"
        ts_file.write_text("0\n10\n")
        code = main(
            ["simulate", "--frames-dir", str(frames_dir), "--timestamps-file", str(ts_file), "--out", str(tmp_path / "e.evt1")]
        )
        assert code == 2


class TestBenchmarkCommand:
    def test_benchmark_success_exit_zero(self, tmp_path, dataset, capsys):
        code = main(
            ["benchmark", "--dataset", str(dataset), "--skip", "3", "--backend", "average", "--out", str(tmp_path / "run")]
        )
        assert code == 0
        assert (tmp_path / "run" / "report.csv").exists()
        assert "average" in capsys.readouterr().out

    def test_benchmark_failures_exit_nonzero(self, tmp_path, dataset):
        # copy-left works; a backend that cannot run (linear-flow without a
        # flow file) must flip the exit code
        seq = generate_sequence(tmp_path / "data", SceneSpec(name="r0", kind="rotate", spin=0.1))
        code = main(
            ["benchmark", "--dataset", str(tmp_path / "data"), "--skip", "3", "--backend", "linear-flow", "--out", str(tmp_path / "run")]
        )
        assert code == 1

    def test_rope_command_writes_csv(self, tmp_path, dataset, capsys):
        code = main(
            ["rope", "--dataset", str(dataset), "--skip", "3", "--backend", "copy-left", "--out", str(tmp_path / "run")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("position,psnr_db")

    def test_interframe_command(self, tmp_path, dataset, capsys):
        code = main(
            ["interframe", "--dataset", str(dataset), "--skip", "3", "--backend", "average", "--out", str(tmp_path / "run")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "with events" in out and "without events" in out

    def test_ablation_command(self, tmp_path, dataset, capsys):
        code = main(
            ["ablation", "--dataset", str(dataset), "--skip", "3", "--backend", "average", "--out", str(tmp_path / "run")]
        )
        assert code == 0
        assert "absent" in capsys.readouterr().out


class TestDatasetCommands:
    def test_make_dataset_benchmark(self, tmp_path):
        code = main(["make-dataset", "--out", str(tmp_path / "data"), "--kind", "benchmark"])
        assert code == 0
        assert (tmp_path / "data" / "translate_int" / "events.evt1").exists()

    def test_stats_without_maps_fails(self, tmp_path, dataset):
        main(["benchmark", "--dataset", str(dataset), "--skip", "1", "--backend", "average", "--out", str(tmp_path / "run")])
        code = main(["stats", "--out", str(tmp_path / "run")])
        assert code == 1
