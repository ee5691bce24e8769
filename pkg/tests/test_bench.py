import numpy as np
import pytest

from evfi import bench
from evfi.bench import (
    BenchmarkError,
    attention_stats,
    materialize_job,
    plan_jobs,
    read_kv,
    register_backend,
    resolve_backend,
    run_benchmark,
    run_interframe_ablation,
    run_rope,
)
from evfi.dataset import load_sequence, make_skip_benchmark
from evfi.events import read_binary
from evfi.images import load_image, save_image
from evfi.synth import SceneSpec, generate_sequence
from evfi.voxel import read_voxel, write_voxel, VoxelGrid


@pytest.fixture(scope="module")
def translating_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("translating")
    generate_sequence(root, SceneSpec(name="t0", kind="translate", velocity=(2.0, 0.0)))
    generate_sequence(root, SceneSpec(name="t1", kind="translate", velocity=(1.5, 1.0), seed=1))
    return root


@pytest.fixture(scope="module")
def static_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("static")
    generate_sequence(root, SceneSpec(name="s0", kind="static"))
    return root


class TestMaterialization:
    def test_job_directory_layout(self, tmp_path, translating_root):
        jobs = plan_jobs(translating_root, 3)
        job_dir = tmp_path / "job"
        gt_dir = tmp_path / "gt"
        materialize_job(jobs[0], job_dir, gt_dir, bins=5)

        assert (job_dir / "keyframe_left.png").exists()
        assert (job_dir / "keyframe_right.png").exists()
        assert (job_dir / "flow_left_to_right.flo").exists()
        manifest = read_kv(job_dir / "job.txt")
        assert manifest["n_targets"] == "3"
        assert manifest["bins"] == "5"
        for k in range(3):
            tdir = job_dir / "targets" / f"t{k}"
            for label in ("left", "right", "reversed"):
                assert (tdir / f"events_{label}.evt1").exists()
                assert (tdir / f"voxel_{label}.vox1").exists()
            assert 0.0 < float(manifest[f"target_{k}_tau"]) < 1.0
        assert (gt_dir / "t0.png").exists()

    def test_ground_truth_never_in_job_dir(self, tmp_path, translating_root):
        # no file exposed to the backend is byte-identical to a held-out frame
        jobs = plan_jobs(translating_root, 3)
        for i, job in enumerate(jobs[:2]):
            job_dir = tmp_path / f"job{i}"
            gt_dir = tmp_path / f"gt{i}"
            materialize_job(job, job_dir, gt_dir, bins=5)
            gt_bytes = {p.read_bytes() for p in gt_dir.iterdir()}
            for path in job_dir.rglob("*"):
                if path.is_file():
                    assert path.read_bytes() not in gt_bytes

    def test_event_files_match_plan_windows(self, tmp_path, translating_root):
        jobs = plan_jobs(translating_root, 3)
        job = jobs[0]
        job_dir = tmp_path / "job"
        materialize_job(job, job_dir, tmp_path / "gt", bins=5)
        for k, target in enumerate(job.targets):
            left = read_binary(job_dir / "targets" / f"t{k}" / "events_left.evt1")
            assert left.same_events(target.events_left)
            rev = read_binary(job_dir / "targets" / f"t{k}" / "events_reversed.evt1")
            assert rev.same_events(target.events_reversed)

    def test_empty_mode_blanks_events_keeps_windows(self, tmp_path, translating_root):
        jobs = plan_jobs(translating_root, 3)
        job_dir = tmp_path / "job"
        materialize_job(jobs[0], job_dir, tmp_path / "gt", bins=5, events_mode="empty")
        for k, target in enumerate(jobs[0].targets):
            stream = read_binary(job_dir / "targets" / f"t{k}" / "events_left.evt1")
            assert len(stream) == 0
            assert stream.window == target.events_left.window
            grid = read_voxel(job_dir / "targets" / f"t{k}" / "voxel_left.vox1")
            assert not grid.values.any()

    def test_scaled_job_flow_covers_keyframe_interval(self, tmp_path, translating_root):
        from evfi.warp import read_flo

        jobs = plan_jobs(translating_root, 3)
        job = next(j for j in jobs if j.sequence == "t0")
        job_dir = tmp_path / "job"
        materialize_job(job, job_dir, tmp_path / "gt", bins=5)
        flow = read_flo(job_dir / "flow_left_to_right.flo")
        assert np.allclose(flow[:, :, 0], 2.0 * 4)  # velocity x (skip+1) intervals


class TestBackends:
    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            resolve_backend("no-such-backend")

    def test_exec_backend_runs_command(self, tmp_path):
        script = tmp_path / "touch_done.py"
        script.write_text(
            "import sys, pathlib\n"
            "job = pathlib.Path(sys.argv[1])\n"
            "(job / 'probe.txt').write_text('ran')\n"
        )
        backend = resolve_backend(f"exec:python3 {script}")
        job_dir = tmp_path / "job"
        job_dir.mkdir()
        backend(job_dir)
        assert (job_dir / "probe.txt").read_text() == "ran"

    def test_copy_left_is_perfect_on_static(self, tmp_path, static_root):
        report, failures, _ = run_benchmark(static_root, 3, "copy-left", tmp_path / "run")
        assert not failures
        assert report.psnr_mean == 100.0  # static scene: left keyframe is the truth
        assert report.ssim_mean == pytest.approx(1.0, abs=1e-9)

    def test_average_matches_copy_left_on_static(self, tmp_path, static_root):
        r1, _, _ = run_benchmark(static_root, 3, "copy-left", tmp_path / "a")
        r2, _, _ = run_benchmark(static_root, 3, "average", tmp_path / "b")
        assert r1.psnr_mean == r2.psnr_mean
        assert r1.ssim_mean == pytest.approx(r2.ssim_mean, abs=1e-12)

    def test_linear_flow_beats_average_on_constant_velocity(self, tmp_path, translating_root):
        lin, lin_failures, _ = run_benchmark(translating_root, 3, "linear-flow", tmp_path / "lin")
        avg, avg_failures, _ = run_benchmark(translating_root, 3, "average", tmp_path / "avg")
        assert not lin_failures and not avg_failures
        assert lin.psnr_mean > avg.psnr_mean


class TestRunBenchmark:
    def test_deterministic_reports(self, tmp_path, translating_root):
        run_benchmark(translating_root, 3, "average", tmp_path / "r1")
        run_benchmark(translating_root, 3, "average", tmp_path / "r2")
        assert (tmp_path / "r1" / "report.csv").read_bytes() == (
            tmp_path / "r2" / "report.csv"
        ).read_bytes()

    def test_parallel_run_matches_serial(self, tmp_path, translating_root):
        run_benchmark(translating_root, 3, "average", tmp_path / "serial", jobs=1)
        run_benchmark(translating_root, 3, "average", tmp_path / "parallel", jobs=4)
        assert (tmp_path / "serial" / "report.csv").read_bytes() == (
            tmp_path / "parallel" / "report.csv"
        ).read_bytes()

    def test_backend_failure_recorded_run_continues(self, tmp_path, translating_root):
        calls = []

        def flaky(job_dir):
            calls.append(job_dir)
            if len(calls) == 1:
                raise RuntimeError("boom")
            bench.backend_copy_left(job_dir)

        register_backend("_test-flaky", flaky)
        report, failures, _ = run_benchmark(translating_root, 3, "_test-flaky", tmp_path / "run")
        assert len(failures) == 1 and "boom" in failures[0]
        assert report is not None
        assert len(report.records) == (len(calls) - 1) * 3

    def test_missing_prediction_is_per_job_failure(self, tmp_path, translating_root):
        def lazy(job_dir):
            manifest = read_kv(job_dir / "job.txt")
            if manifest["job_id"] == "0":
                # skip one target
                for k in range(1, int(manifest["n_targets"])):
                    bench._target_out_dir(job_dir, k)
                    import shutil

                    shutil.copyfile(
                        job_dir / "keyframe_left.png",
                        job_dir / "out" / f"t{k}" / "prediction.png",
                    )
                bench.finish_job(job_dir)
            else:
                bench.backend_copy_left(job_dir)

        register_backend("_test-lazy", lazy)
        report, failures, _ = run_benchmark(translating_root, 3, "_test-lazy", tmp_path / "run")
        assert len(failures) == 1 and "missing prediction" in failures[0]
        assert report is not None

    def test_missing_done_sentinel_is_failure(self, tmp_path, translating_root):
        def no_done(job_dir):
            manifest = read_kv(job_dir / "job.txt")
            for k in range(int(manifest["n_targets"])):
                import shutil

                shutil.copyfile(
                    job_dir / "keyframe_left.png",
                    bench._target_out_dir(job_dir, k) / "prediction.png",
                )

        register_backend("_test-nodone", no_done)
        report, failures, _ = run_benchmark(translating_root, 3, "_test-nodone", tmp_path / "run")
        assert report is None
        assert all("job.done" in f for f in failures)

    def test_no_sequences_is_run_error(self, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        with pytest.raises(BenchmarkError):
            run_benchmark(empty, 3, "average", tmp_path / "run")


class TestAblation:
    def test_identical_stage_images_give_equal_rows(self, tmp_path, translating_root):
        def all_stages(job_dir):
            manifest = read_kv(job_dir / "job.txt")
            left = load_image(job_dir / "keyframe_left.png")
            for k in range(int(manifest["n_targets"])):
                out = bench._target_out_dir(job_dir, k)
                for name in ("prediction.png", "stage_warp.png", "stage_synthesis.png", "stage_refined.png"):
                    save_image(left, out / name)
            bench.finish_job(job_dir)

        register_backend("_test-stages", all_stages)
        stage_reports, failures = bench.run_ablation(
            translating_root, 3, "_test-stages", tmp_path / "run"
        )
        assert not failures
        means = [stage_reports[s].psnr_mean for s in ("warp", "synthesis", "refined", "attention")]
        assert all(m == means[0] for m in means)
        table = (tmp_path / "run" / "ablation.txt").read_text()
        assert "warp" in table and "attention" in table

    def test_missing_intermediates_marked_absent(self, tmp_path, translating_root):
        stage_reports, failures = bench.run_ablation(
            translating_root, 3, "average", tmp_path / "run"
        )
        assert stage_reports["warp"] is None
        assert stage_reports["attention"] is not None
        table = (tmp_path / "run" / "ablation.txt").read_text()
        assert "absent" in table


class TestRope:
    def test_requires_skip_ge_two(self, tmp_path, translating_root):
        with pytest.raises(ValueError):
            run_rope(translating_root, 1, "copy-left", tmp_path / "run")

    def test_copy_left_decays_with_position(self, tmp_path, translating_root):
        report, failures = run_rope(translating_root, 3, "copy-left", tmp_path / "run")
        assert not failures
        pp = report.position_psnr
        assert pp[1] > pp[2] > pp[3]
        csv = (tmp_path / "run" / "rope.csv").read_text().splitlines()
        assert csv[0] == "position,psnr_db"
        assert len(csv) == 4

    def test_average_roughly_symmetric(self, tmp_path, translating_root):
        report, _ = run_rope(translating_root, 3, "average", tmp_path / "run")
        pp = report.position_psnr
        assert abs(pp[1] - pp[3]) < 0.5
        assert pp[2] <= min(pp[1], pp[3])

    def test_static_scene_flat_at_cap(self, tmp_path, static_root):
        report, _ = run_rope(static_root, 3, "copy-left", tmp_path / "run")
        assert set(report.position_psnr.values()) == {100.0}


class TestInterframe:
    def test_event_blind_backend_equal_rows(self, tmp_path, translating_root):
        (with_report, without_report), failures = run_interframe_ablation(
            translating_root, 3, "average", tmp_path / "run"
        )
        assert not failures
        assert with_report.psnr_mean == pytest.approx(without_report.psnr_mean, abs=1e-12)

    def test_static_scene_equal_rows_at_cap(self, tmp_path, static_root):
        (with_report, without_report), _ = run_interframe_ablation(
            static_root, 3, "copy-left", tmp_path / "run"
        )
        assert with_report.psnr_mean == 100.0
        assert without_report.psnr_mean == 100.0

    def test_event_consuming_backend_sees_difference(self, tmp_path, translating_root):
        # a toy deterministic backend that shifts the left keyframe by the
        # event count signal: with empty events it degenerates to copy-left
        def event_shift(job_dir):
            manifest = read_kv(job_dir / "job.txt")
            left = load_image(job_dir / "keyframe_left.png")
            for k in range(int(manifest["n_targets"])):
                stream = read_binary(job_dir / "targets" / f"t{k}" / "events_left.evt1")
                out = bench._target_out_dir(job_dir, k)
                if len(stream):
                    save_image(np.roll(left, 1, axis=1), out / "prediction.png")
                else:
                    save_image(left, out / "prediction.png")
            bench.finish_job(job_dir)

        register_backend("_test-eventshift", event_shift)
        (with_report, without_report), _ = run_interframe_ablation(
            translating_root, 3, "_test-eventshift", tmp_path / "run"
        )
        assert with_report.psnr_mean != pytest.approx(without_report.psnr_mean, abs=1e-6)


class TestStats:
    def test_aggregates_attention_maps(self, tmp_path, translating_root):
        def with_attention(job_dir):
            manifest = read_kv(job_dir / "job.txt")
            h, w = int(manifest["height"]), int(manifest["width"])
            left = load_image(job_dir / "keyframe_left.png")
            for k in range(int(manifest["n_targets"])):
                out = bench._target_out_dir(job_dir, k)
                save_image(left, out / "prediction.png")
                scores = np.zeros((3, h, w), dtype=np.float32)
                scores[2, :, :] = 1.0  # synthesis wins everywhere
                write_voxel(VoxelGrid(scores, (0, 1)), out / "attention.vox1")
            bench.finish_job(job_dir)

        register_backend("_test-attn", with_attention)
        run_benchmark(translating_root, 3, "_test-attn", tmp_path / "run")
        fractions = attention_stats(tmp_path / "run")
        assert np.allclose(fractions, [0.0, 0.0, 1.0])

    def test_no_maps_returns_none(self, tmp_path, translating_root):
        run_benchmark(translating_root, 3, "average", tmp_path / "run")
        assert attention_stats(tmp_path / "run") is None
