"""Tests for the trainers, evaluation and the multi-seed experiment."""

import csv
import logging
import os
import statistics

import numpy as np
import pytest

from fctl.core.exceptions import DomainError
from fctl.degrade.rng import derive_seed
from fctl.degrade.transforms import DegradeKind, degrade_image, spec_for_image
from fctl.net.toynet import init_params
from fctl.testing import tiny_train_config
from fctl.training.config import TrainConfig
from fctl.training.experiment import (
    ExperimentReport,
    SeedRow,
    format_report,
    relative_improvement,
    run_experiment,
    summarize,
)
from fctl.training.trainer import (
    CURVE_COLUMNS,
    build_dataset,
    degraded_images,
    evaluate,
    initial_dynamic_params,
    train_baseline,
    train_fctl,
    train_ideal,
    write_curves_csv,
)


@pytest.fixture
def dataset(tiny_config):
    return build_dataset(tiny_config)


@pytest.fixture
def ideal(tiny_config, dataset):
    return train_ideal(tiny_config, dataset=dataset).params


class TestDataset:
    """Tests for build_dataset and degraded_images."""

    def test_split(self, tiny_config, dataset):
        """Test split sizes and that no scene is in both halves."""
        assert len(dataset.train) == 9
        assert len(dataset.eval) == 3
        train_ids = {s.scene_id for s in dataset.train}
        eval_ids = {s.scene_id for s in dataset.eval}
        assert not train_ids & eval_ids
        assert train_ids | eval_ids == set(range(12))

    def test_deterministic(self, tiny_config, dataset):
        """Test that the dataset is rebuilt identically from the seed."""
        again = build_dataset(tiny_config)
        assert [s.scene_id for s in again.train] == [s.scene_id for s in dataset.train]
        assert all(a.image.equals(b.image) for a, b in zip(again.train, dataset.train))

    def test_degraded_images(self, tiny_config, dataset):
        """Test that every scene gets a stable degraded counterpart."""
        first = degraded_images(dataset.train, tiny_config.degrade, tiny_config)
        second = degraded_images(dataset.train, tiny_config.degrade, tiny_config)
        assert set(first) == {s.scene_id for s in dataset.train}
        assert all(first[i].scene_id == i for i in first)
        assert all(first[i].image.equals(second[i].image) for i in first)
        scene = dataset.train[0]
        assert not first[scene.scene_id].image.equals(scene.image)


class TestTrainers:
    """Tests for train_ideal, train_baseline and train_fctl."""

    def test_zero_epochs(self, dataset):
        """Test that zero epochs return the initial parameters."""
        cfg = tiny_train_config(epochs=0)
        result = train_ideal(cfg, dataset=dataset)
        assert result.params.equals(init_params(derive_seed(cfg.seed, "init", "ideal"), cfg.image_size))
        assert result.curve == []
        baseline = train_baseline(cfg, dataset=dataset)
        assert baseline.params.equals(initial_dynamic_params(cfg))

    def test_warm_start(self, ideal, dataset):
        """Test that warm start begins from a copy of the ideal model."""
        cfg = tiny_train_config(epochs=0, warm_start=True)
        assert train_baseline(cfg, ideal, dataset=dataset).params.equals(ideal)
        assert train_fctl(ideal, cfg, dataset=dataset).params.equals(ideal)

    def test_cold_start(self, ideal, dataset):
        """Test that warm_start=false starts both models from the seeded init."""
        cfg = tiny_train_config(epochs=0, warm_start=False)
        cold = init_params(derive_seed(cfg.seed, "init", "dynamic"), cfg.image_size)
        assert train_baseline(cfg, ideal, dataset=dataset).params.equals(cold)
        assert train_fctl(ideal, cfg, dataset=dataset).params.equals(cold)

    def test_training_moves_parameters(self, tiny_config, ideal):
        """Test that training changes the parameters."""
        start = init_params(derive_seed(tiny_config.seed, "init", "ideal"), tiny_config.image_size)
        assert not ideal.equals(start)

    def test_deterministic(self, tiny_config, ideal, dataset):
        """Test that two runs with the same config are bitwise identical."""
        first = train_fctl(ideal, tiny_config, dataset=dataset)
        second = train_fctl(ideal, tiny_config, dataset=dataset)
        assert first.params.equals(second.params)
        assert first.curve == second.curve

    def test_ideal_model_is_frozen(self, tiny_config, ideal, dataset):
        """Test that corrected training leaves the ideal parameters untouched."""
        snapshot = ideal.copy()
        train_fctl(ideal, tiny_config, dataset=dataset)
        assert ideal.equals(snapshot)

    def test_zero_weight_matches_baseline(self, ideal, dataset):
        """Test that lambda_fs = 0 reproduces the baseline bitwise."""
        cfg = tiny_train_config(lambda_fs=0.0)
        corrected = train_fctl(ideal, cfg, dataset=dataset)
        baseline = train_baseline(cfg, ideal, dataset=dataset)
        assert corrected.params.equals(baseline.params)

    def test_correction_changes_result(self, tiny_config, ideal, dataset):
        """Test that a positive lambda_fs departs from the baseline."""
        corrected = train_fctl(ideal, tiny_config, dataset=dataset)
        baseline = train_baseline(tiny_config, ideal, dataset=dataset)
        assert not corrected.params.equals(baseline.params)
        assert all(record.eansdl_term > 0 for record in corrected.curve)

    def test_batches_are_paired(self, tiny_config, ideal, dataset):
        """Test that each step feeds the same scenes to both backbones."""
        steps = []
        train_fctl(ideal, tiny_config, dataset=dataset, hook=steps.append)
        assert len(steps) == tiny_config.epochs * 3
        for record in steps:
            assert record.ideal_scene_ids == record.non_ideal_scene_ids
            assert record.total == pytest.approx(record.det_loss + tiny_config.lambda_fs * record.eansdl_term)

    @pytest.mark.parametrize("mixed", [False, True])
    def test_fed_images_are_degraded_scenes(self, ideal, dataset, mixed):
        """Test that every fed non-ideal image is the degraded version of its recorded scene."""
        cfg = tiny_train_config(mixed_intensity=mixed)
        scenes = {scene.scene_id: scene for scene in dataset.train}
        steps = []
        train_fctl(ideal, cfg, dataset=dataset, hook=steps.append)
        for record in steps:
            assert record.non_ideal_inputs.shape[0] == len(record.non_ideal_scene_ids)
            for fed, scene_id in zip(record.non_ideal_inputs, record.non_ideal_scene_ids):
                scene = scenes[scene_id]
                spec = spec_for_image(cfg.degrade, scene.scene_id, mixed_intensity=mixed)
                expected = degrade_image(scene.image, spec, cfg.degrade_constants)
                assert fed.tobytes() == expected.pixels.tobytes()
                assert not np.array_equal(fed, scene.image.pixels)

    def test_baseline_is_fed_degraded_scenes(self, tiny_config, dataset):
        """Test that the baseline sees the same degraded images as FCTL."""
        steps = []
        train_baseline(tiny_config, dataset=dataset, hook=steps.append)
        record = steps[0]
        expected = degraded_images(dataset.train, tiny_config.degrade, tiny_config)
        for fed, scene_id in zip(record.non_ideal_inputs, record.non_ideal_scene_ids):
            assert expected[scene_id].scene_id == scene_id
            assert fed.tobytes() == expected[scene_id].image.pixels.tobytes()

    def test_epoch_order_changes(self, tiny_config, ideal, dataset):
        """Test that batch order is reshuffled per epoch but covers every scene."""
        steps = []
        train_fctl(ideal, tiny_config, dataset=dataset, hook=steps.append)
        for epoch in range(tiny_config.epochs):
            ids = [i for r in steps if r.epoch == epoch for i in r.ideal_scene_ids]
            assert sorted(ids) == sorted(s.scene_id for s in dataset.train)

    def test_delta_schedule(self, ideal, dataset, caplog):
        """Test delta = epoch / epochs and its logging at start, middle and end."""
        cfg = tiny_train_config(epochs=4)
        steps = []
        with caplog.at_level(logging.INFO, logger="fctl.training.trainer"):
            train_fctl(ideal, cfg, dataset=dataset, hook=steps.append)
        assert sorted({r.delta for r in steps}) == [0.0, 0.25, 0.5, 0.75]
        delta_lines = [r.getMessage() for r in caplog.records if "delta=" in r.getMessage()]
        assert len(delta_lines) == 3
        assert [line.split("epoch ")[1].split(":")[0] for line in delta_lines] == ["0", "2", "3"]
        attenuation = [r.attenuation for r in steps]
        assert attenuation[0] == 1.0
        assert all(a >= b for a, b in zip(attenuation, attenuation[1:]))

    def test_curves_csv(self, tiny_config, ideal, dataset, tmp_path):
        """Test the curve file layout."""
        result = train_fctl(ideal, tiny_config, dataset=dataset)
        path = write_curves_csv(result.curve, tmp_path / "out" / "curves.csv")
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == CURVE_COLUMNS
        assert len(rows) == tiny_config.epochs + 1
        assert float(rows[1][1]) == result.curve[0].det_loss


class TestEvaluate:
    """Tests for evaluate."""

    def test_oracle_predictor(self, tiny_config, ideal, dataset):
        """Test that ground-truth logits score F1 = 1."""

        def oracle(batch, _images):
            masks = [np.stack([s.gt_masks[k] for s in batch])[:, None] for k in range(3)]
            return [np.where(m > 0.5, 30.0, -30.0) for m in masks]

        metrics = evaluate(ideal, tiny_config.degrade, tiny_config, dataset=dataset, predictor=oracle)
        assert metrics.f1 == 1.0
        assert metrics.det_loss < 1e-6
        assert metrics.scenes == 3

    def test_silent_predictor(self, tiny_config, ideal, dataset):
        """Test that predicting nothing scores F1 = 0."""

        def silent(batch, _images):
            size = tiny_config.image_size
            return [np.full((len(batch), 1, size >> k, size >> k), -10.0) for k in range(3)]

        metrics = evaluate(ideal, None, tiny_config, dataset=dataset, predictor=silent)
        assert metrics.f1 == 0.0

    def test_model_metrics(self, tiny_config, ideal, dataset):
        """Test that model evaluation returns finite values in range."""
        metrics = evaluate(ideal, None, tiny_config, dataset=dataset)
        assert np.isfinite(metrics.det_loss)
        assert 0.0 <= metrics.f1 <= 1.0


class TestExperiment:
    """Tests for run_experiment and its report."""

    def test_needs_three_seeds(self, tiny_config):
        """Test that fewer than three seeds raise DomainError."""
        with pytest.raises(DomainError):
            run_experiment(tiny_config, [0, 1])

    def test_relative_improvement(self):
        """Test the sign convention and the zero baseline."""
        assert relative_improvement(0.6, 0.5) == pytest.approx(0.2)
        assert relative_improvement(0.4, 0.5) == pytest.approx(-0.2)
        assert relative_improvement(0.4, 0.0) is None

    def test_repeated_seed(self, tmp_path):
        """Test that one seed repeated three times gives identical rows and a full report."""
        cfg = tiny_train_config(epochs=1)
        report = run_experiment(cfg, [3, 3, 3], kinds=[DegradeKind.BAYER], output_dir=tmp_path)

        assert [s.kind for s in report.summaries] == [DegradeKind.FOG, DegradeKind.BAYER]
        for summary in report.summaries:
            first = summary.rows[0]
            assert all(row == first for row in summary.rows)
            base, fctl = summary.medians["baseline_f1"], summary.medians["fctl_f1"]
            expected = None if base == 0 else (fctl - base) / base
            assert summary.relative_improvement["f1"] == expected
            assert summary.medians["ideal_f1"] == first.ideal_f1

        assert report.reduction_bitwise_equal is True
        text = (tmp_path / "report.txt").read_text()
        assert text == format_report(report)
        assert "primary_kind=fog" in text
        assert "reduction_bitwise_equal=true" in text
        assert f"gate_passed={str(report.gate_passed).lower()}" in text
        assert "bayer.median.fctl_f1=" in text
        assert (tmp_path / "seed-3" / "ideal" / "manifest.txt").exists()
        assert (tmp_path / "seed-3" / "fog-fctl.csv").exists()


def _row(seed, baseline_f1, fctl_f1):
    return SeedRow(
        seed=seed,
        kind=DegradeKind.FOG,
        ideal_det_loss=0.1,
        ideal_f1=0.4,
        ideal_on_degraded_det_loss=0.3,
        ideal_on_degraded_f1=0.1,
        baseline_det_loss=0.2,
        baseline_f1=baseline_f1,
        fctl_det_loss=0.19,
        fctl_f1=fctl_f1,
    )


def _report(rows):
    return ExperimentReport(
        primary_kind=DegradeKind.FOG,
        seeds=[row.seed for row in rows],
        summaries=[summarize(DegradeKind.FOG, rows)],
        config={},
    )


class TestGate:
    """Tests for the FCTL-versus-baseline gate."""

    def test_both_zero_is_degenerate(self):
        """Test that zero F1 on both sides fails the gate as degenerate."""
        report = _report([_row(s, 0.0, 0.0) for s in range(3)])
        assert report.primary.degenerate
        assert not report.gate_passed
        assert report.gate_status == "degenerate"
        text = format_report(report)
        assert "gate_passed=false" in text
        assert "gate_status=degenerate" in text

    def test_fctl_ahead(self):
        """Test that a higher FCTL median passes."""
        report = _report([_row(0, 0.2, 0.3), _row(1, 0.0, 0.1), _row(2, 0.25, 0.25)])
        assert not report.primary.degenerate
        assert report.gate_passed
        assert report.gate_status == "passed"

    def test_fctl_behind(self):
        """Test that a lower FCTL median fails."""
        report = _report([_row(s, 0.3, 0.2) for s in range(3)])
        assert not report.gate_passed
        assert report.gate_status == "failed"

    def test_zero_baseline_with_detections(self):
        """Test that FCTL detecting where the baseline does not passes."""
        report = _report([_row(s, 0.0, 0.1) for s in range(3)])
        assert report.gate_passed
        assert report.primary.relative_improvement["f1"] is None


DESK_SEEDS = [0, 1, 2, 3, 4]


@pytest.fixture(scope="module")
def desk_report(tmp_path_factory):
    """Default-config fog experiment over five seeds, with its output directory."""
    out = tmp_path_factory.mktemp("desk")
    report = run_experiment(
        TrainConfig(),
        DESK_SEEDS,
        kinds=[],
        workers=min(len(DESK_SEEDS), os.cpu_count() or 1),
        output_dir=out,
        verify_reduction=False,
    )
    return report, out


def _eansdl_column(path):
    with open(path, newline="") as f:
        return [float(row["eansdl_term"]) for row in csv.DictReader(f)]


@pytest.mark.slow
class TestDeskScale:
    """Runs at the default scale: 200 scenes of 64x64, 20 epochs, fog 0.6."""

    def test_ideal_training_descends(self):
        """Test that the ideal detection loss falls over 20 epochs on 200 scenes."""
        cfg = TrainConfig()
        assert (cfg.epochs, cfg.dataset_size, cfg.image_size) == (20, 200, 64)
        result = train_ideal(cfg)
        assert len(result.curve) == 20
        assert result.curve[-1].det_loss < result.curve[0].det_loss

    def test_models_detect_objects(self, desk_report):
        """Test that the ideal, baseline and FCTL models all find objects."""
        report, _ = desk_report
        medians = report.primary.medians
        assert medians["ideal_f1"] > 0.0
        assert medians["baseline_f1"] > 0.0
        assert medians["fctl_f1"] > 0.0
        assert not report.primary.degenerate

    def test_fctl_not_worse_than_baseline(self, desk_report):
        """Test the median FCTL F1 on fogged validation reaches the baseline's."""
        report, out = desk_report
        medians = report.primary.medians
        assert medians["fctl_f1"] >= medians["baseline_f1"]
        assert report.gate_passed
        assert "gate_status=passed" in (out / "report.txt").read_text()

    def test_baseline_beats_ideal_on_degraded(self, desk_report):
        """Test that training on fog lowers the fogged validation loss below the ideal model's."""
        report, _ = desk_report
        medians = report.primary.medians
        assert medians["baseline_det_loss"] < medians["ideal_on_degraded_det_loss"]

    def test_eansdl_term_falls(self, desk_report):
        """Test that the recorded EANSDL term drops from the first to the last epoch."""
        _, out = desk_report
        first, last = [], []
        for seed in DESK_SEEDS:
            column = _eansdl_column(out / f"seed-{seed}" / "fog-fctl.csv")
            assert len(column) == 20
            first.append(column[0])
            last.append(column[-1])
        assert statistics.median(last) < statistics.median(first)

    def test_zero_weight_matches_baseline(self):
        """Test the lambda_fs = 0 reduction at the default config."""
        cfg = TrainConfig(lambda_fs=0.0, epochs=2)
        dataset = build_dataset(cfg)
        ideal = train_ideal(cfg, dataset=dataset).params
        corrected = train_fctl(ideal, cfg, dataset=dataset)
        baseline = train_baseline(cfg, ideal, dataset=dataset)
        assert corrected.params.equals(baseline.params)
