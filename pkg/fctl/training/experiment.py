"""Multi-seed experiment comparing FCTL with the detection-only baseline.

Per seed: train the ideal model, then for each degradation kind train the
baseline and the corrected model from the same start, and evaluate all of
them on the held-out scenes.

Relative improvement is ``(fctl - baseline) / baseline`` of the medians for
every metric. For F1 a positive value is an improvement; for detection loss
a negative value is.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict

from fctl.core.exceptions import DomainError
from fctl.degrade.transforms import DegradeKind, DegradeSpec
from fctl.storage.checkpoints import save_checkpoint
from fctl.training.config import TrainConfig, flatten
from fctl.training.trainer import (
    build_dataset,
    evaluate,
    train_baseline,
    train_fctl,
    train_ideal,
    write_curves_csv,
)

logger = logging.getLogger(__name__)

MIN_SEEDS = 3
METRICS = ("det_loss", "f1")


class SeedRow(BaseModel):
    """Metrics of one seed and one degradation kind."""

    model_config = ConfigDict(frozen=True)

    seed: int
    kind: DegradeKind
    ideal_det_loss: float
    ideal_f1: float
    ideal_on_degraded_det_loss: float
    ideal_on_degraded_f1: float
    baseline_det_loss: float
    baseline_f1: float
    fctl_det_loss: float
    fctl_f1: float


class KindSummary(BaseModel):
    """Rows and medians of one degradation kind."""

    kind: DegradeKind
    rows: list[SeedRow]
    medians: dict[str, float]
    relative_improvement: dict[str, float | None]
    gap_to_ideal_f1: float

    @property
    def degenerate(self) -> bool:
        """Neither the baseline nor FCTL detects anything, so F1 cannot rank them."""
        return self.medians["baseline_f1"] == 0.0 and self.medians["fctl_f1"] == 0.0

    @property
    def fctl_not_worse(self) -> bool:
        return not self.degenerate and self.medians["fctl_f1"] >= self.medians["baseline_f1"]


class ExperimentReport(BaseModel):
    """Outcome of :func:`run_experiment`."""

    primary_kind: DegradeKind
    seeds: list[int]
    summaries: list[KindSummary]
    reduction_bitwise_equal: bool | None = None
    config: dict[str, str]

    @property
    def primary(self) -> KindSummary:
        return next(s for s in self.summaries if s.kind == self.primary_kind)

    @property
    def gate_passed(self) -> bool:
        """Median FCTL F1 is at least the baseline's on the primary kind and not both zero."""
        return self.primary.fctl_not_worse

    @property
    def gate_status(self) -> str:
        """``passed``, ``failed`` or ``degenerate`` (both medians zero)."""
        if self.primary.degenerate:
            return "degenerate"
        return "passed" if self.gate_passed else "failed"


def relative_improvement(fctl_value: float, baseline_value: float) -> float | None:
    """``(fctl - baseline) / baseline``, or None for a zero baseline."""
    if baseline_value == 0:
        return None
    return (fctl_value - baseline_value) / baseline_value


def summarize(kind: DegradeKind, rows: Sequence[SeedRow]) -> KindSummary:
    """Medians across seeds and the derived comparisons."""
    columns = [name for name in SeedRow.model_fields if name not in ("seed", "kind")]
    medians = {name: float(np.median([getattr(row, name) for row in rows])) for name in columns}
    improvement = {
        metric: relative_improvement(medians[f"fctl_{metric}"], medians[f"baseline_{metric}"])
        for metric in METRICS
    }
    return KindSummary(
        kind=kind,
        rows=list(rows),
        medians=medians,
        relative_improvement=improvement,
        gap_to_ideal_f1=medians["ideal_f1"] - medians["fctl_f1"],
    )


def run_seed(
    cfg: TrainConfig, seed: int, kinds: Sequence[DegradeKind], output_dir: Path | None = None
) -> list[SeedRow]:
    """Full protocol for one seed; one row per degradation kind."""
    seed_cfg = cfg.with_overrides(seed=seed)
    dataset = build_dataset(seed_cfg)
    ideal = train_ideal(seed_cfg, dataset=dataset)
    ideal_clean = evaluate(ideal.params, None, seed_cfg, dataset=dataset)
    if output_dir is not None:
        save_checkpoint(ideal.params, output_dir / f"seed-{seed}" / "ideal")
        write_curves_csv(ideal.curve, output_dir / f"seed-{seed}" / "ideal.csv")

    rows = []
    for kind in kinds:
        spec = DegradeSpec(kind=kind, intensity=cfg.degrade.intensity, seed=cfg.degrade.seed)
        kind_cfg = seed_cfg.with_overrides(degrade=spec)
        baseline = train_baseline(kind_cfg, ideal.params, dataset=dataset)
        corrected = train_fctl(ideal.params, kind_cfg, dataset=dataset)
        ideal_degraded = evaluate(ideal.params, spec, kind_cfg, dataset=dataset)
        baseline_eval = evaluate(baseline.params, spec, kind_cfg, dataset=dataset)
        fctl_eval = evaluate(corrected.params, spec, kind_cfg, dataset=dataset)
        if output_dir is not None:
            run_dir = output_dir / f"seed-{seed}"
            write_curves_csv(baseline.curve, run_dir / f"{kind.value}-baseline.csv")
            write_curves_csv(corrected.curve, run_dir / f"{kind.value}-fctl.csv")
            save_checkpoint(corrected.params, run_dir / f"{kind.value}-fctl")
        row = SeedRow(
            seed=seed,
            kind=kind,
            ideal_det_loss=ideal_clean.det_loss,
            ideal_f1=ideal_clean.f1,
            ideal_on_degraded_det_loss=ideal_degraded.det_loss,
            ideal_on_degraded_f1=ideal_degraded.f1,
            baseline_det_loss=baseline_eval.det_loss,
            baseline_f1=baseline_eval.f1,
            fctl_det_loss=fctl_eval.det_loss,
            fctl_f1=fctl_eval.f1,
        )
        logger.info(
            f"seed {seed} {kind.value}: baseline f1={row.baseline_f1:.4f} "
            f"fctl f1={row.fctl_f1:.4f} ideal f1={row.ideal_f1:.4f}"
        )
        rows.append(row)
    return rows


def check_reduction(cfg: TrainConfig, seed: int) -> bool:
    """Whether FCTL with ``lambda_fs = 0`` matches the baseline bitwise."""
    seed_cfg = cfg.with_overrides(seed=seed, lambda_fs=0.0)
    dataset = build_dataset(seed_cfg)
    ideal = train_ideal(seed_cfg, dataset=dataset)
    baseline = train_baseline(seed_cfg, ideal.params, dataset=dataset)
    corrected = train_fctl(ideal.params, seed_cfg, dataset=dataset)
    return corrected.params.equals(baseline.params)


def run_experiment(
    cfg: TrainConfig,
    seeds: Sequence[int],
    *,
    kinds: Sequence[DegradeKind] | None = None,
    workers: int = 1,
    output_dir: str | Path | None = None,
    verify_reduction: bool = True,
) -> ExperimentReport:
    """Run every seed and aggregate medians.

    Args:
        cfg: Base config; ``cfg.degrade.kind`` is the primary kind
        seeds: At least three seeds
        kinds: Extra degradation kinds to report next to the primary one
        workers: Processes running seeds in parallel
        output_dir: Where to write the report, curves and checkpoints
        verify_reduction: Also check the ``lambda_fs = 0`` reduction on the first seed

    Raises:
        DomainError: If fewer than three seeds or no workers are given
    """
    if len(seeds) < MIN_SEEDS:
        raise DomainError("seeds", list(seeds), f"a list of at least {MIN_SEEDS} seeds")
    if workers < 1:
        raise DomainError("workers", workers, "at least 1")

    primary = cfg.degrade.kind
    all_kinds = [primary] + [k for k in dict.fromkeys(kinds or []) if k != primary]
    out = Path(output_dir) if output_dir is not None else None
    logger.info(f"Running {len(seeds)} seeds over {[k.value for k in all_kinds]} with {workers} worker(s)")

    if workers == 1:
        per_seed = [run_seed(cfg, seed, all_kinds, out) for seed in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_seed, cfg, seed, all_kinds, out) for seed in seeds]
            per_seed = [future.result() for future in futures]

    summaries = [
        summarize(kind, [rows[i] for rows in per_seed])
        for i, kind in enumerate(all_kinds)
    ]
    report = ExperimentReport(
        primary_kind=primary,
        seeds=list(seeds),
        summaries=summaries,
        reduction_bitwise_equal=check_reduction(cfg, seeds[0]) if verify_reduction else None,
        config={key: str(value) for key, value in flatten(cfg.model_dump(mode="json")).items()},
    )
    if report.primary.degenerate:
        logger.warning(f"Gate on {primary.value} is degenerate: baseline and FCTL median F1 are both 0")
    if out is not None:
        write_report(report, out / "report.txt")
    return report


def _fmt(value: float | None) -> str:
    return "none" if value is None else repr(value)


def format_report(report: ExperimentReport) -> str:
    """Readable table followed by a ``key=value`` block."""
    lines = [f"FCTL experiment over seeds {report.seeds} (primary kind: {report.primary_kind.value})", ""]
    for summary in report.summaries:
        lines.append(f"[{summary.kind.value}]")
        lines.append("seed        ideal_f1  ideal@deg_f1  baseline_f1  fctl_f1  baseline_loss  fctl_loss")
        for row in summary.rows:
            lines.append(
                f"{row.seed:<10d}  {row.ideal_f1:8.4f}  {row.ideal_on_degraded_f1:12.4f}  "
                f"{row.baseline_f1:11.4f}  {row.fctl_f1:7.4f}  {row.baseline_det_loss:13.6f}  "
                f"{row.fctl_det_loss:9.6f}"
            )
        f1_gain = summary.relative_improvement["f1"]
        lines.append(
            f"median f1: baseline {summary.medians['baseline_f1']:.4f}, fctl {summary.medians['fctl_f1']:.4f}, "
            f"relative improvement {'n/a' if f1_gain is None else f'{100 * f1_gain:+.2f}%'}"
        )
        if summary.degenerate:
            lines.append("degenerate: neither baseline nor fctl detects anything, F1 cannot rank them")
        lines.append("")

    lines.append("# key=value")
    lines.append(f"primary_kind={report.primary_kind.value}")
    lines.append(f"seeds={','.join(str(s) for s in report.seeds)}")
    lines.append(f"gate_passed={str(report.gate_passed).lower()}")
    lines.append(f"gate_status={report.gate_status}")
    if report.reduction_bitwise_equal is not None:
        lines.append(f"reduction_bitwise_equal={str(report.reduction_bitwise_equal).lower()}")
    for summary in report.summaries:
        prefix = summary.kind.value
        for row in summary.rows:
            for name, value in row.model_dump(exclude={"seed", "kind"}).items():
                lines.append(f"{prefix}.seed.{row.seed}.{name}={value!r}")
        for name, value in summary.medians.items():
            lines.append(f"{prefix}.median.{name}={value!r}")
        for metric, value in summary.relative_improvement.items():
            lines.append(f"{prefix}.relative_improvement.{metric}={_fmt(value)}")
        lines.append(f"{prefix}.gap_to_ideal_f1={summary.gap_to_ideal_f1!r}")
    for key, value in report.config.items():
        lines.append(f"config.{key}={value}")
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path: str | Path) -> Path:
    """Write :func:`format_report` output to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report), encoding="utf-8")
    logger.info(f"Wrote experiment report to {path}")
    return path
