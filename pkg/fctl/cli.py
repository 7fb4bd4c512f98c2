"""fctl command-line tool."""

import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, TypeVar

import click
import numpy as np
from pydantic import ValidationError

from fctl.core.exceptions import ConfigurationError, FctlError, GradientCheckError
from fctl.core.settings import FctlSettings
from fctl.core.tensor import FeatureMap
from fctl.degrade.rng import Rng
from fctl.degrade.transforms import DegradeKind, DegradeSpec, degrade_image
from fctl.loss.eansdl import EansdlParams, eansdl
from fctl.loss.gradcheck import gradient_check
from fctl.storage.checkpoints import load_checkpoint, save_checkpoint
from fctl.storage.images import read_ppm, write_ppm
from fctl.storage.tensors import read_tensor_file
from fctl.training.config import TrainConfig, load_train_config
from fctl.training.experiment import format_report, run_experiment
from fctl.training.objective import network_check_inputs, network_gradient_check
from fctl.training.trainer import evaluate, train_baseline, train_fctl, train_ideal, write_curves_csv

logger = logging.getLogger(__name__)

KIND_CHOICE = click.Choice([kind.value for kind in DegradeKind])

T = TypeVar("T")


def _echo_values(values: dict[str, object]) -> None:
    for name, value in values.items():
        click.echo(f"{name}={value!r}")


def _validated(build: Callable[[], T]) -> T:
    """Turn pydantic validation errors of flag values into ConfigurationError."""
    try:
        return build()
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(f"Invalid value for {where}: {first['msg']}") from e


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from e


def _parse_dims(text: str) -> tuple[int, int, int, int]:
    try:
        parts = [int(part) for part in text.split(",")]
    except ValueError as e:
        raise click.BadParameter(f"expected integers, got {text!r}") from e
    if len(parts) != 4:
        raise click.BadParameter("expected four comma-separated dims (batch,channels,width,height)")
    return parts[0], parts[1], parts[2], parts[3]


def _config_from(config_path: str | None, **flags: Any) -> TrainConfig:
    overrides = {key: value for key, value in flags.items() if value is not None}
    return load_train_config(config_path, overrides)


@click.group()
def cli():
    """fctl - feature corrective transfer learning toolkit."""
    pass


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Input PPM (P6)")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Output PPM path")
@click.option("--kind", type=KIND_CHOICE, default="fog", show_default=True, help="Degradation kind")
@click.option("--intensity", type=float, default=0.6, show_default=True, help="Intensity in [0, 1]")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the random stream")
def degrade(in_path, out_path, kind, intensity, seed):
    """Apply one degradation to a PPM image."""
    spec = _validated(lambda: DegradeSpec(kind=DegradeKind(kind), intensity=intensity, seed=seed))
    image = read_ppm(in_path)
    write_ppm(degrade_image(image, spec), out_path)
    click.echo(f"Wrote {kind} (intensity {intensity!r}, seed {seed}) to {out_path}")


@cli.command()
@click.option("--a", "a_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Non-ideal map (FMAP)")
@click.option("--b", "b_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Ideal map (FMAP)")
@click.option("--level", type=int, default=0, show_default=True, help="Pyramid level of the maps")
@click.option("--r0", type=int, default=2, show_default=True, help="Window radius at level 0")
@click.option("--alpha", type=float, default=3.0, show_default=True, help="Attenuation steepness")
@click.option("--beta", type=float, default=2.0, show_default=True, help="Attenuation curvature")
@click.option("--lambda", "lambda_", type=float, default=1.0, show_default=True, help="Consistency weight")
@click.option("--delta", type=float, default=0.0, show_default=True, help="Training progress in [0, 1]")
def loss(a_path, b_path, level, r0, alpha, beta, lambda_, delta):
    """Evaluate EANSDL between two feature maps, one field per line."""
    params = _validated(
        lambda: EansdlParams(alpha=alpha, beta=beta, lambda_consistency=lambda_, r0=r0, delta=delta)
    )
    breakdown = eansdl(read_tensor_file(a_path), read_tensor_file(b_path), params, level)
    _echo_values(breakdown.as_dict())


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the random map pair")
@click.option("--eps", type=float, default=1e-3, show_default=True, help="Finite-difference step")
@click.option("--tolerance", type=float, default=1e-4, show_default=True, help="Max relative error allowed")
@click.option("--dims", default="1,2,8,8", show_default=True, help="Map dims batch,channels,width,height")
@click.option("--level", type=int, default=0, show_default=True, help="Pyramid level (selects the radius)")
@click.option("--network", is_flag=True, help="Also check the full network on 200 sampled weights")
def gradcheck(seed, eps, tolerance, dims, level, network):
    """Compare the EANSDL gradient with central finite differences.

    Exits with status 2 if the relative error reaches the tolerance.
    """
    shape = _parse_dims(dims)
    size = int(np.prod(shape))
    a = FeatureMap(Rng.derived(seed, "gradcheck", "a").normal(size).reshape(shape))
    b = FeatureMap(Rng.derived(seed, "gradcheck", "b").normal(size).reshape(shape))
    result = gradient_check(a, b, EansdlParams(delta=0.3), level, eps=eps, tolerance=tolerance)
    _echo_values(
        {
            "max_relative_error": result.max_relative_error,
            "checked": result.checked,
            "skipped": result.skipped,
        }
    )
    if not result.passed:
        raise GradientCheckError(result.max_relative_error, tolerance, result.checked)

    if network:
        net_result = network_gradient_check(*network_check_inputs(seed), seed=seed)
        _echo_values({"network_max_relative_error": net_result.max_relative_error})
        if not net_result.passed:
            raise GradientCheckError(net_result.max_relative_error, net_result.tolerance, net_result.checked)


@cli.command()
@click.option("--mode", type=click.Choice(["ideal", "baseline", "fctl"]), required=True, help="What to train")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key=value config file")
@click.option(
    "--ideal", "ideal_dir", type=click.Path(exists=True, file_okay=False), help="Checkpoint of the ideal model"
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--epochs", type=int, help="Override epochs")
@click.option("--seed", type=int, help="Override seed")
@click.option("--lr", type=float, help="Override learning rate")
@click.option("--lambda-fs", "lambda_fs", type=float, help="Override the correction weight")
@click.option("--kind", type=KIND_CHOICE, help="Override degrade.kind")
@click.option("--intensity", type=float, help="Override degrade.intensity")
def train(mode, config_path, ideal_dir, out_dir, epochs, seed, lr, lambda_fs, kind, intensity):
    """Train one model and write its checkpoint and loss curve."""
    cfg = _config_from(
        config_path,
        epochs=epochs,
        seed=seed,
        lr=lr,
        lambda_fs=lambda_fs,
        **{"degrade.kind": kind, "degrade.intensity": intensity},
    )
    out = Path(out_dir) if out_dir else FctlSettings().output_dir / mode

    theta_ideal = load_checkpoint(ideal_dir) if ideal_dir else None
    if mode == "ideal":
        result = train_ideal(cfg)
    elif mode == "baseline":
        result = train_baseline(cfg, theta_ideal)
    else:
        if theta_ideal is None:
            logger.info("No --ideal checkpoint given; training the ideal model first")
            theta_ideal = train_ideal(cfg).params
        result = train_fctl(theta_ideal, cfg)

    save_checkpoint(result.params, out / "checkpoint")
    write_curves_csv(result.curve, out / "curves.csv")
    metrics = evaluate(result.params, None if mode == "ideal" else cfg.degrade, cfg)
    _echo_values(
        {
            "det_loss": metrics.det_loss,
            "f1": metrics.f1,
            "precision": metrics.precision,
            "recall": metrics.recall,
        }
    )
    click.echo(f"Wrote checkpoint and curves to {out}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key=value config file")
@click.option("--seeds", default="0,1,2,3,4", show_default=True, help="Comma-separated seeds (at least 3)")
@click.option("--kinds", default="rain,dark,bayer", show_default=True, help="Extra degradation kinds to report")
@click.option("--workers", type=int, help="Parallel seed processes (default: FCTL_WORKERS)")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--skip-reduction-check", is_flag=True, help="Do not verify the lambda_fs=0 reduction")
@click.option("--require-gate", is_flag=True, help="Exit with status 2 if FCTL F1 is below the baseline or both are 0")
def experiment(config_path, seeds, kinds, workers, out_dir, skip_reduction_check, require_gate):
    """Run the multi-seed FCTL vs baseline experiment and write the report."""
    settings = FctlSettings()
    cfg = _config_from(config_path)
    try:
        extra = [DegradeKind(k.strip()) for k in kinds.split(",") if k.strip()]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--kinds") from e
    report = run_experiment(
        cfg,
        _parse_seeds(seeds),
        kinds=extra,
        workers=workers or settings.workers,
        output_dir=Path(out_dir) if out_dir else settings.output_dir / "experiment",
        verify_reduction=not skip_reduction_check,
    )
    click.echo(format_report(report), nl=False)
    if require_gate and not report.gate_passed:
        return 2
    return 0


@cli.command()
def version():
    """Show fctl version."""
    from fctl import __version__

    click.echo(f"fctl version: {__version__}")


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit status.

    0 on success, 1 on usage or validation errors, 2 when a check fails.
    """
    settings = FctlSettings()
    logging.basicConfig(**settings.get_logging_config())
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="fctl", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except GradientCheckError as e:
        click.echo(f"Error: {e}", err=True)
        return 2
    except FctlError as e:
        click.echo(f"Error: {e}", err=True)
        return 1
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
