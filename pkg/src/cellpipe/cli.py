"""Command line entry point: ``cellpipe <subcommand>``."""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import config as cfgmod
from . import io, pipeline
from .config import ConfigError, PipelineConfig
from .labelgen import make_representation_pair

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_IO = 4
EXIT_EMPTY = 5


def _exit_codes(fn):
    """Map pipeline exceptions onto distinct exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except pipeline.MissingInputError as exc:
            click.echo(f"missing input: {exc}", err=True)
            sys.exit(EXIT_MISSING_INPUT)
        except pipeline.EmptyResultWarning as exc:
            click.echo(f"warning: {exc}", err=True)
            sys.exit(EXIT_EMPTY)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except ValueError as exc:
            # malformed or unrepresentable data on disk (bad TIFF dtype, label overflow, ...)
            click.echo(f"io error: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _load(config_path) -> PipelineConfig:
    return cfgmod.load_config(config_path) if config_path else PipelineConfig()


def _floats(text):
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    return None if vals is None else tuple(int(v) for v in vals)


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                             help="INI config file; command-line flags override it.")


def segmentation_options(fn):
    for opt in reversed([
        click.option("--rho-mask", type=float, help="Mask threshold on the smoothed cell distances."),
        click.option("--rho-seed", type=float, help="Seed threshold."),
        click.option("--sigma", help="Gaussian std-dev per axis, e.g. 1.5,1.5."),
        click.option("--split/--no-split", "split_enabled", default=None,
                     help="Split objects larger than 4/3 of the mean size."),
    ]):
        fn = opt(fn)
    return fn


def tracking_options(fn):
    for opt in reversed([
        click.option("--delta-t", type=int, help="Frames a track may stay unmatched and still re-link."),
        click.option("--alpha", type=float, help="Daughter size ratio bound."),
        click.option("--beta", type=float, help="Combined daughter size bound."),
        click.option("--roi", help="ROI extents per axis, e.g. 150,150."),
    ]):
        fn = opt(fn)
    return fn


def _seg_cfg(cfg: PipelineConfig, rho_mask, rho_seed, sigma, split_enabled):
    return cfgmod.override(cfg.segmentation, rho_mask=rho_mask, rho_seed=rho_seed,
                           sigma=_floats(sigma), split_enabled=split_enabled)


def _track_cfg(cfg: PipelineConfig, delta_t, alpha, beta, roi):
    return cfgmod.override(cfg.tracking, delta_t=delta_t, alpha=alpha, beta=beta, roi_extent=_ints(roi))


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose: int) -> None:
    """Distance-map cell segmentation and tracking pipeline."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("labels", type=click.Path(path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--closing-radius", type=int, help="Grayscale closing radius in pixels.")
@click.option("--exponent", type=int, help="Power applied to the neighbor distances.")
@config_option
@_exit_codes
def labelgen(labels, out_dir, closing_radius, exponent, config_path):
    """Cell and neighbor distance maps from a label TIFF or a directory of maskNNN.tif."""
    cfg = cfgmod.override(_load(config_path).labelgen, closing_radius=closing_radius, exponent=exponent)
    if not labels.exists():
        raise pipeline.MissingInputError(f"input not found: {labels}")
    if labels.is_dir():
        count = pipeline.stage_labelgen(labels, out_dir, cfg)
        click.echo(f"objects={count}")
        return
    lab = io.read_label_tiff(labels)
    pair = make_representation_pair(lab, cfg)
    io.write_float_tiff(out_dir / f"{labels.stem}_cell.tif", pair.cell)
    io.write_float_tiff(out_dir / f"{labels.stem}_neighbor.tif", pair.neighbor)


@main.command()
@click.argument("pred_dir", type=click.Path(path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@segmentation_options
@config_option
@_exit_codes
def segment(pred_dir, out_dir, rho_mask, rho_seed, sigma, split_enabled, config_path):
    """Segment cellNNN.tif / neighborNNN.tif prediction pairs into maskNNN.tif."""
    cfg = _seg_cfg(_load(config_path), rho_mask, rho_seed, sigma, split_enabled)
    count = pipeline.stage_segment(pred_dir, out_dir, cfg)
    click.echo(f"objects={count}")
    if count == 0:
        raise pipeline.EmptyResultWarning("no objects segmented")


@main.command()
@click.argument("label_dir", type=click.Path(path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--raw-dir", type=click.Path(path_type=Path),
              help="Raw frames tNNN.tif for movement estimation; without it shifts are zero.")
@tracking_options
@config_option
@_exit_codes
def track(label_dir, out_dir, raw_dir, delta_t, alpha, beta, roi, config_path):
    """Link maskNNN.tif frames into tracks; writes CTC result masks and res_track.txt."""
    cfg = _track_cfg(_load(config_path), delta_t, alpha, beta, roi)
    if raw_dir is not None and not raw_dir.is_dir():
        raise pipeline.MissingInputError(f"raw directory not found: {raw_dir}")
    count = pipeline.stage_track(raw_dir, label_dir, out_dir, cfg)
    click.echo(f"tracks={count}")
    if count == 0:
        raise pipeline.EmptyResultWarning("no tracks")


@main.command()
@click.argument("ref_dir", type=click.Path(path_type=Path))
@click.argument("res_dir", type=click.Path(path_type=Path))
@click.option("--json", "json_path", type=click.Path(path_type=Path), help="Also write the report as JSON.")
@_exit_codes
def score(ref_dir, res_dir, json_path):
    """Compare a result directory against a reference (masks + track file)."""
    report = pipeline.stage_score(ref_dir, res_dir)
    click.echo(report.to_text(), nl=False)
    if json_path:
        with io.atomic_path(json_path) as tmp:
            tmp.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")


@main.command()
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--seed", type=int)
@click.option("--n-frames", type=int)
@click.option("--n-cells", type=int)
@click.option("--shape", help="Image extents, e.g. 256,256 or 32,128,128.")
@click.option("--division-prob", type=float)
@config_option
@_exit_codes
def synth(out_dir, seed, n_frames, n_cells, shape, division_prob, config_path):
    """Write a synthetic sequence: 01/tNNN.tif, 01_GT/TRA/maskNNN.tif, man_track.txt."""
    cfg = cfgmod.override(_load(config_path).synth, seed=seed, n_frames=n_frames, n_cells=n_cells,
                          shape=_ints(shape), division_prob=division_prob)
    try:
        count = pipeline.stage_synth(cfg, out_dir)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    click.echo(f"objects={count}")


@main.command("pipeline")
@config_option
@click.option("--output", type=click.Path(path_type=Path), help="Output root (overrides [paths] output).")
@click.option("--input", "input_", type=click.Path(path_type=Path), help="Dataset root (overrides [paths] input).")
@segmentation_options
@tracking_options
@_exit_codes
def pipeline_cmd(config_path, output, input_, rho_mask, rho_seed, sigma, split_enabled,
                 delta_t, alpha, beta, roi):
    """Run the configured stages in order (synth, labelgen, segment, track, score)."""
    cfg = _load(config_path)
    paths = cfgmod.override(cfg.paths, output=str(output) if output else None,
                            input=str(input_) if input_ else None)
    cfg = PipelineConfig(
        paths=paths,
        pipeline=cfg.pipeline,
        labelgen=cfg.labelgen,
        segmentation=_seg_cfg(cfg, rho_mask, rho_seed, sigma, split_enabled),
        tracking=_track_cfg(cfg, delta_t, alpha, beta, roi),
        synth=cfg.synth,
    )
    pipeline.run_pipeline(cfg, echo=click.echo)


if __name__ == "__main__":
    main()
