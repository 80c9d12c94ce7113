"""Command-line pipeline: ingest a mortality surface, run the geometry
kernel, aggregate per cohort, and export series/reports/charts.

Exit codes: 0 success, 2 input or configuration problems, 3 geometry
failures, 4 analytics failures. Output files are written atomically
(temp file plus rename), so a failed run never leaves a partial artifact.
Relative output paths are resolved against ``COHORTGEO_OUTPUT_DIR`` when
that variable is set.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import analytics, smooth
from .analytics import CEISeries, cei_series, detect_peaks, trim_series
from .errors import AnalyticsError, GeometryError, IngestError
from .geometry import GeometryField, GeometryOptions, compute_geometry_field
from .hmd import load_hmd
from .surface import MortalitySurface, Sex, parse_csv_matrix, serialize
from .svgchart import render_series_chart

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GEOMETRY = 3
EXIT_ANALYTICS = 4

_OUTPUT_DIR_ENV = "COHORTGEO_OUTPUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    """Validated knobs shared by the pipeline subcommands."""

    input_path: str | None = None
    input_format: str = "hmd"
    sex: Sex = Sex.TOTAL
    first_year: int | None = None
    first_age: int | None = None
    z_scale: float = 1.0
    log_rates: bool = False
    window: tuple[int, int] = analytics.DEFAULT_WINDOW
    trim_year: int | None = analytics.DEFAULT_TRIM_YEAR
    normalization: str = "sum"
    baseline_window: int = analytics.DEFAULT_BASELINE_WINDOW
    threshold_ratio: float = analytics.DEFAULT_THRESHOLD_RATIO
    output_format: str = "csv"
    output_path: str | None = None

    def __post_init__(self) -> None:
        if self.window[0] > self.window[1]:
            raise ValueError(f"window {self.window} is reversed")
        if not (self.z_scale > 0):
            raise ValueError("z-scale must be positive")
        if self.input_format not in ("hmd", "csv"):
            raise ValueError(f"unknown input format {self.input_format!r}")
        if self.normalization not in ("sum", "mean"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    def geometry_options(self) -> GeometryOptions:
        return GeometryOptions(z_scale=self.z_scale, log_rates=self.log_rates)


def _parse_year_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected LOW:HIGH integer range, got {text!r}"
        ) from None


def _parse_point(text: str) -> tuple[float, float]:
    try:
        t, x = text.split(",")
        return float(t), float(x)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected T,X pair, got {text!r}"
        ) from None


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="mortality data file")
    p.add_argument("--input-format", choices=("hmd", "csv"), default="hmd",
                   help="input layout (default: hmd)")
    p.add_argument("--sex", choices=[s.value for s in Sex], default="total")
    p.add_argument("--first-year", type=int, default=None,
                   help="year of the first CSV row (csv input only)")
    p.add_argument("--first-age", type=int, default=None,
                   help="age of the first CSV column (csv input only)")


def _add_geometry_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--z-scale", type=float, default=1.0,
                   help="multiply rates before geometry (default: 1)")
    p.add_argument("--log", action="store_true", dest="log_rates",
                   help="take the natural log of rates before geometry")


def _add_series_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trim-year", type=int, default=analytics.DEFAULT_TRIM_YEAR,
                   help="drop cohorts born after this year (default: 1970)")
    p.add_argument("--no-trim", action="store_true",
                   help="keep all cohorts including the zeroed border ones")
    p.add_argument("--normalization", choices=("sum", "mean"), default="sum",
                   help="per-cohort sum, or mean per valid point")


def _add_window_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=_parse_year_range,
                   default=analytics.DEFAULT_WINDOW, metavar="Y0:Y1",
                   help="analysis window of birth years (default: 1922:1970)")


def _add_output_args(p: argparse.ArgumentParser, formats: tuple[str, ...],
                     default: str) -> None:
    p.add_argument("--format", choices=formats, default=default,
                   dest="output_format", help=f"output format (default: {default})")
    p.add_argument("-o", "--output", default=None, dest="output_path",
                   help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortgeo",
        description="Detect and measure mortality cohort effects via "
                    "discrete surface geometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cei = sub.add_parser("cei", help="export the cohort effect index series")
    _add_input_args(p_cei)
    _add_geometry_args(p_cei)
    _add_series_args(p_cei)
    _add_window_args(p_cei)
    _add_output_args(p_cei, ("csv", "json", "svg"), "csv")

    p_aice = sub.add_parser("aice", help="aggregate index (coefficient of variation)")
    _add_input_args(p_aice)
    _add_geometry_args(p_aice)
    _add_series_args(p_aice)
    _add_window_args(p_aice)
    _add_output_args(p_aice, ("csv", "json"), "csv")

    p_gaps = sub.add_parser("gaps", help="detect peaks and generation gaps")
    _add_input_args(p_gaps)
    _add_geometry_args(p_gaps)
    _add_series_args(p_gaps)
    _add_window_args(p_gaps)
    p_gaps.add_argument("--baseline-window", type=int,
                        default=analytics.DEFAULT_BASELINE_WINDOW,
                        help="rolling-median width in years (default: 11)")
    p_gaps.add_argument("--threshold", type=float,
                        default=analytics.DEFAULT_THRESHOLD_RATIO,
                        dest="threshold_ratio",
                        help="peak threshold over baseline (default: 1.25)")
    _add_output_args(p_gaps, ("csv", "json"), "csv")

    p_surface = sub.add_parser("surface", help="dump the pointwise geometry field")
    _add_input_args(p_surface)
    _add_geometry_args(p_surface)
    _add_output_args(p_surface, ("csv", "json"), "csv")

    p_syn = sub.add_parser("synthetic", help="materialize a synthetic surface")
    p_syn.add_argument("--shape", required=True,
                       choices=("plane", "sphere", "ridge", "bump", "gompertz"))
    p_syn.add_argument("--years", type=_parse_year_range, required=True,
                       metavar="Y0:Y1")
    p_syn.add_argument("--ages", type=_parse_year_range, required=True,
                       metavar="A0:A1")
    p_syn.add_argument("--a", type=float, default=0.001, help="plane: t coefficient")
    p_syn.add_argument("--b", type=float, default=0.001, help="plane: x coefficient")
    p_syn.add_argument("--c", type=float, default=1.0, help="plane: constant")
    p_syn.add_argument("--radius", type=float, default=500.0, help="sphere radius")
    p_syn.add_argument("--center", type=_parse_point, default=None, metavar="T,X",
                       help="sphere/bump center (default: grid center)")
    p_syn.add_argument("--width", type=float, default=50.0,
                       help="ridge profile width parameter")
    p_syn.add_argument("--amplitude", type=float, default=1.0,
                       help="ridge/bump amplitude")
    p_syn.add_argument("--ridge-center", type=float, default=None,
                       help="birth year the ridge sits on (default: grid middle)")
    p_syn.add_argument("--sigma", type=float, default=8.0, help="bump sigma")
    p_syn.add_argument("--base-rate", type=float, default=1e-4)
    p_syn.add_argument("--age-slope", type=float, default=0.09)
    p_syn.add_argument("--improvement", type=float, default=0.01)
    _add_output_args(p_syn, ("csv", "json"), "csv")

    p_plot = sub.add_parser("plot", help="render series CSV files to an SVG chart")
    p_plot.add_argument("inputs", nargs="+", help="series CSV files")
    p_plot.add_argument("--title", default="")
    p_plot.add_argument("--width", type=int, default=900)
    p_plot.add_argument("--height", type=int, default=420)
    _add_window_args(p_plot)
    p_plot.add_argument("--no-window", action="store_true",
                        help="skip the analysis-window shading")
    p_plot.add_argument("--no-peaks", action="store_true",
                        help="skip peak annotations")
    p_plot.add_argument("--baseline-window", type=int,
                        default=analytics.DEFAULT_BASELINE_WINDOW)
    p_plot.add_argument("--threshold", type=float,
                        default=analytics.DEFAULT_THRESHOLD_RATIO,
                        dest="threshold_ratio")
    p_plot.add_argument("-o", "--output", default=None, dest="output_path")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "input_format", "hmd") == "csv":
        if args.first_year is None or args.first_age is None:
            raise ValueError("csv input needs --first-year and --first-age")
    return RunConfig(
        input_path=getattr(args, "input", None),
        input_format=getattr(args, "input_format", "hmd"),
        sex=Sex(getattr(args, "sex", "total")),
        first_year=getattr(args, "first_year", None),
        first_age=getattr(args, "first_age", None),
        z_scale=getattr(args, "z_scale", 1.0),
        log_rates=getattr(args, "log_rates", False),
        window=tuple(getattr(args, "window", analytics.DEFAULT_WINDOW)),
        trim_year=(None if getattr(args, "no_trim", False)
                   else getattr(args, "trim_year", analytics.DEFAULT_TRIM_YEAR)),
        normalization=getattr(args, "normalization", "sum"),
        baseline_window=getattr(args, "baseline_window",
                                analytics.DEFAULT_BASELINE_WINDOW),
        threshold_ratio=getattr(args, "threshold_ratio",
                                analytics.DEFAULT_THRESHOLD_RATIO),
        output_format=getattr(args, "output_format", "csv"),
        output_path=getattr(args, "output_path", None),
    )


def _resolve_output_path(path: str) -> str:
    base = os.environ.get(_OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(text: str, output_path: str | None) -> None:
    if output_path is None:
        sys.stdout.write(text)
        return
    target = _resolve_output_path(output_path)
    directory = os.path.dirname(os.path.abspath(target))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cohortgeo-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_surface(cfg: RunConfig) -> MortalitySurface:
    assert cfg.input_path is not None
    if cfg.input_format == "hmd":
        return load_hmd(cfg.input_path, sex=cfg.sex)
    with open(cfg.input_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_csv_matrix(
        text,
        first_year=int(cfg.first_year),  # validated in _config_from_args
        first_age=int(cfg.first_age),
        sex=cfg.sex,
        source_label=os.path.basename(cfg.input_path),
    )


def _compute_field(cfg: RunConfig) -> tuple[MortalitySurface, GeometryField]:
    surface = _load_surface(cfg)
    field = compute_geometry_field(surface, cfg.geometry_options())
    return surface, field


def _compute_series(cfg: RunConfig) -> CEISeries:
    surface, field = _compute_field(cfg)
    series = cei_series(field, surface, normalization=cfg.normalization)
    if cfg.trim_year is not None:
        series = trim_series(series, cfg.trim_year)
    return series


def cmd_cei(cfg: RunConfig) -> int:
    series = _compute_series(cfg)
    if cfg.output_format == "csv":
        _emit(series.to_csv(), cfg.output_path)
    elif cfg.output_format == "json":
        _emit(series.to_json(), cfg.output_path)
    else:
        _emit(render_series_chart([series], window=cfg.window,
                                  title=series.source_label),
              cfg.output_path)
    return EXIT_OK


def cmd_aice(cfg: RunConfig) -> int:
    series = _compute_series(cfg)
    report = analytics.aice(series, cfg.window)
    text = report.to_csv() if cfg.output_format == "csv" else report.to_json()
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_gaps(cfg: RunConfig) -> int:
    series = _compute_series(cfg)
    report = detect_peaks(series, cfg.window,
                          baseline_window=cfg.baseline_window,
                          threshold_ratio=cfg.threshold_ratio)
    text = report.to_csv() if cfg.output_format == "csv" else report.to_json()
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_surface(cfg: RunConfig) -> int:
    _, field = _compute_field(cfg)
    text = field.to_csv() if cfg.output_format == "csv" else field.to_json()
    _emit(text, cfg.output_path)
    return EXIT_OK


def _synthetic_surface(args: argparse.Namespace) -> MortalitySurface:
    (y0, y1) = args.years
    (a0, a1) = args.ages
    if y1 < y0 or a1 < a0:
        raise ValueError("year/age ranges must be increasing")
    years = np.arange(y0, y1 + 1)
    ages = np.arange(a0, a1 + 1)
    # domain padded by one step so 3-point stencils at the edge stay inside
    domain = ((float(y0) - 1.0, float(y1) + 1.0),
              (float(a0) - 1.0, float(a1) + 1.0))
    shape = args.shape
    if shape == "plane":
        surf = smooth.plane(args.a, args.b, args.c, domain=domain)
    elif shape == "sphere":
        center = args.center or ((y0 + y1) / 2.0, (a0 + a1) / 2.0)
        surf = smooth.sphere_cap(args.radius, center=center, domain=domain)
    elif shape == "ridge":
        center = (args.ridge_center if args.ridge_center is not None
                  else (y0 + y1) / 2.0 - (a0 + a1) / 2.0)
        surf = smooth.gaussian_ridge(width=args.width, amplitude=args.amplitude,
                                     center=center, domain=domain)
    elif shape == "bump":
        center = args.center or ((y0 + y1) / 2.0, (a0 + a1) / 2.0)
        surf = smooth.gaussian_bump(args.sigma, center=center,
                                    amplitude=args.amplitude, domain=domain)
    else:
        surf = smooth.gompertz_surface(base_rate=args.base_rate,
                                       age_slope=args.age_slope,
                                       improvement=args.improvement,
                                       domain=domain)
    return smooth.materialize_mortality_surface(surf, years, ages)


def cmd_synthetic(args: argparse.Namespace) -> int:
    surface = _synthetic_surface(args)
    text = serialize(surface, args.output_format)
    _emit(text, args.output_path)
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    series_list = []
    labels = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8") as fh:
            series_list.append(CEISeries.from_csv(
                fh.read(), source_label=os.path.basename(path)))
        labels.append(os.path.basename(path))
    window = None if args.no_window else tuple(args.window)
    peaks = None
    if not args.no_peaks:
        try:
            report = detect_peaks(series_list[0], tuple(args.window),
                                  baseline_window=args.baseline_window,
                                  threshold_ratio=args.threshold_ratio)
            peaks = report.peaks
        except AnalyticsError:
            peaks = None  # window/series too short to annotate; chart anyway
    text = render_series_chart(series_list, width=args.width, height=args.height,
                               title=args.title, window=window, peaks=peaks,
                               labels=labels)
    _emit(text, args.output_path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synthetic":
            return cmd_synthetic(args)
        if args.command == "plot":
            return cmd_plot(args)
        cfg = _config_from_args(args)
        handler = {"cei": cmd_cei, "aice": cmd_aice,
                   "gaps": cmd_gaps, "surface": cmd_surface}[args.command]
        return handler(cfg)
    except (IngestError, FileNotFoundError, IsADirectoryError,
            PermissionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except AnalyticsError as exc:
        print(f"analytics error: {exc}", file=sys.stderr)
        return EXIT_ANALYTICS


if __name__ == "__main__":
    sys.exit(main())
