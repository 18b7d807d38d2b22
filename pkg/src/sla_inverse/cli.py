"""Command-line driver: ``sla-inverse {mesh,forward,inverse,sweep}``.

Every run reads one INI file; ``--set section.key=value`` and the dedicated
flags override its keys.  Stress-like values accept a ``%`` suffix, read as
a fraction of the tensile strength (``band = 1%``, ``delta_sigma = 1%``).

Example::

    [geometry]
    kind = beam
    span = 600
    depth = 150
    thickness = 100
    elem_size = 10

    [material]
    E = 30000
    nu = 0.2

    [law]
    shape = exponential
    f_t = 3
    g_f = 0.08
    band = 1%

    [forward]
    decimate = 300

    [ident]
    delta_sigma = 1%
"""

from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from sla_inverse.cohesive import TSCurve, exponential_ts, linear_ts, read_ts_csv, sawtooth_from_ts
from sla_inverse.dataio import LoadingCurve, decimate_curve, load_curve, write_curve_csv, write_forward, write_outputs
from sla_inverse.fem import Material
from sla_inverse.ident import (
    IdentConfig,
    IdentificationError,
    fit_young_modulus,
    run_inverse,
    run_multipass,
    summarize,
)
from sla_inverse.mesh import Mesh, count_report, generate_compact_tension, generate_notched_beam, write_mesh
from sla_inverse.sla import run_forward

log = logging.getLogger("sla_inverse")

OUTPUT_ENV = "SLA_INVERSE_OUT"
DEFAULT_OUTPUT = "sla_out"

EXIT_OK, EXIT_ANALYSIS, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """Missing or malformed configuration value."""


# ---------------------------------------------------------------- config


def _new_config() -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(interpolation=None)  # "1%" is a value, not a reference
    cfg.optionxform = str  # keep "E" and "E_xx" distinct from "e"
    return cfg


def read_config(path: str | os.PathLike | None, overrides=()) -> configparser.ConfigParser:
    """Parse the INI file and apply ``section.key=value`` overrides."""
    cfg = _new_config()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg.read(path)
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot or not option:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section, option, value.strip())
    return cfg


def _get(cfg, section, key, default=None, *, required=False) -> str | None:
    if cfg.has_option(section, key):
        return cfg.get(section, key).strip()
    if required:
        raise ConfigError(f"missing [{section}] {key}")
    return default


def _float(cfg, section, key, default=None, *, required=False) -> float | None:
    raw = _get(cfg, section, key, None, required=required)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def _int(cfg, section, key, default=None) -> int | None:
    value = _float(cfg, section, key, None)
    return default if value is None else int(value)


def _bool(cfg, section, key, default=False) -> bool:
    if not cfg.has_option(section, key):
        return default
    try:
        return cfg.getboolean(section, key)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a boolean") from None


def _fraction(raw: str, what: str) -> tuple[float, bool]:
    """``(value, relative)``; ``"1%"`` gives ``(0.01, True)``."""
    text = raw.strip()
    try:
        if text.endswith("%"):
            return float(text[:-1]) / 100.0, True
        return float(text), False
    except ValueError:
        raise ConfigError(f"{what} = {raw!r} is not a number or percentage") from None


def _list(raw: str | None, what: str) -> list[str]:
    if raw is None:
        return []
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"sweep axis {what} is empty")
    return items


# ---------------------------------------------------------------- builders


def build_mesh(cfg, elem_size: float | None = None) -> Mesh:
    kind = _get(cfg, "geometry", "kind", "beam")
    if kind == "beam":
        return generate_notched_beam(
            _float(cfg, "geometry", "span", required=True),
            _float(cfg, "geometry", "depth", required=True),
            _float(cfg, "geometry", "thickness", required=True),
            notch_depth=_float(cfg, "geometry", "notch_depth", 0.0),
            notch_width=_float(cfg, "geometry", "notch_width", 0.0),
            elem_size=elem_size or _float(cfg, "geometry", "elem_size", required=True),
            response=_get(cfg, "geometry", "response", "cmod"),
            load=_float(cfg, "geometry", "load", 1.0e4),
            cmod_gauge=_float(cfg, "geometry", "cmod_gauge"),
        )
    if kind == "ct":
        return generate_compact_tension(
            _float(cfg, "geometry", "width", required=True),
            _float(cfg, "geometry", "height", required=True),
            _float(cfg, "geometry", "thickness", required=True),
            _float(cfg, "geometry", "notch_length", required=True),
            elem_size or _float(cfg, "geometry", "elem_size_fine", required=True),
            _float(cfg, "geometry", "elem_size_coarse", required=True),
            fine_band=_float(cfg, "geometry", "fine_band"),
            load=_float(cfg, "geometry", "load", 1.0e3),
        )
    raise ConfigError(f"[geometry] kind must be 'beam' or 'ct', got {kind!r}")


def build_material(cfg, E: float | None = None) -> Material:
    kind = _get(cfg, "material", "kind", "isotropic")
    if kind == "isotropic":
        return Material.isotropic(E or _float(cfg, "material", "E", required=True), _float(cfg, "material", "nu", 0.2))
    if kind == "orthotropic":
        mat = Material.orthotropic(
            _float(cfg, "material", "E_xx", required=True),
            _float(cfg, "material", "E_yy", required=True),
            _float(cfg, "material", "G_xy", required=True),
            _float(cfg, "material", "nu_xy", required=True),
        )
        return mat if E is None else mat.scaled(E / mat.reference_modulus)
    raise ConfigError(f"[material] kind must be 'isotropic' or 'orthotropic', got {kind!r}")


def build_ts(cfg) -> TSCurve:
    shape = _get(cfg, "law", "shape", "exponential")
    if shape == "exponential":
        return exponential_ts(_float(cfg, "law", "f_t", required=True), _float(cfg, "law", "g_f", required=True))
    if shape == "linear":
        return linear_ts(_float(cfg, "law", "f_t", required=True), _float(cfg, "law", "w_c", required=True))
    if shape == "file":
        return read_ts_csv(_get(cfg, "law", "path", required=True))
    raise ConfigError(f"[law] shape must be exponential, linear or file, got {shape!r}")


def build_ident(cfg, seed: int, delta_sigma: str | None = None) -> IdentConfig:
    raw = delta_sigma or _get(cfg, "ident", "delta_sigma", "1%")
    value, relative = _fraction(raw, "[ident] delta_sigma")
    try:
        return IdentConfig(
            delta_sigma=value,
            delta_sigma_relative=relative,
            reference_load=_float(cfg, "ident", "reference_load"),
            k0=_float(cfg, "ident", "k0"),
            g0=_float(cfg, "ident", "g0"),
            angle_tol=_float(cfg, "ident", "angle_tol", 1e-4),
            max_events=_int(cfg, "ident", "max_events", 200_000),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def forward_experiment(cfg, seed: int):
    """Synthetic experiment from the [law] section; returns (result, curve)."""
    mesh = build_mesh(cfg)
    material = build_material(cfg)
    ts = build_ts(cfg)
    method = _get(cfg, "law", "sawtooth", "stress-band")
    param_raw = _get(cfg, "law", "band", None) or _get(cfg, "law", "parameter", "1%")
    param, relative = _fraction(param_raw, "[law] band")
    if relative and method != "stiffness-factor":
        param *= ts.tensile_strength
    k0 = _float(cfg, "law", "k0", material.reference_modulus)
    law = sawtooth_from_ts(ts, method, param, k0=k0)
    result = run_forward(
        mesh,
        material,
        law,
        load_scale=_float(cfg, "forward", "load_scale", 1.0),
        max_events=_int(cfg, "forward", "max_events"),
        response_limit=_float(cfg, "forward", "response_limit"),
        control_drop=_float(cfg, "forward", "control_drop"),
        seed=seed,
    )
    curve = result.loading_curve()
    n = _int(cfg, "forward", "decimate")
    if n is not None:
        curve = decimate_curve(curve, n)
    return result, curve


def experiment_curve(cfg, seed: int) -> LoadingCurve:
    """Curve from [curve] path, or a synthetic one from [law]."""
    path = _get(cfg, "curve", "path")
    if path is None:
        if not cfg.has_section("law"):
            raise ConfigError("inverse analysis needs [curve] path or a [law] section")
        return forward_experiment(cfg, seed)[1]
    units = (_get(cfg, "curve", "control_unit", "N"), _get(cfg, "curve", "response_unit", "mm"))
    columns = None
    if cfg.has_option("curve", "control_column") or cfg.has_option("curve", "response_column"):
        columns = {
            "control": _column(_get(cfg, "curve", "control_column", "0")),
            "response": _column(_get(cfg, "curve", "response_column", "1")),
        }
    return load_curve(path, units=units, columns=columns)


def _column(raw: str):
    return int(raw) if raw.isdigit() else raw


# ---------------------------------------------------------------- commands


def cmd_mesh(cfg, out: Path, seed: int) -> int:
    mesh = build_mesh(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = write_mesh(mesh, out / "mesh.txt")
    print(count_report(mesh))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_forward(cfg, out: Path, seed: int) -> int:
    result, curve = forward_experiment(cfg, seed)
    files = write_forward(result, out)
    files.append(write_curve_csv(curve, out / "experiment.csv"))
    print(f"events={len(result.events)} reason={result.reason} peak_control={result.peak_control!r}")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def _inverse_material(cfg, mesh: Mesh, curve: LoadingCurve, E: float | None = None) -> Material:
    material = build_material(cfg, E)
    if E is None and _bool(cfg, "material", "fit_modulus"):
        fitted = fit_young_modulus(mesh, material, curve, n_initial=_int(cfg, "material", "fit_points", 1))
        log.info("fitted modulus %.6g MPa", fitted)
        material = material.scaled(fitted / material.reference_modulus)
    return material


def cmd_inverse(cfg, out: Path, seed: int) -> int:
    curve = experiment_curve(cfg, seed)
    mesh = build_mesh(cfg)
    material = _inverse_material(cfg, mesh, curve)
    config = build_ident(cfg, seed)
    if _bool(cfg, "ident", "multipass"):
        traces = run_multipass(mesh, material, curve, config, max_passes=_int(cfg, "ident", "max_passes", 3))
    else:
        traces = [run_inverse(mesh, material, curve, config)]
    files = write_outputs(traces, out, experiment=curve, svg=_bool(cfg, "output", "svg", True))
    for row in summarize(traces):
        print(
            f"pass={row['pass']} f_t={row['f_t']:.6g} G_F={row['G_F']:.6g} "
            f"complete={row['complete']} reason={row['reason']} events={row['events']}"
        )
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


SWEEP_HEADER = ("cell", "E", "delta_sigma", "elem_size", "f_t", "G_F", "complete", "reason", "events", "error")


def _sweep_cell(args) -> tuple:
    """One sweep cell; runs in a worker process."""
    index, cfg_text, curve, seed, E, dsig, elem = args
    cfg = _new_config()
    cfg.read_string(cfg_text)
    try:
        mesh = build_mesh(cfg, elem_size=elem)
        material = _inverse_material(cfg, mesh, curve, E)
        tr = run_inverse(mesh, material, curve, build_ident(cfg, seed, dsig))
        return (index, E or "", dsig or "", elem or "", tr.f_t, tr.fracture_energy, tr.complete, tr.reason, len(tr.events), "")
    except (IdentificationError, ValueError) as exc:
        return (index, E or "", dsig or "", elem or "", "", "", False, "error", 0, f"{type(exc).__name__}: {exc}")


def _config_text(cfg) -> str:
    import io

    buf = io.StringIO()
    cfg.write(buf)
    return buf.getvalue()


def cmd_sweep(cfg, out: Path, seed: int, workers: int = 1) -> int:
    axes = {
        "E": [float(v) for v in _list(_get(cfg, "sweep", "E"), "E")] or [None],
        "delta_sigma": _list(_get(cfg, "sweep", "delta_sigma"), "delta_sigma") or [None],
        "elem_size": [float(v) for v in _list(_get(cfg, "sweep", "elem_size"), "elem_size")] or [None],
    }
    if all(v == [None] for v in axes.values()):
        raise ConfigError("[sweep] needs at least one of E, delta_sigma, elem_size")
    curve = experiment_curve(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(curve, out / "experiment.csv")
    text = _config_text(cfg)
    cells = [
        (i, text, curve, seed, E, d, h)
        for i, (E, d, h) in enumerate(itertools.product(axes["E"], axes["delta_sigma"], axes["elem_size"]))
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    rows.sort(key=lambda r: r[0])
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    for r in rows:
        print(" ".join(f"{k}={v}" for k, v in zip(SWEEP_HEADER, r) if v != ""))
    print(f"wrote {path}")
    return EXIT_OK if all(r[7] != "error" for r in rows) else EXIT_ANALYSIS


# ---------------------------------------------------------------- entry


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="INI configuration file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config key")
    common.add_argument("--seed", type=int, help="tie-breaking seed (overrides [run] seed)")
    common.add_argument("--out", "-o", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    common.add_argument("--verbose", "-v", action="count", default=0, help="-v progress, -vv every event")

    parser = argparse.ArgumentParser(prog="sla-inverse", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh", parents=[common], help="generate and write a mesh")
    sub.add_parser("forward", parents=[common], help="sequentially linear forward analysis")
    sub.add_parser("inverse", parents=[common], help="identify a TS curve from a loading curve")
    sweep = sub.add_parser("sweep", parents=[common], help="identification over E, delta_sigma and element size")
    sweep.add_argument("--workers", "-j", type=int, help="parallel sweep cells (overrides [run] workers)")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = read_config(args.config, args.set)
        seed = args.seed if args.seed is not None else _int(cfg, "run", "seed", 0)
        out = Path(args.out or _get(cfg, "run", "out") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
        if args.command == "mesh":
            return cmd_mesh(cfg, out, seed)
        if args.command == "forward":
            return cmd_forward(cfg, out, seed)
        if args.command == "inverse":
            return cmd_inverse(cfg, out, seed)
        workers = args.workers if args.workers is not None else _int(cfg, "run", "workers", 1)
        return cmd_sweep(cfg, out, seed, max(1, workers))
    except IdentificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except ValueError as exc:  # config, mesh, curve and law errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
