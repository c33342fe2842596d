"""Command-line driver: seeded pipeline runs with reproducible CSV artifacts.

Three subcommands:

``spectral-eta run <config.json> [--out DIR] [--threads N]``
    Execute the pipeline named in the config and write ``results.csv``
    (one reported quantity or check per row), ``samples.csv`` (plot
    series as ``series,x,y`` rows) and ``meta.json`` (config echo,
    versions, timings) into the output directory.  Runs are
    deterministic: the same config yields byte-identical CSV files;
    wall-clock data lives only in ``meta.json``.

``spectral-eta report <DIR>``
    Read the artifacts of a previous run, write one two-column ``.dat``
    file per sample series (plus a combined multi-column file for
    eigenvalue-flow levels) and print the results table.

``spectral-eta verify-all [--quick]``
    Run the numbered acceptance scenarios end to end, one line each.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 the
configuration or artifact directory is unusable, 3 the numerics gave up
(unstable fit, lost eigenvalue tracking, degenerate spectrum, ...).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import platform
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (
    ConfigError,
    DegenerateSpectrum,
    FitUnstable,
    NearPole,
    NoSignal,
    SingularBoundaryOperator,
    SpectralEtaError,
    StencilStraddlesCrossing,
    TrackingFailed,
)
from .etazeta import (
    EtaConfig,
    pair_spectra,
    reduced_eta,
    relative_eta_invariant,
    relative_zeta_invariant,
)
from .flow import (
    even_coefficient_check,
    spectral_flow,
    spectral_shift,
    variation_check,
    variation_coefficient,
)
from .gluing import default_theta_grid, gluing_check, mod2z_check, theta_xi_scan
from .lattice import (
    SIGMA1,
    SIGMA3,
    Grid,
    Potential,
    build_dirac_1d,
    build_dirac_2d,
    distance_to_origin,
    gaussian_profile,
    make_pair,
    make_path,
    path_between,
    raw_pair,
)
from .spectral import sample_relative_trace, spectral_gap

RESULTS_NAME = "results.csv"
SAMPLES_NAME = "samples.csv"
META_NAME = "meta.json"

# Sample series that get a log-scale companion file and a fitted tail
# slope in their .dat header.
TRACE_SERIES = ("weighted-relative-trace", "relative-trace")

# Errors that mean the numerics gave up on an otherwise well-posed job.
# Every other SpectralEtaError signals an unusable model or config.
NUMERIC_ERRORS = (
    DegenerateSpectrum,
    FitUnstable,
    NearPole,
    NoSignal,
    SingularBoundaryOperator,
    StencilStraddlesCrossing,
    TrackingFailed,
)

CONFIG_KEYS = {"pipeline", "seed", "model", "numerics"}
GRID_KEYS = {"points", "spacing", "topology", "origin"}
PROFILE_KEYS = {"amplitude", "center", "width", "cutoff"}
ETA_KEYS = {
    "t_cut", "window_decades", "n_samples", "k_max", "fit_mode",
    "tail_mode", "kernel_tol", "residue_tol", "pole_window",
}
EXTRA_NUMERIC_KEYS = {
    "theta_points", "r_points", "initial_steps", "fd_step", "side",
    "parity_r", "parity_k_max",
}
MODEL_KEYS = {
    "dirac1d": {"kind", "grid", "potential", "scheme", "mixing", "patch", "cut"},
    "dirac2d": {"kind", "grid", "potential", "scheme", "patch", "cut"},
    "raw-matrix": {"kind", "dim", "gap", "block_scale", "a0", "a1", "cut"},
}

FLOW_LEVELS = 24  # eigenvalue branches kept in the sf spaghetti series


# --- result rows and deterministic formatting --------------------------------


@dataclass
class ResultRow:
    """One results.csv line: a reported quantity or a toleranced check."""

    quantity: str
    value: float
    tolerance: float | None  # None marks an informational row
    status: str  # "PASS" / "FAIL" / "INFO"


def _info(quantity: str, value) -> ResultRow:
    return ResultRow(quantity, value, None, "INFO")


def _check(quantity: str, residual: float, tolerance: float) -> ResultRow:
    status = "PASS" if residual <= tolerance else "FAIL"
    return ResultRow(quantity, residual, tolerance, status)


def _fmt(value) -> str:
    """Render a number with a fixed 17-significant-digit layout.

    Integers print plainly; everything else uses a fixed-width
    scientific form so reruns of the same config are byte-identical.
    """
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return np.format_float_scientific(float(value), precision=16, unique=False)


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# --- config parsing -----------------------------------------------------------


def _load_json(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("the top-level config must be a JSON object")
    return data


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"{context} is missing required key {key!r}")
    return mapping[key]


def _section(mapping: dict, key: str) -> dict:
    value = mapping.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section {key!r} must be a JSON object")
    return value


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown {context} key(s): {', '.join(unknown)}")


def _numerics(config: dict) -> tuple[EtaConfig, dict]:
    spec = _section(config, "numerics")
    _reject_unknown(spec, ETA_KEYS | EXTRA_NUMERIC_KEYS, "numerics")
    kwargs = {key: spec[key] for key in ETA_KEYS if key in spec}
    try:
        cfg = EtaConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numerics section: {exc}") from exc
    extras = {key: spec[key] for key in EXTRA_NUMERIC_KEYS if key in spec}
    return cfg, extras


# --- model construction --------------------------------------------------------


@dataclass
class ModelBundle:
    """Operator pair plus the optional extras some pipelines need."""

    kind: str
    pair: object
    path: object | None = None
    cut: int | None = None


def _build_grid(spec: dict, dim: int) -> Grid:
    _reject_unknown(spec, GRID_KEYS, "grid")
    points = int(_require(spec, "points", "grid"))
    spacing = float(_require(spec, "spacing", "grid"))
    default_topology = "truncated-line" if dim == 1 else "periodic"
    topology = str(spec.get("topology", default_topology))
    if "origin" in spec:
        origin = tuple(float(v) for v in np.atleast_1d(spec["origin"]))
    else:
        origin = tuple(-0.5 * points * spacing for _ in range(dim))
    if len(origin) != dim:
        raise ConfigError(f"grid origin needs {dim} coordinate(s)")
    try:
        return Grid(dim, points, spacing, topology, origin)
    except (ValueError, SpectralEtaError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def _profile_values(spec: dict, grid: Grid, context: str) -> np.ndarray:
    if not isinstance(spec, dict):
        raise ConfigError(f"{context} must be a JSON object")
    _reject_unknown(spec, PROFILE_KEYS, context)
    amplitude = float(_require(spec, "amplitude", context))
    center = _require(spec, "center", context)
    width = float(_require(spec, "width", context))
    cutoff = float(spec.get("cutoff", 3.0))
    return gaussian_profile(grid, amplitude, center, width, cutoff=cutoff)


def _potential_values(spec: dict, grid: Grid) -> np.ndarray:
    form = str(_require(spec, "form", "potential"))
    if form == "constant":
        return np.full(grid.n_nodes, float(_require(spec, "value", "potential")))
    if form == "inline":
        values = np.asarray(_require(spec, "values", "potential"), dtype=float).ravel()
        if values.size != grid.n_nodes:
            raise ConfigError(
                f"inline potential needs {grid.n_nodes} values, got {values.size}"
            )
        return values
    if form == "radial-distance":
        return distance_to_origin(grid)
    raise ConfigError(f"unknown potential form {form!r}")


def _model_cut(spec: dict) -> int | None:
    if "cut" not in spec:
        return None
    cut = spec["cut"]
    if not isinstance(cut, int) or isinstance(cut, bool):
        raise ConfigError("model cut must be an integer node index")
    return cut


def _build_dirac1d(spec: dict) -> ModelBundle:
    grid = _build_grid(_section(spec, "grid"), dim=1)
    values = _potential_values(_section(spec, "potential"), grid)
    scheme = str(spec.get("scheme", "central-difference"))
    if "mixing" in spec:
        off_diag = _profile_values(spec["mixing"], grid, "mixing")
        blocks = (values[:, None, None] * SIGMA3[None, :, :]
                  + off_diag[:, None, None] * SIGMA1[None, :, :])
        base = build_dirac_1d(grid, Potential.from_blocks(blocks), scheme)
    else:
        base = build_dirac_1d(grid, values, scheme)
    patch = _profile_values(_require(spec, "patch", "dirac1d model"), grid, "patch")
    return ModelBundle("dirac1d", make_pair(base, patch),
                       make_path(base, patch), _model_cut(spec))


def _build_dirac2d(spec: dict) -> ModelBundle:
    grid = _build_grid(_section(spec, "grid"), dim=2)
    values = _potential_values(_section(spec, "potential"), grid)
    # The spectral scheme keeps the full symbol on the torus; the 2D
    # demo pipelines rely on it, so it is the default here.
    scheme = str(spec.get("scheme", "spectral"))
    base = build_dirac_2d(grid, values, scheme)
    patch = _profile_values(_require(spec, "patch", "dirac2d model"), grid, "patch")
    return ModelBundle("dirac2d", make_pair(base, patch),
                       make_path(base, patch), _model_cut(spec))


def _seeded_pair(rng: np.random.Generator, dim: int, gap: float,
                 block_scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Invertible Hermitian pair differing on a contiguous index block."""

    def hermitian(k: int, scale: float) -> np.ndarray:
        m = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        return scale * 0.5 * (m + m.conj().T)

    lam, vec = np.linalg.eigh(hermitian(dim, 2.0))
    lam = np.sign(lam) * (gap + np.abs(lam))
    m0 = (vec * lam) @ vec.conj().T
    width = max(4, dim // 3)
    while True:
        lo = int(rng.integers(0, dim - width))
        bump = np.zeros((dim, dim), dtype=complex)
        bump[lo:lo + width, lo:lo + width] = hermitian(width, block_scale)
        m1 = m0 + bump
        if np.abs(np.linalg.eigvalsh(m1)).min() >= gap / 2.0:
            return m0, m1


def _build_raw(spec: dict, rng: np.random.Generator) -> ModelBundle:
    inline = "a0" in spec or "a1" in spec
    if inline:
        a0 = np.asarray(_require(spec, "a0", "raw-matrix model"), dtype=float)
        a1 = np.asarray(_require(spec, "a1", "raw-matrix model"), dtype=float)
        for name, m in (("a0", a0), ("a1", a1)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigError(f"raw-matrix {name} must be a square matrix")
        pair = raw_pair(a0, a1)
    else:
        dim = int(spec.get("dim", 48))
        gap = float(spec.get("gap", 0.05))
        block_scale = float(spec.get("block_scale", 1.0))
        if dim < 8:
            raise ConfigError("raw-matrix dim must be at least 8")
        if gap <= 0:
            raise ConfigError("raw-matrix gap must be positive")
        pair = raw_pair(*_seeded_pair(rng, dim, gap, block_scale))
    return ModelBundle("raw-matrix", pair, path_between(pair), _model_cut(spec))


def build_model(spec: dict, rng: np.random.Generator) -> ModelBundle:
    if not spec:
        raise ConfigError("config needs a 'model' section")
    kind = str(_require(spec, "kind", "model"))
    if kind not in MODEL_KEYS:
        known = ", ".join(sorted(MODEL_KEYS))
        raise ConfigError(f"unknown model kind {kind!r} (expected one of {known})")
    _reject_unknown(spec, MODEL_KEYS[kind], f"{kind} model")
    if kind == "dirac1d":
        return _build_dirac1d(spec)
    if kind == "dirac2d":
        return _build_dirac2d(spec)
    return _build_raw(spec, rng)


def _require_cut(bundle: ModelBundle, pipeline: str) -> int:
    if bundle.cut is None:
        raise ConfigError(f"pipeline {pipeline!r} needs model key 'cut'")
    return bundle.cut


# --- pipelines ----------------------------------------------------------------


def _trace_series(pair, cfg: EtaConfig, weighted: bool,
                  points: int = 96) -> list:
    """(t, relative trace) samples from short time out past the decay knee."""
    s0, s1, _ = pair_spectra(pair, cfg)
    try:
        t_hi = max(cfg.t_cut, 20.0 / spectral_gap((s0, s1)) ** 2)
    except DegenerateSpectrum:
        t_hi = cfg.t_cut
    t_grid = np.geomspace(1e-4 * cfg.t_cut, t_hi, points)
    traces = sample_relative_trace((s0, s1), t_grid, weighted=weighted)
    name = "weighted-relative-trace" if weighted else "relative-trace"
    return [(name, float(t), float(v))
            for t, v in zip(traces.t_grid, traces.values)]


def _pipe_releta(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    eta = relative_eta_invariant(bundle.pair, cfg)
    k0, k1 = eta.kernel_dims
    rows = [
        _info("eta0", eta.finite_part),
        _info("xi", reduced_eta(eta)),
        _info("kernel-dim-0", k0),
        _info("kernel-dim-1", k1),
        _check("residue-magnitude", abs(eta.residue), cfg.residue_tol),
    ]
    return rows, _trace_series(bundle.pair, cfg, weighted=True)


def _pipe_relzeta(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    zeta0 = relative_zeta_invariant(bundle.pair, cfg)
    s0, s1, _ = pair_spectra(bundle.pair, cfg)
    k0, k1 = s0.counts()[1], s1.counts()[1]
    # The kernel-corrected value at zero counts nonzero states, so it
    # must land on k0 - k1; the least-squares route only fits it.
    tolerance = 1e-8 if cfg.fit_mode == "exact-taylor" else 0.25
    rows = [
        _info("zeta0", zeta0),
        _info("kernel-dim-0", k0),
        _info("kernel-dim-1", k1),
        _check("counting-identity", abs(zeta0 - float(k0 - k1)), tolerance),
    ]
    return rows, _trace_series(bundle.pair, cfg, weighted=False)


def _level_series(path, r_points: int, max_levels: int = FLOW_LEVELS) -> list:
    """Eigenvalue branches nearest zero along the path, sorted per step."""
    rs = np.linspace(0.0, 1.0, r_points)
    keep = min(path.base.dim, max_levels)
    levels = np.empty((len(rs), keep))
    for i, r in enumerate(rs):
        lam = np.linalg.eigvalsh(path.at(float(r)).matrix)
        nearest = np.argsort(np.abs(lam), kind="stable")[:keep]
        levels[i] = np.sort(lam[nearest])
    return [(f"level-{j:02d}", float(rs[i]), float(levels[i, j]))
            for j in range(keep) for i in range(len(rs))]


def _pipe_sf(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    flow = spectral_flow(bundle.path,
                         initial_steps=int(extras.get("initial_steps", 8)),
                         kernel_tol=cfg.kernel_tol)
    eta = relative_eta_invariant(bundle.pair, cfg)
    xi = reduced_eta(eta)
    k0, k1 = eta.kernel_dims
    rows = [
        _info("sf", flow.sf),
        _info("crossings", len(flow.crossings)),
        _info("min-matching-gap", flow.min_matching_gap),
        _info("xi", xi),
        _info("kernel-dim-0", k0),
        _info("kernel-dim-1", k1),
    ]
    if k0 == 0 and k1 == 0:
        tolerance = 1e-8 if cfg.fit_mode == "exact-taylor" else 1e-2
        rows.append(_check("flow-matches-xi", abs(xi - flow.sf), tolerance))
    return rows, _level_series(bundle.path, int(extras.get("r_points", 33)))


def _pipe_ssf(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    shift = spectral_shift(bundle.pair)
    left, right = shift.near_zero_values()
    s0, s1, _ = pair_spectra(bundle.pair, cfg)
    k0, k1 = s0.counts()[1], s1.counts()[1]
    rows = [
        _info("sigma-left-of-zero", left),
        _info("sigma-right-of-zero", right),
        _info("kernel-dim-0", k0),
        _info("kernel-dim-1", k1),
        _check("kernel-step", abs(float(right - left) - float(k0 - k1)), 1e-12),
    ]
    samples = [("shift-function", float(shift.breakpoints[i]), float(v))
               for i, v in enumerate(shift.values)]
    return rows, samples


def _pipe_variation(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    fd_step = float(extras.get("fd_step", 1e-3))
    worst = variation_check(bundle.path, config=cfg, fd_step=fd_step,
                            kernel_tol=cfg.kernel_tol)
    tolerance = 1e-6 if cfg.fit_mode == "exact-taylor" else 0.1
    rows = [_check("variation-identity", worst, tolerance)]
    samples = []
    for r in np.linspace(0.0, 1.0, int(extras.get("r_points", 17))):
        fit = variation_coefficient(bundle.path, float(r), cfg)
        samples.append(("variation-coefficient", float(r),
                        float(fit.coeffs[fit.n])))
    return rows, samples


def _pipe_glue(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    cut = _require_cut(bundle, "glue")
    side = str(extras.get("side", "left"))
    report = gluing_check(bundle.pair, cut, side=side, config=cfg)
    defect = report.xi_relative - report.xi_piece_0 - report.xi_piece_1
    rows = [
        _info("xi-relative", report.xi_relative),
        _info("xi-piece-0", report.xi_piece_0),
        _info("xi-piece-1", report.xi_piece_1),
        _info("integer-defect", defect),
        _check("defect-integer-distance", report.residual, 0.05),
    ]
    return rows, []


def _pipe_theta_scan(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    cut = _require_cut(bundle, "theta-scan")
    grid = default_theta_grid(int(extras.get("theta_points", 9)))
    scan = theta_xi_scan(bundle.pair, cut, theta_grid=grid)
    rows = [_check("lifted-constancy", scan.sup_variation, 1e-3)]
    samples = [("xi-lifted", float(t), float(v))
               for t, v in zip(scan.thetas, scan.xi_lifted)]
    samples += [("xi-raw", float(t), float(v))
                for t, v in zip(scan.thetas, scan.xi_raw)]
    return rows, samples


def _pipe_example_r2(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    if bundle.kind != "dirac2d":
        raise ConfigError("pipeline 'example-r2' needs a dirac2d model")
    eta = relative_eta_invariant(bundle.pair, cfg)
    k0, k1 = eta.kernel_dims
    flow = spectral_flow(bundle.path,
                         initial_steps=int(extras.get("initial_steps", 8)),
                         kernel_tol=cfg.kernel_tol)
    identity = abs(eta.finite_part - (2.0 * flow.sf - float(k1 - k0)))
    parity_cfg = EtaConfig(window_decades=4.0, n_samples=60,
                           kernel_tol=cfg.kernel_tol)
    parity = even_coefficient_check(bundle.path,
                                    float(extras.get("parity_r", 0.35)),
                                    config=parity_cfg,
                                    k_max=int(extras.get("parity_k_max", 12)))
    rows = [
        _info("eta0", eta.finite_part),
        _info("sf", flow.sf),
        _info("kernel-dim-0", k0),
        _info("kernel-dim-1", k1),
        _check("flow-counting-identity", identity, 1e-6),
        _info("ladder-leading-index", parity.leading_index),
        _info("ladder-leading-coeff", parity.leading_coeff),
        _check("off-ladder-ratio", parity.ratio, 1e-2),
    ]
    return rows, _trace_series(bundle.pair, cfg, weighted=True)


def _pipe_mod2z(bundle: ModelBundle, cfg: EtaConfig, extras: dict):
    report = mod2z_check(bundle.pair, config=cfg,
                         initial_steps=int(extras.get("initial_steps", 8)))
    k0, k1 = report.kernel_dims
    tolerance = 1e-8 if cfg.fit_mode == "exact-taylor" else 1e-2
    rows = [
        _info("eta0", report.eta0),
        _info("sf", report.sf),
        _info("kernel-dim-0", k0),
        _info("kernel-dim-1", k1),
        _info("class-value", report.value),
        _info("exact-residual", report.exact_residual),
        _check("mod-two-distance", report.mod2_residual, tolerance),
    ]
    return rows, []


PIPELINES = {
    "releta": _pipe_releta,
    "relzeta": _pipe_relzeta,
    "sf": _pipe_sf,
    "ssf": _pipe_ssf,
    "variation": _pipe_variation,
    "glue": _pipe_glue,
    "theta-scan": _pipe_theta_scan,
    "example-r2": _pipe_example_r2,
    "mod2z": _pipe_mod2z,
}


def run_pipeline(config: dict) -> tuple[list[ResultRow], list, dict]:
    """Build the model, run the named pipeline, return rows + samples."""
    _reject_unknown(config, CONFIG_KEYS, "config")
    name = str(_require(config, "pipeline", "config"))
    if name not in PIPELINES:
        known = ", ".join(sorted(PIPELINES))
        raise ConfigError(f"unknown pipeline {name!r} (expected one of {known})")
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    cfg, extras = _numerics(config)
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    bundle = build_model(_section(config, "model"), rng)
    built = time.perf_counter()
    rows, samples = PIPELINES[name](bundle, cfg, extras)
    finished = time.perf_counter()
    timings = {
        "build_seconds": round(built - started, 6),
        "pipeline_seconds": round(finished - built, 6),
    }
    return rows, samples, timings


# --- artifact writing and reading ----------------------------------------------


def write_artifacts(out_dir: Path, config: dict, rows: list[ResultRow],
                    samples: list, timings: dict, threads: int | None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    result_lines = [
        (row.quantity, _fmt(row.value),
         "" if row.tolerance is None else _fmt(row.tolerance), row.status)
        for row in rows
    ]
    _write_atomic(out_dir / RESULTS_NAME,
                  _csv_text(("quantity", "value", "tolerance", "status"),
                            result_lines))
    sample_lines = [(series, _fmt(x), _fmt(y)) for series, x, y in samples]
    _write_atomic(out_dir / SAMPLES_NAME,
                  _csv_text(("series", "x", "y"), sample_lines))
    meta = {
        "config": config,
        "pipeline": config["pipeline"],
        "threads": threads if threads is not None else "library-default",
        "timings_seconds": timings,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "numpy": np.__version__,
            "python": platform.python_version(),
            "scipy": scipy.__version__,
            "spectral-eta": __version__,
        },
    }
    _write_atomic(out_dir / META_NAME,
                  json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read_results(path: Path) -> list[ResultRow]:
    rows = []
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            for record in csv.DictReader(handle):
                tol = record["tolerance"]
                raw = record["value"]
                value = int(raw) if raw.lstrip("+-").isdigit() else float(raw)
                rows.append(ResultRow(
                    record["quantity"], value,
                    None if tol == "" else float(tol), record["status"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path} is not a results file: {exc}") from exc
    return rows


def _read_samples(path: Path) -> dict:
    series: dict[str, tuple[list, list]] = {}
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            for record in csv.DictReader(handle):
                xs, ys = series.setdefault(record["series"], ([], []))
                xs.append(float(record["x"]))
                ys.append(float(record["y"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path} is not a samples file: {exc}") from exc
    return series


def _tail_fit_header(xs: list, ys: list) -> str | None:
    """Straight-line fit of ln|y| over the trailing nonzero samples."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    live = np.abs(y) > 0.0
    if live.sum() < 4:
        return None
    x, y = x[live], np.log(np.abs(y[live]))
    count = max(6, x.size // 3)
    slope, intercept = np.polyfit(x[-count:], y[-count:], 1)
    return (f"# tail-fit: ln|y| ~ {_fmt(slope)} * x + {_fmt(intercept)} "
            f"(last {count} nonzero samples)")


def _write_series_dat(out_dir: Path, name: str, xs: list, ys: list) -> Path:
    lines = [f"# series: {name}", f"# points: {len(xs)}"]
    if name in TRACE_SERIES:
        header = _tail_fit_header(xs, ys)
        if header is not None:
            lines.append(header)
    lines.extend(f"{_fmt(x)} {_fmt(y)}" for x, y in zip(xs, ys))
    path = out_dir / f"{name}.dat"
    _write_atomic(path, "\n".join(lines) + "\n")
    return path


def _write_levels_dat(out_dir: Path, series: dict, names: list) -> Path:
    xs0 = series[names[0]][0]
    for name in names:
        if series[name][0] != xs0:
            raise ConfigError("flow level series have mismatched r grids")
    lines = ["# columns: r " + " ".join(names)]
    for i, x in enumerate(xs0):
        values = " ".join(_fmt(series[name][1][i]) for name in names)
        lines.append(f"{_fmt(x)} {values}")
    path = out_dir / "flow-levels.dat"
    _write_atomic(path, "\n".join(lines) + "\n")
    return path


def _print_summary(rows: list[ResultRow], stream) -> None:
    if not rows:
        print("no results", file=stream)
        return
    width = max(len("quantity"), max(len(r.quantity) for r in rows))
    print(f"{'quantity':<{width}}  {'value':>23}  {'tolerance':>9}  status",
          file=stream)
    for row in rows:
        tol = "" if row.tolerance is None else f"{row.tolerance:.1e}"
        print(f"{row.quantity:<{width}}  {_fmt(row.value):>23}  {tol:>9}  "
              f"{row.status}", file=stream)


# --- thread control -------------------------------------------------------------


def _resolve_threads(flag_value: int | None) -> int | None:
    """SPECTRAL_ETA_THREADS wins over --threads; None means library default."""
    env = os.environ.get("SPECTRAL_ETA_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(
                f"SPECTRAL_ETA_THREADS must be an integer, got {env!r}") from exc
    else:
        value = flag_value
    if value is not None and value < 1:
        raise ConfigError("thread count must be a positive integer")
    return value


def _thread_limit(threads: int | None):
    if threads is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        print("threadpoolctl is not installed; thread limit ignored",
              file=sys.stderr)
        return contextlib.nullcontext()
    return threadpool_limits(limits=threads)


# --- subcommands ----------------------------------------------------------------


def cmd_run(args) -> int:
    config = _load_json(Path(args.config))
    threads = _resolve_threads(args.threads)
    with _thread_limit(threads):
        rows, samples, timings = run_pipeline(config)
    out_dir = Path(args.out)
    write_artifacts(out_dir, config, rows, samples, timings, threads)
    _print_summary(rows, sys.stdout)
    print(f"wrote {out_dir / RESULTS_NAME}, {out_dir / SAMPLES_NAME}, "
          f"{out_dir / META_NAME}")
    failures = sum(row.status == "FAIL" for row in rows)
    if failures:
        print(f"{failures} check(s) out of tolerance", file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.dir)
    paths = [out_dir / name for name in (RESULTS_NAME, SAMPLES_NAME, META_NAME)]
    for path in paths:
        if not path.is_file():
            raise ConfigError(f"missing artifact: {path}")
    rows = _read_results(paths[0])
    series = _read_samples(paths[1])
    written = []
    level_names = sorted(name for name in series if name.startswith("level-"))
    if level_names:
        written.append(_write_levels_dat(out_dir, series, level_names))
    for name in series:
        if name in level_names:
            continue
        written.append(_write_series_dat(out_dir, name, *series[name]))
    _print_summary(rows, sys.stdout)
    for path in written:
        print(f"wrote {path}")
    return 1 if any(row.status == "FAIL" for row in rows) else 0


def cmd_verify_all(args) -> int:
    from .acceptance import run_all

    reports = run_all(quick=args.quick, stream=sys.stdout)
    return 0 if all(report.passed for report in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-eta",
        description="Relative spectral invariants for discretized "
                    "Dirac-type operator pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser(
        "run", help="execute one pipeline from a JSON config")
    run_parser.add_argument("config", help="path to the JSON config file")
    run_parser.add_argument("--out", default="out",
                            help="output directory (default: ./out)")
    run_parser.add_argument("--threads", type=int, default=None,
                            help="BLAS thread cap (SPECTRAL_ETA_THREADS wins)")

    report_parser = sub.add_parser(
        "report", help="render .dat series files from a finished run")
    report_parser.add_argument("dir", help="output directory of a previous run")

    verify_parser = sub.add_parser(
        "verify-all", help="run the numbered acceptance scenarios")
    verify_parser.add_argument("--quick", action="store_true",
                               help="smaller sizes and fewer random draws")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "report": cmd_report,
               "verify-all": cmd_verify_all}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except SpectralEtaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
