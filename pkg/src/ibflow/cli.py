"""Configuration ingestion, experiment orchestration, result emission.

Configs are strict JSON documents with top-level keys model, command,
params, output, seed. Unknown fields anywhere are errors, physical
parameters have no defaults, and seeds are mandatory: the tool never
draws entropy from the environment, so a config plus a seed pins every
emitted byte. CSV cells use 17 significant digits and re-parse to the
exact written values.

Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from . import covariance, flow_engine, rkhs
from .covariance import IbfModel, ModelError
from .field_sampler import (DegenerateCloudError, DriftEvaluationError,
                            DriftField, drift_from_config)
from .flow_engine import (PairCollapseError, PointCloud, _model_config,
                          drift_config)
from .spectral import KernelEvaluationError, MeasureError, SpectralMeasure

COMMANDS = ("covariance", "check-condition", "verify-identity", "lyapunov",
            "squeeze", "expand", "track-control", "length-decay")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (DegenerateCloudError, PairCollapseError,
                   KernelEvaluationError, DriftEvaluationError,
                   np.linalg.LinAlgError, FloatingPointError)


class ConfigError(ValueError):
    """Config rejected; the message names the offending field."""


@dataclass
class RunConfig:
    command: str
    model: IbfModel
    drift: DriftField | None
    params: dict
    output_dir: str
    seed: int
    echo: dict


# ---------------------------------------------------------------------------
# validation helpers

def _need(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return mapping[key]


def _no_extras(mapping: dict, allowed: set[str], path: str):
    extras = sorted(set(mapping) - allowed)
    if extras:
        raise ConfigError(f"{path}.{extras[0]}: unknown field (strict schema)")


def _as_number(value, path: str, *, minimum=None, maximum=None,
               exclusive_min=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: must be a number, got {value!r}")
    val = float(value)
    if not math.isfinite(val):
        raise ConfigError(f"{path}: must be finite")
    if exclusive_min is not None and not val > exclusive_min:
        raise ConfigError(f"{path}: must be > {exclusive_min}, got {value!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value!r}")
    if maximum is not None and val > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {value!r}")
    return val


def _as_int(value, path: str, *, minimum=None, maximum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value!r}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {value!r}")
    return int(value)


def _parse_measure(spec, path: str) -> SpectralMeasure | None:
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: must be an object with atoms/density")
    _no_extras(spec, {"atoms", "density"}, path)
    atoms = spec.get("atoms", [])
    density = spec.get("density", [])
    for i, atom in enumerate(atoms):
        if not (isinstance(atom, (list, tuple)) and len(atom) == 2):
            raise ConfigError(f"{path}.atoms[{i}]: must be [location, weight]")
        _as_number(atom[0], f"{path}.atoms[{i}].location", exclusive_min=0.0)
        _as_number(atom[1], f"{path}.atoms[{i}].weight", minimum=0.0)
    for i, piece in enumerate(density):
        if not (isinstance(piece, (list, tuple)) and len(piece) == 3):
            raise ConfigError(f"{path}.density[{i}]: must be [lo, hi, height]")
        lo = _as_number(piece[0], f"{path}.density[{i}].lo", exclusive_min=0.0)
        hi = _as_number(piece[1], f"{path}.density[{i}].hi", exclusive_min=lo)
        _as_number(piece[2], f"{path}.density[{i}].height", minimum=0.0)
    try:
        return SpectralMeasure(atoms=tuple(map(tuple, atoms)),
                               density_pieces=tuple(map(tuple, density)))
    except MeasureError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_model(spec, path: str = "model") -> tuple[IbfModel, DriftField | None]:
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: must be an object")
    _no_extras(spec, {"d", "mu0", "mu1", "mu2", "m_p", "m_s", "drift",
                      "allow_trivial"}, path)
    d = _as_int(_need(spec, "d", path), f"{path}.d", minimum=2, maximum=16)
    mu0 = _as_number(_need(spec, "mu0", path), f"{path}.mu0", minimum=0.0)
    mu1 = _as_number(_need(spec, "mu1", path), f"{path}.mu1", minimum=0.0)
    mu2 = _as_number(_need(spec, "mu2", path), f"{path}.mu2", minimum=0.0)
    if abs(mu0 + mu1 + mu2 - 1.0) > 1e-12:
        raise ConfigError(f"{path}: mu0+mu1+mu2 must equal 1")
    m_p = _parse_measure(spec.get("m_p"), f"{path}.m_p")
    m_s = _parse_measure(spec.get("m_s"), f"{path}.m_s")
    allow_trivial = spec.get("allow_trivial", False)
    if not isinstance(allow_trivial, bool):
        raise ConfigError(f"{path}.allow_trivial: must be a boolean")
    try:
        model = covariance.make_model(d, mu0, mu1, mu2, m_p=m_p, m_s=m_s,
                                      allow_trivial=allow_trivial)
    except (ModelError, MeasureError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    drift = None
    if spec.get("drift") is not None:
        drift_spec = spec["drift"]
        if not isinstance(drift_spec, dict):
            raise ConfigError(f"{path}.drift: must be an object")
        try:
            drift = drift_from_config(drift_spec, model)
        except (ModelError, KeyError) as exc:
            raise ConfigError(f"{path}.drift: {exc}") from None
    return model, drift


def _parse_vectors(value, d: int, path: str) -> np.ndarray:
    if not (isinstance(value, list) and value):
        raise ConfigError(f"{path}: must be a non-empty list of {d}-vectors")
    out = []
    for i, vec in enumerate(value):
        if not (isinstance(vec, (list, tuple)) and len(vec) == d):
            raise ConfigError(f"{path}[{i}]: must be a vector of length {d}")
        out.append([_as_number(v, f"{path}[{i}][{k}]")
                    for k, v in enumerate(vec)])
    return np.asarray(out, dtype=float)


def _validate_params(command: str, params: dict, model: IbfModel) -> dict:
    path = "params"
    if not isinstance(params, dict):
        raise ConfigError(f"{path}: must be an object")
    p = dict(params)
    out: dict = {}
    if command == "covariance":
        _no_extras(p, {"s_max", "n_points"}, path)
        out["s_max"] = _as_number(_need(p, "s_max", path), f"{path}.s_max",
                                  exclusive_min=0.0)
        out["n_points"] = _as_int(p.get("n_points", 201), f"{path}.n_points",
                                  minimum=2)
    elif command == "check-condition":
        _no_extras(p, {"rho", "tol"}, path)
        out["rho"] = _as_number(_need(p, "rho", path), f"{path}.rho",
                                exclusive_min=0.0)
        out["tol"] = _as_number(p.get("tol", 1e-8), f"{path}.tol",
                                exclusive_min=0.0)
    elif command == "verify-identity":
        _no_extras(p, {"rhos", "resolution"}, path)
        rhos = _need(p, "rhos", path)
        if not (isinstance(rhos, list) and rhos):
            raise ConfigError(f"{path}.rhos: must be a non-empty list")
        out["rhos"] = [_as_number(r, f"{path}.rhos[{i}]", exclusive_min=0.0)
                       for i, r in enumerate(rhos)]
        default_res = 512 if model.d == 2 else 48
        out["resolution"] = _as_int(p.get("resolution", default_res),
                                    f"{path}.resolution", minimum=1)
    elif command == "lyapunov":
        _no_extras(p, {"T", "dt", "n_pairs", "renorm_eps"}, path)
        out["T"] = _as_number(_need(p, "T", path), f"{path}.T", exclusive_min=0.0)
        out["dt"] = _as_number(_need(p, "dt", path), f"{path}.dt",
                               exclusive_min=0.0, maximum=out["T"])
        out["n_pairs"] = _as_int(_need(p, "n_pairs", path), f"{path}.n_pairs",
                                 minimum=2)
        out["renorm_eps"] = _as_number(p.get("renorm_eps", 1e-4),
                                       f"{path}.renorm_eps",
                                       exclusive_min=1e-8, maximum=1e-2)
    elif command in ("squeeze", "expand"):
        _no_extras(p, {"R", "delta", "T1", "T2", "dt", "n_paths",
                       "n_boundary", "stride"}, path)
        out["R"] = _as_number(_need(p, "R", path), f"{path}.R", exclusive_min=0.0)
        out["delta"] = _as_number(_need(p, "delta", path), f"{path}.delta",
                                  exclusive_min=0.0)
        if out["delta"] >= out["R"]:
            raise ConfigError(f"{path}.delta: must be < R")
        out["T1"] = _as_number(_need(p, "T1", path), f"{path}.T1",
                               exclusive_min=0.0)
        out["T2"] = _as_number(_need(p, "T2", path), f"{path}.T2",
                               exclusive_min=out["T1"])
        out["dt"] = _as_number(_need(p, "dt", path), f"{path}.dt",
                               exclusive_min=0.0, maximum=out["T2"])
        out["n_paths"] = _as_int(_need(p, "n_paths", path), f"{path}.n_paths",
                                 minimum=1)
        out["n_boundary"] = _as_int(p.get("n_boundary", 64),
                                    f"{path}.n_boundary", minimum=8)
        out["stride"] = _as_int(p.get("stride", 10), f"{path}.stride", minimum=1)
    elif command == "track-control":
        _no_extras(p, {"rho", "cs", "T", "dt", "n_paths", "x0", "stride"}, path)
        out["rho"] = _as_number(_need(p, "rho", path), f"{path}.rho",
                                exclusive_min=0.0)
        cs = _need(p, "cs", path)
        if not (isinstance(cs, list) and cs):
            raise ConfigError(f"{path}.cs: must be a non-empty list")
        out["cs"] = [_as_number(c, f"{path}.cs[{i}]", minimum=1.0)
                     for i, c in enumerate(cs)]
        out["T"] = _as_number(_need(p, "T", path), f"{path}.T", exclusive_min=0.0)
        out["dt"] = _as_number(_need(p, "dt", path), f"{path}.dt",
                               exclusive_min=0.0, maximum=out["T"])
        out["n_paths"] = _as_int(_need(p, "n_paths", path), f"{path}.n_paths",
                                 minimum=2)
        out["x0"] = _parse_vectors(_need(p, "x0", path), model.d, f"{path}.x0")
        out["stride"] = _as_int(p.get("stride", 10), f"{path}.stride", minimum=1)
    elif command == "length-decay":
        _no_extras(p, {"T", "dt", "n_paths", "curve", "stride"}, path)
        out["T"] = _as_number(_need(p, "T", path), f"{path}.T", exclusive_min=0.0)
        out["dt"] = _as_number(_need(p, "dt", path), f"{path}.dt",
                               exclusive_min=0.0, maximum=out["T"])
        out["n_paths"] = _as_int(_need(p, "n_paths", path), f"{path}.n_paths",
                                 minimum=1)
        curve = _need(p, "curve", path)
        if not isinstance(curve, dict):
            raise ConfigError(f"{path}.curve: must be an object")
        kind = curve.get("kind")
        if kind == "circle":
            _no_extras(curve, {"kind", "radius", "n_vertices", "center"},
                       f"{path}.curve")
            radius = _as_number(_need(curve, "radius", f"{path}.curve"),
                                f"{path}.curve.radius", exclusive_min=0.0)
            n_vertices = _as_int(_need(curve, "n_vertices", f"{path}.curve"),
                                 f"{path}.curve.n_vertices", minimum=3)
            center = curve.get("center", [0.0] * model.d)
            center = _parse_vectors([center], model.d, f"{path}.curve.center")[0]
            ang = 2.0 * math.pi * np.arange(n_vertices) / n_vertices
            ring = np.zeros((n_vertices, model.d))
            ring[:, 0] = np.cos(ang)
            ring[:, 1] = np.sin(ang)
            out["positions"] = center + radius * ring
            out["closed"] = True
        elif kind == "points":
            _no_extras(curve, {"kind", "positions", "closed"}, f"{path}.curve")
            out["positions"] = _parse_vectors(
                _need(curve, "positions", f"{path}.curve"), model.d,
                f"{path}.curve.positions")
            closed = curve.get("closed", False)
            if not isinstance(closed, bool):
                raise ConfigError(f"{path}.curve.closed: must be a boolean")
            out["closed"] = closed
        else:
            raise ConfigError(f"{path}.curve.kind: must be 'circle' or 'points'")
        if out["positions"].shape[0] < 2:
            raise ConfigError(f"{path}.curve: needs at least two vertices")
        out["stride"] = _as_int(p.get("stride", 10), f"{path}.stride", minimum=1)
    else:
        raise ConfigError(f"command: unknown command {command!r}")
    return out


def _echo_params(command: str, params: dict) -> dict:
    """Validated params back in config form, so a report re-parses."""
    if command != "length-decay":
        return _jsonable(params)
    out = {k: params[k] for k in ("T", "dt", "n_paths", "stride")}
    out["curve"] = {"kind": "points",
                    "positions": params["positions"].tolist(),
                    "closed": params["closed"]}
    return _jsonable(out)


def parse_config(text, command: str | None = None) -> RunConfig:
    """Parse and fully validate a config document (JSON text or dict)."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    else:
        doc = text
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    _no_extras(doc, {"model", "command", "params", "output", "seed"}, "config")

    cfg_command = doc.get("command", command)
    if cfg_command is None:
        raise ConfigError("command: missing (give it in the config or CLI)")
    if cfg_command not in COMMANDS:
        raise ConfigError(f"command: unknown command {cfg_command!r}")
    if command is not None and cfg_command != command:
        raise ConfigError(
            f"command: config says {cfg_command!r} but CLI invoked {command!r}")

    model, drift = _parse_model(_need(doc, "model", "config"))
    params = _validate_params(cfg_command, doc.get("params", {}), model)

    seed = doc.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: a mandatory integer seed is required "
                          "(the tool never draws entropy itself)")

    output = doc.get("output", {})
    if output is None:
        output = {}
    if not isinstance(output, dict):
        raise ConfigError("output: must be an object")
    _no_extras(output, {"dir"}, "output")
    out_dir = output.get("dir", ".")
    if not isinstance(out_dir, str):
        raise ConfigError("output.dir: must be a string")

    echo = {
        "model": _model_config(model),
        "command": cfg_command,
        "params": _echo_params(cfg_command, params),
        "output": {"dir": out_dir},
        "seed": seed,
    }
    if drift is not None:
        echo["model"]["drift"] = drift_config(drift)
    return RunConfig(command=cfg_command, model=model, drift=drift,
                     params=params, output_dir=out_dir, seed=seed, echo=echo)


# ---------------------------------------------------------------------------
# emission

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def write_report(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


def _report_skeleton(cfg: RunConfig, t_start: float) -> dict:
    return {
        "command": cfg.command,
        "config": cfg.echo,
        "aggregate": {},
        "wall_clock": time.perf_counter() - t_start,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# per-command runners

def _run_covariance(cfg: RunConfig, out_dir: Path, jobs: int):
    t0 = time.perf_counter()
    model = cfg.model
    s = np.linspace(0.0, cfg.params["s_max"], cfg.params["n_points"])
    b_l, b_n = covariance.covariance_scalars(model, s)
    per_kind = {}
    for kind in ("PL", "PN", "SL", "SN"):
        measure = model.m_p if kind[0] == "P" else model.m_s
        if measure is None:
            per_kind[kind] = np.full_like(s, math.nan)
        else:
            per_kind[kind] = covariance.b_scalar(model, kind, s)
    rows = zip(s, b_l, b_n, per_kind["PL"], per_kind["PN"],
               per_kind["SL"], per_kind["SN"])
    csv_path = out_dir / "covariance.csv"
    write_csv(csv_path, ["s", "B_L", "B_N", "B_PL", "B_PN", "B_SL", "B_SN"], rows)
    report = _report_skeleton(cfg, t0)
    try:
        fc = covariance.flow_constants(model)
        report["aggregate"] = {"beta_l": fc.beta_l, "beta_n": fc.beta_n,
                               "lambda": fc.lam}
    except ModelError:
        report["aggregate"] = {"note": "trivial model: constants undefined"}
    report_path = out_dir / "covariance_report.json"
    write_report(report_path, report)
    summary = (f"covariance: {len(s)} rows on s in [0, {cfg.params['s_max']}]"
               f" -> {csv_path}")
    return summary, [csv_path, report_path]


def _run_check_condition(cfg: RunConfig, out_dir: Path, jobs: int):
    t0 = time.perf_counter()
    rep = rkhs.check_condition(cfg.model, cfg.params["rho"], cfg.params["tol"])
    zeros = np.asarray(rep.zero_locations_checked)
    rows = []
    if cfg.model.m_p is not None:
        for s, w in cfg.model.m_p.atoms:
            dist = float(np.min(np.abs(zeros - s))) if zeros.size else math.inf
            rows.append(("atom", s, s, w, dist))
        for lo, hi, h in cfg.model.m_p.density_pieces:
            rows.append(("piece", lo, hi, h * (hi - lo), math.nan))
    csv_path = out_dir / "check-condition.csv"
    write_csv(csv_path, ["component", "lo", "hi", "mass",
                         "distance_to_nearest_scaled_zero"], rows)
    report = _report_skeleton(cfg, t0)
    report["aggregate"] = {
        "satisfied": rep.satisfied,
        "witness_mass": rep.witness_mass,
        "zero_locations_checked": list(rep.zero_locations_checked),
    }
    report_path = out_dir / "check-condition_report.json"
    write_report(report_path, report)
    summary = (f"check-condition: satisfied={rep.satisfied} "
               f"witness_mass={rep.witness_mass:.6g}")
    return summary, [csv_path, report_path]


def _run_verify_identity(cfg: RunConfig, out_dir: Path, jobs: int):
    t0 = time.perf_counter()
    rule = rkhs.sphere_rule(cfg.model.d, cfg.params["resolution"])
    rows = []
    worst = 0.0
    for rho in cfg.params["rhos"]:
        lhs, rhs = rkhs.squeeze_functional(cfg.model, rho, rule)
        gap = abs(lhs - rhs) / max(abs(rhs), 1e-6)
        worst = max(worst, gap)
        rows.append((rho, lhs, rhs, gap))
    csv_path = out_dir / "verify-identity.csv"
    write_csv(csv_path, ["rho", "lhs", "rhs", "rel_gap"], rows)
    report = _report_skeleton(cfg, t0)
    report["aggregate"] = {"max_rel_gap": worst,
                           "resolution": cfg.params["resolution"]}
    report_path = out_dir / "verify-identity_report.json"
    write_report(report_path, report)
    summary = f"verify-identity: max relative lhs/rhs gap = {worst:.3e}"
    return summary, [csv_path, report_path]


def _run_lyapunov(cfg: RunConfig, out_dir: Path, jobs: int):
    t0 = time.perf_counter()
    res = flow_engine.lyapunov_estimate(
        cfg.model, T=cfg.params["T"], dt=cfg.params["dt"],
        n_pairs=cfg.params["n_pairs"], renorm_eps=cfg.params["renorm_eps"],
        seed=cfg.seed, jobs=jobs)
    csv_path = out_dir / "lyapunov.csv"
    write_csv(csv_path, ["pair", "estimate"],
              [(i, v) for i, v in enumerate(res.pair_estimates)])
    fc = covariance.flow_constants(cfg.model)
    report = _report_skeleton(cfg, t0)
    report["aggregate"] = {
        "estimate": res.estimate,
        "standard_error": res.standard_error,
        "analytic_lambda": fc.lam,
        "beta_l": fc.beta_l,
        "beta_n": fc.beta_n,
    }
    report_path = out_dir / "lyapunov_report.json"
    write_report(report_path, report)
    summary = (f"lyapunov: estimate = {res.estimate:.5f} "
               f"+/- {res.standard_error:.5f} (analytic {fc.lam:.5f})")
    return summary, [csv_path, report_path]


def _run_squeeze(cfg: RunConfig, out_dir: Path, jobs: int):
    mode = cfg.command
    p = cfg.params
    rep = flow_engine.squeeze_experiment(
        cfg.model, R=p["R"], delta=p["delta"], T1=p["T1"], T2=p["T2"],
        n_boundary=p["n_boundary"], dt=p["dt"], n_paths=p["n_paths"],
        drift=cfg.drift, seed=cfg.seed, snapshot_stride=p["stride"],
        mode=mode, jobs=jobs)
    rows = []
    for i, path in enumerate(rep.paths):
        for t, diam, flag in zip(path.times, path.diameters,
                                 path.containment_flags):
            rows.append((i, t, diam, flag))
    csv_path = out_dir / f"{mode}.csv"
    write_csv(csv_path, ["path", "t", "diam", "contained"], rows)
    payload = rep.to_dict()
    payload["config"] = {**cfg.echo, "experiment": payload.pop("config")}
    report_path = out_dir / f"{mode}_report.json"
    write_report(report_path, payload)
    ag = rep.aggregate
    summary = (f"{mode}: success {ag['success_count']}/{ag['n_paths']} "
               f"= {ag['success_frequency']:.3f} "
               f"(wilson {ag['wilson_low']:.3f}-{ag['wilson_high']:.3f})")
    return summary, [csv_path, report_path]


def _run_track_control(cfg: RunConfig, out_dir: Path, jobs: int):
    t0 = time.perf_counter()
    p = cfg.params
    x0 = PointCloud(positions=p["x0"])
    rows = []
    means = []
    per_c = {}
    for c in p["cs"]:
        res = flow_engine.tilted_tracking_error(
            cfg.model, rho=p["rho"], c=c, x0=x0, T=p["T"], dt=p["dt"],
            n_paths=p["n_paths"], seed=cfg.seed, snapshot_stride=p["stride"],
            jobs=jobs)
        means.append(res.mean)
        per_c[str(c)] = {"mean": res.mean, "se": res.standard_error}
        rows.extend((c, i, dev) for i, dev in enumerate(res.sup_deviations))
    slope = math.nan
    if len(p["cs"]) >= 2:
        slope = float(np.polyfit(np.log(p["cs"]), np.log(means), 1)[0])
    csv_path = out_dir / "track-control.csv"
    write_csv(csv_path, ["c", "path", "sup_deviation"], rows)
    report = _report_skeleton(cfg, t0)
    report["aggregate"] = {"per_c": per_c, "slope": slope}
    report_path = out_dir / "track-control_report.json"
    write_report(report_path, report)
    summary = f"track-control: log-log slope = {slope:.3f} over c = {p['cs']}"
    return summary, [csv_path, report_path]


def _run_length_decay(cfg: RunConfig, out_dir: Path, jobs: int):
    p = cfg.params
    curve = PointCloud(positions=p["positions"])
    rep = flow_engine.length_decay_experiment(
        cfg.model, curve, T=p["T"], dt=p["dt"], n_paths=p["n_paths"],
        seed=cfg.seed, snapshot_stride=p["stride"], closed=p["closed"],
        jobs=jobs)
    rows = []
    for i, path in enumerate(rep.paths):
        for t, diam, length in zip(path.times, path.diameters, path.lengths):
            rows.append((i, t, diam, length))
    csv_path = out_dir / "length-decay.csv"
    write_csv(csv_path, ["path", "t", "diam", "length"], rows)
    payload = rep.to_dict()
    payload["config"] = {**cfg.echo, "experiment": payload.pop("config")}
    report_path = out_dir / "length-decay_report.json"
    write_report(report_path, payload)
    ag = rep.aggregate
    summary = (f"length-decay: shrink fraction {ag['shrink_fraction']:.2f}, "
               f"terminal rate mean {ag['terminal_rate_mean']:.4f}")
    return summary, [csv_path, report_path]


_RUNNERS = {
    "covariance": _run_covariance,
    "check-condition": _run_check_condition,
    "verify-identity": _run_verify_identity,
    "lyapunov": _run_lyapunov,
    "squeeze": _run_squeeze,
    "expand": _run_squeeze,
    "track-control": _run_track_control,
    "length-decay": _run_length_decay,
}


def run_command(command: str, cfg: RunConfig, jobs: int = 1,
                out_dir: str | None = None, quiet: bool = False):
    """Execute one subcommand; returns (exit_code, written paths)."""
    target = Path(out_dir if out_dir is not None else cfg.output_dir)
    target.mkdir(parents=True, exist_ok=True)
    summary, files = _RUNNERS[command](cfg, target, jobs)
    if not quiet:
        print(summary)
    return EXIT_OK, files


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ibflow",
        description="Isotropic Brownian flow experiments from JSON configs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} command")
        cmd.add_argument("--config", required=True, help="path to JSON config")
        cmd.add_argument("--jobs", type=int, default=1,
                         help="worker pool size (default 1)")
        cmd.add_argument("--out", default=None,
                         help="output directory (overrides config)")
        cmd.add_argument("--quiet", action="store_true",
                         help="suppress the summary line")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, command=args.command)
        code, _ = run_command(args.command, cfg, jobs=args.jobs,
                              out_dir=args.out, quiet=args.quiet)
        return code
    except (ConfigError, MeasureError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
