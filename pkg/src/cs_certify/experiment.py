"""Experiment orchestration: presets, config validation, artifacts.

A JSON config selects a modality preset, grid size, sweep axes and
trial counts; running it emits three deterministic artifacts into the
output directory:

* ``certificates.csv``: per mask realization recovery thresholds with
  mean/stddev aggregate rows;
* ``phase_transition.csv``: decoder success rates per
  (basis, mask, ratio, sparsity) cell;
* ``manifest.json``: the fully resolved configuration; re-running from
  the manifest reproduces every artifact byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bases, certify, masks, recovery
from .errors import ConfigError, ParameterError

__all__ = [
    "ModalityPreset",
    "PRESETS",
    "validate_config",
    "resolve_config",
    "run_experiment",
    "CERT_HEADER",
    "PHASE_HEADER",
]

CERT_HEADER = "basis,mask,ratio,trial,delta_sq,k_max,method,solver_status"
PHASE_HEADER = "modality,basis,mask,ratio,k,trials,successes,success_rate,seed"

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModalityPreset:
    """Sampling bases, admissible masks, sparsifier and default grid
    for one imaging architecture."""

    name: str
    sampling_bases: tuple
    mask_kinds: tuple
    sparsifier: str
    default_size: int


PRESETS = {
    "ci_camera": ModalityPreset(
        "ci_camera",
        ("walsh_hadamard", "bernoulli", "gaussian"),
        ("uniform_random",),
        "daubechies_wavelet",
        32,
    ),
    "rapid_mri": ModalityPreset(
        "rapid_mri",
        ("fourier",),
        ("radial", "uniform_random", "density_varied"),
        "daubechies_wavelet",
        32,
    ),
    "coded_aperture": ModalityPreset(
        "coded_aperture",
        ("mura_circulant",),
        ("down_sample", "uniform_random"),
        "identity",
        31,
    ),
}


def _version():
    try:
        return metadata.version("cs-certify")
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


# ---------------------------------------------------------------------------
# configuration

def validate_config(doc):
    """Collect schema diagnostics as (json_path, message) pairs.

    An empty list means :func:`run_experiment` will accept the config.
    """
    diags = []
    if not isinstance(doc, dict):
        return [("$", "config must be a JSON object")]

    preset_name = doc.get("preset")
    preset = PRESETS.get(preset_name)
    if preset is None:
        diags.append((".preset", f"unknown preset {preset_name!r}; "
                                 f"expected one of {sorted(PRESETS)}"))
        return diags

    size = doc.get("image_size", [preset.default_size, preset.default_size])
    if (not isinstance(size, (list, tuple)) or len(size) != 2
            or any(not isinstance(v, int) or v < 2 for v in size)):
        diags.append((".image_size", "expected two integers >= 2"))
        size = [preset.default_size, preset.default_size]
    m, n = size

    basis_kinds = doc.get("bases", list(preset.sampling_bases))
    for b_idx, kind in enumerate(basis_kinds):
        if kind not in preset.sampling_bases:
            diags.append((f".bases[{b_idx}]",
                          f"{kind!r} is not part of preset {preset_name}"))
            continue
        if kind == "walsh_hadamard" and (m & (m - 1) or n & (n - 1)):
            diags.append((f".bases[{b_idx}]",
                          f"power-of-two required for Walsh-Hadamard, got {m}x{n}"))
        if kind == "mura_circulant" and not (bases._is_prime(m) and m == n):
            diags.append((f".bases[{b_idx}]",
                          f"prime square grid required for the aperture basis, got {m}x{n}"))
        if kind == "fourier" and m != n:
            diags.append((f".bases[{b_idx}]", "square grid required"))

    if preset.sparsifier == "daubechies_wavelet" and (m % 2 or n % 2 or m < 4):
        diags.append((".image_size", "wavelet sparsifier needs even sizes >= 4"))

    mask_kinds = doc.get("masks", list(preset.mask_kinds))
    for k_idx, kind in enumerate(mask_kinds):
        if kind not in preset.mask_kinds:
            diags.append((f".masks[{k_idx}]",
                          f"{kind!r} is not part of preset {preset_name}"))

    ratios = doc.get("ratios", [])
    for r_idx, r in enumerate(ratios):
        if not isinstance(r, (int, float)) or not 0.0 < r < 1.0:
            diags.append((f".ratios[{r_idx}]", f"ratio must lie in (0, 1), got {r}"))
        elif "down_sample" in mask_kinds and r > recovery.DOWN_SAMPLE_RATIO_CAP:
            diags.append((f".ratios[{r_idx}]",
                          f"down-sampling caps the ratio at "
                          f"{recovery.DOWN_SAMPLE_RATIO_CAP}, got {r}"))
    lines = doc.get("lines", [])
    for l_idx, L in enumerate(lines):
        if not isinstance(L, int) or L < 1:
            diags.append((f".lines[{l_idx}]", f"line count must be >= 1, got {L}"))
    strides = doc.get("strides", [])
    for s_idx, s in enumerate(strides):
        if not isinstance(s, int) or s < 2:
            diags.append((f".strides[{s_idx}]", f"stride must be >= 2, got {s}"))
    if not ratios and not lines and not strides:
        diags.append((".ratios", "at least one sweep axis "
                                 "(ratios, lines or strides) is required"))

    sparsities = doc.get("sparsities", [])
    if not sparsities:
        diags.append((".sparsities", "at least one sparsity is required"))
    for s_idx, k in enumerate(sparsities):
        if not isinstance(k, int) or not 1 <= k < m * n:
            diags.append((f".sparsities[{s_idx}]",
                          f"sparsity must be an integer in [1, {m * n}), got {k}"))

    for key, low in (("trials", 1), ("certificate_trials", 0), ("seed", 0)):
        val = doc.get(key, low)
        if not isinstance(val, int) or val < low:
            diags.append((f".{key}", f"expected an integer >= {low}, got {val}"))
    return diags


def resolve_config(doc):
    """Fill defaults; returns the manifest-ready configuration."""
    diags = validate_config(doc)
    if diags:
        raise ConfigError(diags)
    preset = PRESETS[doc["preset"]]
    out = {
        "schema_version": SCHEMA_VERSION,
        "package_version": _version(),
        "preset": preset.name,
        "image_size": list(doc.get("image_size",
                                   [preset.default_size, preset.default_size])),
        "bases": list(doc.get("bases", preset.sampling_bases)),
        "masks": list(doc.get("masks", preset.mask_kinds)),
        "sparsifier": preset.sparsifier,
        "ratios": [float(r) for r in doc.get("ratios", [])],
        "lines": [int(v) for v in doc.get("lines", [])],
        "strides": [int(v) for v in doc.get("strides", [])],
        "sparsities": [int(k) for k in doc.get("sparsities", [])],
        "trials": int(doc.get("trials", 10)),
        "certificate_trials": int(doc.get("certificate_trials",
                                          doc.get("trials", 10))),
        "seed": int(doc.get("seed", 0)),
        "certify": bool(doc.get("certify", True)),
        "recover": bool(doc.get("recover", True)),
        "sdp": {
            "tol": float(doc.get("sdp", {}).get("tol", 1e-6)),
            # thresholds are O(1..N); three digits is plenty for curves
            "gap_tol": float(doc.get("sdp", {}).get("gap_tol", 1e-3)),
            "max_iter": int(doc.get("sdp", {}).get("max_iter", 50_000)),
        },
        "bp": {
            "conv_tol": float(doc.get("bp", {}).get("conv_tol", 1e-7)),
            "max_iter": int(doc.get("bp", {}).get("max_iter", 20_000)),
            "success_tol": float(doc.get("bp", {}).get("success_tol", 1e-3)),
        },
        "seed_derivation": "SeedSequence([seed, stream, unit, (k,) trial])",
    }
    return out


def _axes_for(config, mask_kind):
    cfg = dict(config)
    if mask_kind == "radial":
        if not cfg["lines"]:
            raise ConfigError([(".lines", "radial sweeps need line counts")])
        return {"lines": tuple(cfg["lines"]), "ratios": (), "strides": ()}
    if mask_kind == "down_sample":
        if cfg["strides"]:
            return {"lines": (), "ratios": (), "strides": tuple(cfg["strides"])}
        usable = [r for r in cfg["ratios"]
                  if r <= recovery.DOWN_SAMPLE_RATIO_CAP]
        if not usable:
            raise ConfigError([(".ratios", "no ratio at or below the "
                                           "down-sampling cap of 0.25")])
        return {"lines": (), "ratios": tuple(usable), "strides": ()}
    if not cfg["ratios"]:
        raise ConfigError([(".ratios", f"{mask_kind} sweeps need ratios")])
    return {"lines": (), "ratios": tuple(cfg["ratios"]), "strides": ()}


def _phase_config(config, basis_kind, mask_kind):
    axes = _axes_for(config, mask_kind)
    bp = recovery.BpOptions(
        conv_tol=config["bp"]["conv_tol"],
        max_iter=config["bp"]["max_iter"],
        success_tol=config["bp"]["success_tol"],
    )
    return recovery.PhaseTransitionConfig(
        modality=config["preset"],
        basis=basis_kind,
        mask=mask_kind,
        image_size=tuple(config["image_size"]),
        sparsities=tuple(config["sparsities"]),
        trials=config["trials"],
        seed=config["seed"],
        ratios=axes["ratios"],
        lines=axes["lines"],
        strides=axes["strides"],
        sparsifier=config["sparsifier"],
        bp=bp,
    )


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _certificate_rows(config, basis_kind, mask_kind):
    """Threshold rows for every (sweep position, mask realization)."""
    phase_cfg = _phase_config(config, basis_kind, mask_kind)
    units = recovery._ratio_units(phase_cfg)
    opts = certify.SdpOptions(tol=config["sdp"]["tol"],
                              gap_tol=config["sdp"]["gap_tol"],
                              max_iter=config["sdp"]["max_iter"])
    deterministic = (
        mask_kind in ("radial", "down_sample")
        and basis_kind not in ("bernoulli", "gaussian")
    )
    n_trials = 1 if deterministic else max(1, config["certificate_trials"])
    rows = []
    for unit_idx, (axis_ratio, mask_params) in enumerate(units):
        values = []
        for trial in range(n_trials):
            system = recovery.build_modality_system(phase_cfg, mask_params, trial)
            ratio = axis_ratio if axis_ratio is not None else float(
                masks.mask_ratio(system.mask)
            )
            cert = certify.ssp_sdp_lower_bound(system.A, opts)
            delta = cert.delta_sq
            values.append(delta)
            rows.append(",".join([
                basis_kind, mask_kind, _fmt(float(ratio)), str(trial),
                _fmt(delta), str(cert.k_max), cert.method, cert.status,
            ]))
        finite = [v for v in values if math.isfinite(v)]
        mean = float(np.mean(finite)) if finite else math.inf
        std = float(np.std(finite)) if len(finite) > 1 else 0.0
        ratio_str = _fmt(float(axis_ratio)) if axis_ratio is not None else _fmt(ratio)
        rows.append(",".join([
            basis_kind, mask_kind, ratio_str, "mean", _fmt(mean),
            str(certify.recovery_kmax(mean) if math.isfinite(mean) else -1),
            "sdp_relaxation", "aggregate",
        ]))
        rows.append(",".join([
            basis_kind, mask_kind, ratio_str, "stddev", _fmt(std), "-1",
            "sdp_relaxation", "aggregate",
        ]))
    return rows


def _phase_rows(config, basis_kind, mask_kind):
    phase_cfg = _phase_config(config, basis_kind, mask_kind)
    result = recovery.phase_transition(phase_cfg)
    rows = []
    for cell in result.cells:
        rows.append(",".join([
            config["preset"], basis_kind, mask_kind, _fmt(cell.ratio),
            str(cell.k), str(cell.trials), str(cell.successes),
            _fmt(cell.success_rate), str(config["seed"]),
        ]))
    return rows


def _run_combo(args):
    config, basis_kind, mask_kind = args
    cert_rows = (
        _certificate_rows(config, basis_kind, mask_kind)
        if config["certify"] else []
    )
    phase_rows = (
        _phase_rows(config, basis_kind, mask_kind)
        if config["recover"] else []
    )
    return cert_rows, phase_rows


def run_experiment(config_or_path, out_dir, jobs=1):
    """Execute a configuration (or a previously written manifest).

    Returns 0 on success.  Config violations raise ConfigError before
    any file is written; downstream failures leave partial artifacts
    plus a manifest marked failed, and return 1.  ``jobs`` > 1 fans the
    independent (basis, mask) sweeps over a process pool; results are
    collected in a fixed order so the artifacts do not depend on it.
    """
    if isinstance(config_or_path, (str, Path)):
        doc = json.loads(Path(config_or_path).read_text())
    else:
        doc = dict(config_or_path)
    if "config" in doc and "artifacts" in doc:
        doc = doc["config"]  # manifest replay
    config = resolve_config(doc)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cert_path = out_dir / "certificates.csv"
    phase_path = out_dir / "phase_transition.csv"
    manifest_path = out_dir / "manifest.json"

    combos = [(b, mk) for b in config["bases"] for mk in config["masks"]]
    cert_rows, phase_rows = [], []
    status = "complete"
    failure = None
    try:
        work = [(config, b, mk) for b, mk in combos]
        if jobs and jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_run_combo, work))
        else:
            results = [_run_combo(item) for item in work]
        for crows, prows in results:
            cert_rows.extend(crows)
            phase_rows.extend(prows)
    except ConfigError:
        raise
    except Exception as exc:  # keep partial artifacts, mark the manifest
        status = "failed"
        failure = f"{type(exc).__name__}: {exc}"

    artifacts = []
    if config["certify"]:
        cert_path.write_text("\n".join([CERT_HEADER] + cert_rows) + "\n")
        artifacts.append(cert_path.name)
    if config["recover"]:
        phase_path.write_text("\n".join([PHASE_HEADER] + phase_rows) + "\n")
        artifacts.append(phase_path.name)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "status": status,
        "config": config,
        "artifacts": sorted(artifacts),
    }
    if failure:
        manifest["error"] = failure
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0 if status == "complete" else 1


def parse_csv_rows(path, header):
    """Round-trip reader for the emitted CSV schemas."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != header:
        raise ParameterError(f"{path} does not carry the expected header")
    names = header.split(",")
    return [dict(zip(names, line.split(","))) for line in lines[1:]]
