"""Run-record serialization and config handling.

All numeric output is written with explicit repr-roundtrip formatting so that
identical configs and seeds produce bit-identical files.  The binary blob
layouts are little-endian with fixed headers, documented in README.md:

  checkpoint:  magic b'NLSCHK1\\0' | float64 t | uint32 n | float64 dr |
               n complex128 psi values
  branch blob: magic b'NLSBRN1\\0' | uint32 n | float64 dr | uint32 n_samples |
               per sample: float64 E, float64 w, n float64 Q, n float64 R
"""

from __future__ import annotations

import json
import struct
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CHECKPOINT_MAGIC = b"NLSCHK1\x00"
BRANCH_MAGIC = b"NLSBRN1\x00"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns: dict) -> None:
    """Write named columns (equal-length 1-D arrays) as CSV."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = arrays[0].shape[0]
    if any(a.shape[0] != n for a in arrays):
        raise ConfigurationError("CSV columns have unequal lengths")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(a[i]) for a in arrays) + "\n")


def read_csv(path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise ConfigurationError(f"empty CSV file {path}")
        names = header.split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(names)))
    return {name: data[:, j] for j, name in enumerate(names)}


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def write_checkpoint(path, t: float, psi: np.ndarray, dr: float) -> None:
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<dId", float(t), psi.size, float(dr)))
        fh.write(psi.astype("<c16").tobytes())


def read_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise ConfigurationError(f"{path}: not a field checkpoint")
        t, n, dr = struct.unpack("<dId", fh.read(20))
        psi = np.frombuffer(fh.read(16 * n), dtype="<c16").copy()
    return t, psi, dr


def write_branch_blob(path, branch) -> None:
    samples = list(branch.samples)
    n = samples[0].Q.size
    dr = samples[0].grid.dr
    with open(path, "wb") as fh:
        fh.write(BRANCH_MAGIC)
        fh.write(struct.pack("<IdI", n, float(dr), len(samples)))
        for gs in samples:
            fh.write(struct.pack("<dd", gs.E, gs.w))
            fh.write(gs.Q.astype("<f8").tobytes())
            fh.write(gs.R.astype("<f8").tobytes())


def read_branch_blob(path):
    with open(path, "rb") as fh:
        if fh.read(8) != BRANCH_MAGIC:
            raise ConfigurationError(f"{path}: not a branch blob")
        n, dr, n_samples = struct.unpack("<IdI", fh.read(16))
        out = []
        for _ in range(n_samples):
            E, w = struct.unpack("<dd", fh.read(16))
            Q = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
            R = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
            out.append({"E": E, "w": w, "Q": Q, "R": R})
    return {"n": n, "dr": dr, "samples": out}


# -- config ------------------------------------------------------------------

DEFAULT_CONFIG = {
    "potential": {"shape": "gaussian_well", "depth": 20.0, "width": 1.0},
    "grid": {"r_max": 60.0, "n": 1199},
    "fgr_grid": {"r_max": 600.0, "n": 2999},
    "physics": {"lambda": 0.4, "mass": 9.0, "E": None, "gauge": True},
    "cap": {"enabled": True, "start_radius": 42.0, "strength": 2.5, "power": 2.0},
    "radiation": {
        "grid_r_max": 220.0,
        "grid_n": 2199,
        "dt": 2.0e-3,
        "cap_start": 150.0,
        "cap_strength": 0.35,
        "cap_power": 2.0,
    },
    "scenario": {
        "kind": "resonance",
        "eps": 0.4,
        "chi_norm": 0.25,
        "eta0_rel": 0.5,
        "T": None,
        "dt": 4.0e-3,
        "stride_t": 1.0,
        "seed": 7,
        "sigma": 0.1,
        "t_transient": None,
        "snapshots": 8,
    },
    "nf": {"d21_im": 0.0, "d1_im": 0.0},
    "output": {"dir": None},
}


def _merge_validated(base: dict, override: dict, path: str = "") -> dict:
    out = {}
    for key, val in base.items():
        out[key] = val
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigurationError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigurationError(f"{here} must be a table/object")
            out[key] = _merge_validated(base[key], val, here)
        else:
            out[key] = val
    return out


def load_config(path=None, overrides=()) -> dict:
    """Resolve the run config: defaults <- file (TOML or JSON) <- --set pairs."""
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))   # deep copy
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file not found: {p}")
        if p.suffix.lower() == ".json":
            loaded = json.loads(p.read_text())
        else:
            with open(p, "rb") as fh:
                loaded = tomllib.load(fh)
        cfg = _merge_validated(cfg, loaded)
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigurationError(f"unknown config key: {key}")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node:
            raise ConfigurationError(f"unknown config key: {key}")
        node[leaf] = _coerce(raw, node[leaf])
    return cfg


def _coerce(raw: str, template):
    if raw == "null" or raw == "none":
        return None
    if isinstance(template, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(template, int) and not isinstance(template, bool):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if template is None:
        try:
            return float(raw)
        except ValueError:
            return raw
    return raw
