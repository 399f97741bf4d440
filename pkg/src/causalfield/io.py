"""Binary field/perturbation/region files and JSON configuration.

Layout of the binary container: a 4-byte little-endian header length,
the UTF-8 JSON header, then the raw payload blocks in header order as
little-endian float64 row-major arrays (bit-packed rows for region
masks).  The header records the window geometry, the support box and,
for perturbations, the admissibility class.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import (KineticPerturbation, Region, _upper_pairs,
                       check_admissible)
from .grid import Box, LatticeField, LatticeSpec

MAGIC = "causalfield"
FORMAT_VERSION = 1


def _lattice_header(lattice: LatticeSpec) -> dict:
    return {"shape": list(lattice.shape), "dx": lattice.dx, "dt": lattice.dt,
            "m": lattice.m, "c_max": lattice.c_max,
            "boundary": lattice.boundary}


def _lattice_from_header(h: dict) -> LatticeSpec:
    return LatticeSpec(tuple(h["shape"]), h["dx"], h["dt"], h["m"],
                       h["c_max"], h["boundary"])


def _box_or_none(box: Box | None):
    return None if box is None else [list(box.lo), list(box.hi)]


def _write_container(path, header: dict, blocks: list[np.ndarray]):
    header = dict(header)
    header["magic"] = MAGIC
    header["version"] = FORMAT_VERSION
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for block in blocks:
            fh.write(np.ascontiguousarray(block).tobytes())


def _read_container(path):
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    if header.get("magic") != MAGIC:
        raise ConfigError(f"{path}: not a causalfield container")
    return header, payload


def write_field(path, field: LatticeField):
    header = {
        "kind": "field",
        "lattice": _lattice_header(field.lattice),
        "support": _box_or_none(field.support),
        "blocks": [{"name": "data", "dtype": "<f8",
                    "shape": list(field.lattice.shape)}],
    }
    _write_container(path, header, [field.data.astype("<f8")])


def read_field(path) -> LatticeField:
    header, payload = _read_container(path)
    if header["kind"] != "field":
        raise ConfigError(f"{path}: expected a field container")
    lattice = _lattice_from_header(header["lattice"])
    data = np.frombuffer(payload, dtype="<f8").reshape(lattice.shape)
    return LatticeField(lattice, data.copy())


def write_perturbation(path, pert: KineticPerturbation):
    rep = check_admissible(pert)
    ds = pert.ds
    blocks = [("p00", pert.p00)]
    for i in range(ds):
        blocks.append((f"pvec{i}", pert.pvec[..., i]))
    for k, (i, j) in enumerate(_upper_pairs(ds)):
        blocks.append((f"pmat{i}{j}", pert.pupper[..., k]))
    blocks.append(("q", pert.q))
    header = {
        "kind": "perturbation",
        "lattice": _lattice_header(pert.lattice),
        "support": _box_or_none(pert.support),
        "admissible": rep.passed,
        "epsilon": rep.epsilon,
        "blocks": [{"name": n, "dtype": "<f8",
                    "shape": list(pert.lattice.shape)} for n, _ in blocks],
    }
    _write_container(path, header, [b.astype("<f8") for _, b in blocks])


def read_perturbation(path) -> KineticPerturbation:
    header, payload = _read_container(path)
    if header["kind"] != "perturbation":
        raise ConfigError(f"{path}: expected a perturbation container")
    lattice = _lattice_from_header(header["lattice"])
    n = int(np.prod(lattice.shape))
    ds = lattice.d - 1
    arrays = np.frombuffer(payload, dtype="<f8").reshape(-1, *lattice.shape)
    names = [b["name"] for b in header["blocks"]]
    by_name = {name: arrays[i].copy() for i, name in enumerate(names)}
    if arrays.shape[0] * n != np.frombuffer(payload, dtype="<f8").size:
        raise ConfigError(f"{path}: payload size mismatch")
    pvec = np.stack([by_name[f"pvec{i}"] for i in range(ds)], axis=-1)
    pupper = np.stack([by_name[f"pmat{i}{j}"] for (i, j) in _upper_pairs(ds)],
                      axis=-1)
    return KineticPerturbation(lattice, by_name["p00"], pvec, pupper,
                               by_name["q"])


def write_region(path, region: Region):
    packed = np.packbits(region.mask.reshape(region.lattice.n_t, -1), axis=1)
    header = {
        "kind": "region",
        "lattice": _lattice_header(region.lattice),
        "support": _box_or_none(region.hull()),
        "packed_shape": list(packed.shape),
        "blocks": [{"name": "mask", "dtype": "u1",
                    "shape": list(packed.shape)}],
    }
    _write_container(path, header, [packed.astype("u1")])


def read_region(path) -> Region:
    header, payload = _read_container(path)
    if header["kind"] != "region":
        raise ConfigError(f"{path}: expected a region container")
    lattice = _lattice_from_header(header["lattice"])
    packed = np.frombuffer(payload, dtype="u1").reshape(header["packed_shape"])
    flat = np.unpackbits(packed, axis=1)[:, :int(np.prod(lattice.shape[1:]))]
    return Region(lattice, flat.reshape(lattice.shape).astype(bool))


def load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def append_phase_log(path, triple_id: str, value: complex, defect: float,
                     cutoffs: dict):
    """One JSON line per measured phase."""
    entry = {"triple": triple_id, "alpha_re": value.real,
             "alpha_im": value.imag, "defect": defect, "cutoffs": cutoffs}
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


def read_phase_log(path) -> list[dict]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def parse_solver_config(cfg) -> dict:
    """Solver configuration: {"window": {...}, "dx": .., "dt": .., "tol":
    .., "refinement_levels": ..}; returns the lattice plus solve knobs."""
    if not isinstance(cfg, dict):
        cfg = load_json(cfg)
    try:
        win = cfg["window"]
        lattice = LatticeSpec(tuple(win["shape"]), cfg["dx"], cfg["dt"],
                              win.get("m", 1.0), win.get("c_max", 1.0),
                              win.get("boundary", "zero"))
    except KeyError as exc:
        raise ConfigError(f"solver config misses {exc}") from exc
    return {"lattice": lattice, "tol": float(cfg.get("tol", 1e-7)),
            "refinement_levels": int(cfg.get("refinement_levels", 1))}


def load_factorization_scenario(path) -> dict:
    """Verification scenario file: perturbation file references for P, Q
    and optionally N, the expected causal relation, probe file references
    and tolerances.  Referenced paths are resolved next to the file."""
    cfg = load_json(path)
    base = Path(path).parent
    out = {"expected_relation": cfg.get("expected_relation", "succeeds"),
           "tolerances": cfg.get("tolerances", {})}
    for key in ("P", "Q", "N"):
        ref = cfg.get(key)
        out[key] = None if ref is None else read_perturbation(base / ref)
    probes = []
    for ref in cfg.get("probes", []):
        probes.append(read_field(base / ref))
    if not probes:
        raise ConfigError(f"{path}: scenario lists no probes")
    out["probes"] = probes
    return out
