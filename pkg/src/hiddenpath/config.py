"""Versioned JSON descriptions of parameter sets, families and grids.

Families are stored as generation recipes (variant, dimensions, seed)
rather than raw coefficient dumps; reconstruction regenerates the
coefficients and cross-checks the stored fingerprint, so a description
can never silently drift from the object it came from.  Grid cells leave
their seeds implicit: cell and family seeds are derived from the global
seed and the cell label, which is what makes a rerun bit-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .fieldcore import Boundary, Modulus, ParameterSet, Vec
from .observables import (
    Composite,
    FamilyError,
    ObservableFamily,
    PostProcessed,
    PostProcessor,
    QuantizedReal,
    compose_postprocess,
    generate_family,
)
from .pathgen import NoiseSpec

GRID_FORMAT = "hiddenpath-grid"
GRID_VERSION = 1


class ConfigError(Exception):
    """Invalid configuration content; message carries the key path."""


def _ctx(path: str, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def _need(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise _ctx(path, f"expected an object, got {type(d).__name__}")
    if key not in d:
        raise _ctx(f"{path}.{key}", "missing")
    return d[key]


def _vec(v, path: str) -> Vec:
    if not isinstance(v, list) or not all(isinstance(c, int) for c in v):
        raise _ctx(path, "expected a list of integers")
    return tuple(v)


def _seed_bytes(s, path: str) -> bytes:
    if not isinstance(s, str):
        raise _ctx(path, "expected a hex string")
    try:
        raw = bytes.fromhex(s)
    except ValueError:
        raise _ctx(path, "invalid hex") from None
    if len(raw) != 32:
        raise _ctx(path, f"seed must be 32 bytes, got {len(raw)}")
    return raw


# ---------------------------------------------------------------------------
# noise and family descriptions
# ---------------------------------------------------------------------------

def noise_to_dict(spec: NoiseSpec) -> dict:
    if not spec.enabled:
        return {"enabled": False}
    return {"enabled": True, "sigma": spec.sigma, "bound": spec.bound}


def noise_from_dict(d: dict, path: str = "noise") -> NoiseSpec:
    enabled = _need(d, "enabled", path)
    if not isinstance(enabled, bool):
        raise _ctx(f"{path}.enabled", "expected a boolean")
    if not enabled:
        return NoiseSpec.disabled()
    sigma = _need(d, "sigma", path)
    bound = _need(d, "bound", path)
    if not isinstance(sigma, (int, float)) or isinstance(sigma, bool):
        raise _ctx(f"{path}.sigma", "expected a number")
    if not isinstance(bound, int) or isinstance(bound, bool):
        raise _ctx(f"{path}.bound", "expected an integer")
    try:
        return NoiseSpec(True, float(sigma), bound)
    except ValueError as exc:
        raise _ctx(path, str(exc)) from None


def family_to_dict(family: ObservableFamily) -> dict:
    """Generation recipe plus fingerprint for drift detection."""
    doc: dict = {"variant": family.variant, "m": family.m, "ell": family.ell,
                 "fingerprint": family.fingerprint().hex()}
    if isinstance(family, Composite):
        doc["parts"] = [family_to_dict(f) for f in family.parts]
        return doc
    if isinstance(family, PostProcessed):
        proc = family.processor
        doc["processor"] = {"kind": proc.kind, "bits": proc.bits,
                            "keep": proc.keep}
        doc["inner"] = family_to_dict(family.inner)
        return doc
    doc["seed"] = family.coeff_seed.hex()
    if isinstance(family, QuantizedReal):
        doc["obs_noise"] = noise_to_dict(family.obs_noise)
    return doc


def family_from_dict(d: dict, *, q: int, n: int, T: int,
                     path: str = "family") -> ObservableFamily:
    variant = _need(d, "variant", path)
    m = _need(d, "m", path)
    ell = _need(d, "ell", path)
    try:
        if variant == "composite":
            parts = [family_from_dict(pd, q=q, n=n, T=T,
                                      path=f"{path}.parts[{i}]")
                     for i, pd in enumerate(_need(d, "parts", path))]
            family: ObservableFamily = Composite.from_parts(parts)
        elif variant == "post_processed":
            pd = _need(d, "processor", path)
            proc = PostProcessor(_need(pd, "kind", f"{path}.processor"),
                                 pd.get("bits"), pd.get("keep"))
            inner = family_from_dict(_need(d, "inner", path), q=q, n=n, T=T,
                                     path=f"{path}.inner")
            family = compose_postprocess(proc, inner)
        else:
            seed = _seed_bytes(_need(d, "seed", path), f"{path}.seed")
            obs_noise = None
            if "obs_noise" in d:
                obs_noise = noise_from_dict(d["obs_noise"],
                                            f"{path}.obs_noise")
            family = generate_family(variant, m, ell, seed, q=q, n=n, T=T,
                                     obs_noise=obs_noise)
    except (FamilyError, ValueError) as exc:
        raise _ctx(path, str(exc)) from None
    if (family.m, family.ell) != (m, ell):
        raise _ctx(path, f"declared shape ({m}, {ell}) does not match "
                         f"reconstructed ({family.m}, {family.ell})")
    want = d.get("fingerprint")
    if want is not None and family.fingerprint().hex() != want:
        raise _ctx(f"{path}.fingerprint",
                   "reconstructed family does not match the stored "
                   "fingerprint (description drifted or was hand-edited)")
    return family


# ---------------------------------------------------------------------------
# parameter sets
# ---------------------------------------------------------------------------

def params_to_dict(p: ParameterSet) -> dict:
    doc: dict = {
        "modulus": p.q,
        "n": p.n,
        "T": p.T,
        "macro_alphabet": [list(v) for v in p.macro_alphabet],
        "micro_alphabet": [list(v) for v in p.micro_alphabet],
        "noise": noise_to_dict(p.noise),
        "seed": p.seed.hex(),
        "encoding_version": p.encoding_version,
    }
    if p.boundary is not None:
        doc["boundary"] = {
            "start": None if p.boundary.start is None else list(p.boundary.start),
            "end": None if p.boundary.end is None else list(p.boundary.end),
        }
    if p.family is not None:
        doc["family"] = family_to_dict(p.family)
    return doc


def params_from_dict(d: dict, path: str = "params",
                     default_seed: bytes | None = None) -> ParameterSet:
    q = _need(d, "modulus", path)
    n = _need(d, "n", path)
    T = _need(d, "T", path)
    for name, val in (("modulus", q), ("n", n), ("T", T)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise _ctx(f"{path}.{name}", "expected an integer")
    macro = [_vec(v, f"{path}.macro_alphabet[{i}]")
             for i, v in enumerate(_need(d, "macro_alphabet", path))]
    micro = [_vec(v, f"{path}.micro_alphabet[{i}]")
             for i, v in enumerate(_need(d, "micro_alphabet", path))]
    noise = noise_from_dict(_need(d, "noise", path), f"{path}.noise")
    if "seed" in d:
        seed = _seed_bytes(d["seed"], f"{path}.seed")
    elif default_seed is not None:
        seed = default_seed
    else:
        raise _ctx(f"{path}.seed", "missing and no derived seed available")
    boundary = None
    if d.get("boundary") is not None:
        bd = d["boundary"]
        start = bd.get("start")
        end = bd.get("end")
        boundary = Boundary(
            None if start is None else _vec(start, f"{path}.boundary.start"),
            None if end is None else _vec(end, f"{path}.boundary.end"))
    family = None
    fd = d.get("family")
    try:
        p = ParameterSet(Modulus(q), n, T, tuple(macro), tuple(micro),
                         noise, seed, family=None, boundary=boundary,
                         encoding_version=d.get("encoding_version", 1))
    except ValueError as exc:
        raise _ctx(path, str(exc)) from None
    if fd is not None:
        family = family_from_dict(fd, q=q, n=n, T=T, path=f"{path}.family")
        p = ParameterSet(p.modulus, n, T, p.macro_alphabet, p.micro_alphabet,
                         noise, seed, family=family, boundary=p.boundary,
                         encoding_version=p.encoding_version)
    return p


def save_params(p: ParameterSet, path: str) -> None:
    doc = {"format": "hiddenpath-params", "version": 1,
           "params": params_to_dict(p)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_params(path: str) -> ParameterSet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("format") != "hiddenpath-params":
        raise ConfigError(f"{path}: not a parameter file")
    if doc.get("version") != 1:
        raise ConfigError(f"{path}: unsupported version {doc.get('version')!r}")
    return params_from_dict(_need(doc, "params", path))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def derive_cell_seed(global_seed: bytes, label: str) -> bytes:
    return hashlib.blake2b(f"cell:{label}".encode(), key=global_seed,
                           digest_size=32).digest()


@dataclass
class GridConfig:
    """A reproducible experiment grid: labeled cells under one global seed."""

    seed: bytes
    output_dir: str
    trials: int
    adversaries: list[str]
    cells: dict[str, dict]
    version: int = GRID_VERSION
    games: list[str] = field(default_factory=lambda: ["ow", "rel"])

    def labels(self) -> list[str]:
        return sorted(self.cells)

    def cell_params(self, label: str) -> ParameterSet:
        """Parameter set for one cell, with label-derived default seeds."""
        if label not in self.cells:
            raise ConfigError(f"cells.{label}: no such cell")
        cell_seed = derive_cell_seed(self.seed, label)
        d = dict(self.cells[label])
        fd = d.get("family")
        if fd is not None and "seed" not in fd \
                and fd.get("variant") not in ("composite", "post_processed"):
            fd = dict(fd)
            fd["seed"] = hashlib.blake2b(b"family", key=cell_seed,
                                         digest_size=32).digest().hex()
            d["family"] = fd
        return params_from_dict(d, path=f"cells.{label}",
                                default_seed=cell_seed)


def grid_from_dict(doc: dict) -> GridConfig:
    if doc.get("format") != GRID_FORMAT:
        raise ConfigError("format: expected "
                          f"{GRID_FORMAT!r}, got {doc.get('format')!r}")
    if doc.get("version") != GRID_VERSION:
        raise ConfigError(f"version: unsupported {doc.get('version')!r}")
    seed = _seed_bytes(_need(doc, "seed", "grid"), "grid.seed")
    trials = _need(doc, "trials", "grid")
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
        raise ConfigError("grid.trials: expected a positive integer")
    advs = doc.get("adversaries", [])
    if not isinstance(advs, list) or not all(isinstance(a, str) for a in advs):
        raise ConfigError("grid.adversaries: expected a list of names")
    games = doc.get("games", ["ow", "rel"])
    if not isinstance(games, list) or not set(games) <= {"ow", "rel"}:
        raise ConfigError('grid.games: expected a sublist of ["ow", "rel"]')
    cells = _need(doc, "cells", "grid")
    if not isinstance(cells, dict) or not cells:
        raise ConfigError("grid.cells: expected a nonempty object")
    cfg = GridConfig(seed, doc.get("output_dir", "."), trials, list(advs),
                     dict(cells), games=list(games))
    for label in cfg.labels():
        cfg.cell_params(label)   # validate every cell up front
    return cfg


def load_grid(path: str) -> GridConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return grid_from_dict(doc)


def save_grid(cfg: GridConfig, path: str) -> None:
    doc = {"format": GRID_FORMAT, "version": cfg.version,
           "seed": cfg.seed.hex(), "output_dir": cfg.output_dir,
           "trials": cfg.trials, "adversaries": cfg.adversaries,
           "games": cfg.games, "cells": cfg.cells}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
