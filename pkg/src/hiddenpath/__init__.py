"""Workbench for exact recovery experiments on noisy hidden paths over Z_q^n.

Modules:
    fieldcore    vectors, exact linear algebra mod q, parameters, encoding
    pathgen      deterministic randomness, noise, sampling, path iteration
    observables  observable families and the public wire format
    oracle       exhaustive enumeration, fiber tables, exact counting
    infometrics  entropy, guessing, bounds, security estimates
    attacks      the structural attack taxonomy
    games        recovery games, scoring, adversaries
    cli          command-line front end
"""

from .fieldcore import (
    AliasError,
    Boundary,
    CapExceeded,
    CompositeModulusError,
    EncodingError,
    FieldMatrix,
    InconsistentSystemError,
    Modulus,
    ParameterSet,
    Vec,
    decode_object,
    encode_object,
)
from .pathgen import MicroObject, NoiseSpec, RandomSource, iterate_path, sample_object
from .observables import PublicObservable, eval_observable, generate_family
from .oracle import EnumerationGuard, build_fiber_table, support_size
from .infometrics import posterior_stats, security_bits
from .attacks import AttackReport, affine_attack, dp_attack, mitm_split
from .games import run_paired_games, score_recovery
from .config import ConfigError, load_grid, load_params, save_params

__all__ = [
    "AliasError", "Boundary", "CapExceeded", "CompositeModulusError",
    "EncodingError", "FieldMatrix", "InconsistentSystemError", "Modulus",
    "ParameterSet", "Vec", "decode_object", "encode_object",
    "MicroObject", "NoiseSpec", "RandomSource", "iterate_path",
    "sample_object", "PublicObservable", "eval_observable", "generate_family",
    "EnumerationGuard", "build_fiber_table", "support_size",
    "posterior_stats", "security_bits",
    "AttackReport", "affine_attack", "dp_attack", "mitm_split",
    "run_paired_games", "score_recovery",
    "ConfigError", "load_grid", "load_params", "save_params",
]

__version__ = "0.1.0"
