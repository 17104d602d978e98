"""Built-in scenarios, one per experiment of the reference setup."""
from __future__ import annotations

import math

import numpy as np

from .biloc import A_FIXED, BA_FIXED, Scenario
from .errors import InvalidInputError
from .frames import CANONICAL_TRIAD
from .qcore import NoiseModel, singlet

R2 = math.sqrt(2)
X = np.array([1.0, 0.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])

PRESETS = ("separable-singlet", "false-positive", "rfi-2233", "rfi-3333")


def separable_singlet(noise: NoiseModel | None = None) -> Scenario:
    """Singlet wings, single-qubit measurements only: B = sqrt(2) ideally."""
    outer = np.array([(X + Z) / R2, (X - Z) / R2])
    sub = np.array([X, Z])
    return Scenario.from_vectors(singlet(), singlet(), outer, sub, sub, outer, noise)


def rfi_2233(c_rotation=None, noise: NoiseModel | None = None) -> Scenario:
    """Calibrated A wing, triads at B^C and C (C optionally rotated)."""
    c = CANONICAL_TRIAD if c_rotation is None else CANONICAL_TRIAD @ np.asarray(c_rotation).T
    return Scenario.from_vectors(singlet(), singlet(), A_FIXED, BA_FIXED, CANONICAL_TRIAD, c, noise)


def rfi_3333(a_rotation=None, c_rotation=None, noise: NoiseModel | None = None) -> Scenario:
    """Triads at all four stations (outer triads optionally rotated)."""
    rot = lambda r: CANONICAL_TRIAD if r is None else CANONICAL_TRIAD @ np.asarray(r).T  # noqa: E731
    return Scenario.from_vectors(
        singlet(), singlet(), rot(a_rotation), CANONICAL_TRIAD, CANONICAL_TRIAD, rot(c_rotation), noise
    )


def scenario_preset(name: str, noise: NoiseModel | None = None) -> Scenario:
    if name == "separable-singlet":
        return separable_singlet(noise)
    if name == "rfi-2233":
        return rfi_2233(noise=noise)
    if name == "rfi-3333":
        return rfi_3333(noise=noise)
    if name == "false-positive":
        raise InvalidInputError("false-positive is a classical strategy, not a quantum scenario")
    raise InvalidInputError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
