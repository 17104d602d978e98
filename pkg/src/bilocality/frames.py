"""Measurement directions, orthonormal triads and frame rotations.

Vectors are plain length-3 float arrays; a triad is a 3x3 array whose
*rows* are the three Bloch vectors. The batched helpers (``*_triads``)
take arrays of angles and return arrays of shape ``(n, 3, 3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .qcore import PAULI_VECTOR

UNIT_TOL = 1e-12
TRIAD_TOL = 1e-10
TWO_PI = 2 * math.pi

STATIONS = ("A", "BA", "BC", "C")
CANONICAL_TRIAD = np.eye(3)


def bloch_vector(v) -> np.ndarray:
    """Validate and return ``v`` as a unit 3-vector."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise InvalidInputError(f"Bloch vector must be 3 finite reals, got {v!r}")
    if abs(np.linalg.norm(v) - 1) > UNIT_TOL:
        raise InvalidInputError(f"Bloch vector {v} is not unit norm")
    return v


def normalized(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def observable_from_bloch(v) -> np.ndarray:
    """The dichotomic observable ``v . sigma`` with outcomes +1 and -1."""
    v = bloch_vector(v)
    return sum(c * s for c, s in zip(v, PAULI_VECTOR))


def is_triad(m, tol: float = TRIAD_TOL) -> bool:
    """True for a right-handed orthonormal triad (rows)."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        return False
    return bool(np.allclose(m @ m.T, np.eye(3), atol=tol, rtol=0) and abs(np.linalg.det(m) - 1) <= tol)


def is_rotation(r, tol: float = TRIAD_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    return r.shape == (3, 3) and bool(
        np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0) and abs(np.linalg.det(r) - 1) <= tol
    )


@dataclass(frozen=True)
class MeasurementFrame:
    """Ordered measurement directions used by one station."""

    station: str
    vectors: np.ndarray

    def __post_init__(self):
        if self.station not in STATIONS:
            raise InvalidInputError(f"unknown station {self.station!r}")
        vecs = np.array(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[1] != 3 or not 2 <= len(vecs) <= 4:
            raise InvalidInputError(
                f"station {self.station} needs 2 to 4 Bloch vectors, got shape {vecs.shape}"
            )
        for v in vecs:
            bloch_vector(v)
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.vectors)

    @property
    def triad_flag(self) -> bool:
        return len(self.vectors) >= 3 and is_triad(self.vectors[:3])


@dataclass(frozen=True)
class FrameParams:
    """Angles of the frame parametrisation (radians).

    ``beta`` sets the B^C triad, ``gamma1``/``gamma2`` the C triad. The A-side
    mirror (``beta_a``, ``alpha1``, ``alpha2``) is only used when both wings
    are misaligned.
    """

    beta: float
    gamma1: float
    gamma2: float
    beta_a: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None

    def __post_init__(self):
        for name in ("beta", "gamma1", "gamma2", "beta_a", "alpha1", "alpha2"):
            val = getattr(self, name)
            if val is not None and not math.isfinite(val):
                raise InvalidInputError(f"{name} must be finite")

    def canonical(self) -> "FrameParams":
        """Same parameters reduced to [0, 2*pi)."""
        wrap = lambda a: None if a is None else a % TWO_PI  # noqa: E731
        return FrameParams(*(wrap(getattr(self, k)) for k in
                             ("beta", "gamma1", "gamma2", "beta_a", "alpha1", "alpha2")))


def substation_triads(beta) -> np.ndarray:
    """Batched substation triads: in-plane rotation by ``beta`` with fixed z axis."""
    beta = np.asarray(beta, dtype=float)
    s, c = np.sin(beta), np.cos(beta)
    zero, one = np.zeros_like(beta), np.ones_like(beta)
    x = np.stack([s, -c, zero], -1)
    y = np.stack([c, s, zero], -1)
    z = np.stack([zero, zero, one], -1)
    return np.stack([x, y, z], -2)


def outer_triads(gamma1, gamma2) -> np.ndarray:
    """Batched triads for the outer station (A or C), two angles each."""
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    s1, c1, s2, c2 = np.sin(g1), np.cos(g1), np.sin(g2), np.cos(g2)
    zero = np.zeros_like(s1 * s2)
    x = np.stack([s1 * c2, -c1 + zero, -s1 * s2], -1)
    y = np.stack([c1 * c2, s1 + zero, -c1 * s2], -1)
    z = np.stack([s2 + zero, zero, c2 + zero], -1)
    return np.stack([x, y, z], -2)


def bc_frame_from_params(p: FrameParams) -> tuple[np.ndarray, np.ndarray]:
    """(B^C triad, C triad) for the given angles."""
    return substation_triads(p.beta), outer_triads(p.gamma1, p.gamma2)


def ba_frame_from_params(p: FrameParams) -> tuple[np.ndarray, np.ndarray]:
    """(B^A triad, A triad) from the A-side mirror angles."""
    if p.beta_a is None or p.alpha1 is None or p.alpha2 is None:
        raise InvalidInputError("A-side angles are not set")
    return substation_triads(p.beta_a), outer_triads(p.alpha1, p.alpha2)


def subset_frame_from_params(gamma1: float, gamma2: float) -> tuple[np.ndarray, np.ndarray]:
    """Experimentally reachable family: B^C fixed to the canonical axes."""
    return CANONICAL_TRIAD.copy(), outer_triads(gamma1, gamma2)


def relative_rotation(from_triad, to_triad) -> np.ndarray:
    """Rotation ``R`` with ``R @ from_triad[k] == to_triad[k]`` for each k."""
    return np.asarray(to_triad, float).T @ np.asarray(from_triad, float)


def rotation_from_params(beta: float, gamma1: float, gamma2: float) -> np.ndarray:
    """C triad expressed in the B^C frame, as a rotation of the canonical axes."""
    b, c = bc_frame_from_params(FrameParams(beta, gamma1, gamma2))
    return b @ c.T


def rotations_from_params(beta, gamma1, gamma2) -> np.ndarray:
    b = substation_triads(beta)
    c = outer_triads(gamma1, gamma2)
    return b @ np.swapaxes(c, -1, -2)


def rotations_from_uniforms(u1, u2, u3) -> np.ndarray:
    """Haar-random rotations from three uniforms each (unit-quaternion method)."""
    u1, u2, u3 = (np.asarray(u, dtype=float) for u in (u1, u2, u3))
    r1, r2 = np.sqrt(1 - u1), np.sqrt(u1)
    w = r2 * np.cos(TWO_PI * u3)
    x = r1 * np.sin(TWO_PI * u2)
    y = r1 * np.cos(TWO_PI * u2)
    z = r2 * np.sin(TWO_PI * u3)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def directions_from_uniforms(u1, u2) -> np.ndarray:
    """Isotropic unit vectors: ``z = 2 u1 - 1``, azimuth ``2 pi u2``."""
    z = 2 * np.asarray(u1, dtype=float) - 1
    phi = TWO_PI * np.asarray(u2, dtype=float)
    rho = np.sqrt(np.clip(1 - z * z, 0, None))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], -1)


def random_rotation(dist: str, rng) -> np.ndarray:
    """One random rotation.

    ``dist="uniform_params"`` draws the three frame angles uniformly on
    [0, 2 pi); ``dist="haar"`` samples the invariant measure on SO(3).
    ``rng`` is anything with a numpy-style ``random(size)`` method.
    """
    if dist in ("uniform_params", "params"):
        angles = TWO_PI * np.asarray(rng.random(3))
        return rotation_from_params(*angles)
    if dist == "haar":
        return rotations_from_uniforms(*np.asarray(rng.random(3)))
    raise InvalidInputError(f"unknown rotation distribution {dist!r}")


def random_direction(rng) -> np.ndarray:
    return directions_from_uniforms(*np.asarray(rng.random(2)))


def apply_rotation(r, f: MeasurementFrame) -> MeasurementFrame:
    r = np.asarray(r, dtype=float)
    return MeasurementFrame(f.station, f.vectors @ r.T)


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation by ``angle`` about ``axis``."""
    k = normalized(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * (kx @ kx)
