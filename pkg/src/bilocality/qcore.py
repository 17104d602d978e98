"""Two-qubit states, Pauli operators and correlation tensors.

Qubit ordering follows the source labels: for ``rho_ab`` the first tensor
factor is Alice's qubit, for ``rho_bc`` it is the qubit sent to the B^C
substation. Polarisation H is computational |0>, V is |1>.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NumericalConsistencyError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
IMAG_TOL = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_VECTOR = (PAULI["x"], PAULI["y"], PAULI["z"])

# |psi^-> = (|01> - |10>)/sqrt(2) = (|HV> - |VH>)/sqrt(2)
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)


def pauli(axis: str) -> np.ndarray:
    """Return the Pauli matrix for ``axis`` in ``{"x", "y", "z"}``."""
    try:
        return PAULI[axis].copy()
    except KeyError:
        raise InvalidInputError(f"unknown Pauli axis {axis!r}") from None


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two single-qubit operators, ``a`` acting on the first qubit."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise InvalidInputError(f"expected two 2x2 operators, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def _check_density_matrix(rho: np.ndarray) -> None:
    if rho.shape != (4, 4):
        raise InvalidInputError(f"two-qubit density matrix must be 4x4, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidInputError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise InvalidInputError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidInputError(f"density matrix trace is {tr.real:.15g}, expected 1")
    lowest = np.linalg.eigvalsh(rho).min()
    if lowest < -PSD_TOL:
        raise InvalidInputError(f"density matrix is not positive semidefinite (eigenvalue {lowest:.3g})")


@dataclass(frozen=True)
class TwoQubitState:
    rho: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        _check_density_matrix(rho)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)


def _check_visibility(v: float, name: str = "v") -> float:
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")
    return v


def singlet() -> TwoQubitState:
    return TwoQubitState(np.outer(PSI_MINUS, PSI_MINUS.conj()), "singlet")


def maximally_mixed() -> TwoQubitState:
    return TwoQubitState(np.eye(4, dtype=complex) / 4, "maximally_mixed")


def werner(v: float) -> TwoQubitState:
    """Singlet with white noise: ``v |psi-><psi-| + (1 - v) I/4``."""
    v = _check_visibility(v)
    rho = v * singlet().rho + (1 - v) * np.eye(4) / 4
    return TwoQubitState(rho, f"werner({v:g})")


def classical_mixture(v: float) -> TwoQubitState:
    """Decohered |HH>,|VV> mixture with white noise.

    The diagonal part carries weight ``sqrt(v)``, which is what the
    shared-randomness demonstration needs for its correlators to scale as ``v``.
    """
    v = _check_visibility(v)
    w = math.sqrt(v)
    hh_vv = np.diag([1, 0, 0, 1]).astype(complex) / 2
    rho = w * hh_vv + (1 - w) * np.eye(4) / 4
    return TwoQubitState(rho, f"classical_mixture({v:g})")


def depolarize(state: TwoQubitState, v: float) -> TwoQubitState:
    """Mix ``state`` with white noise at visibility ``v``."""
    v = _check_visibility(v)
    if v == 1.0:
        return state
    rho = v * state.rho + (1 - v) * np.eye(4) / 4
    return TwoQubitState(rho, f"depolarized({state.label},{v:g})")


def correlation_tensor(state: TwoQubitState | np.ndarray) -> np.ndarray:
    """3x3 real matrix ``t[i, j] = Tr[rho sigma_i (x) sigma_j]``."""
    rho = state.rho if isinstance(state, TwoQubitState) else np.asarray(state, dtype=complex)
    t = np.empty((3, 3), dtype=complex)
    for i, si in enumerate(PAULI_VECTOR):
        for j, sj in enumerate(PAULI_VECTOR):
            t[i, j] = np.trace(rho @ np.kron(si, sj))
    residue = np.max(np.abs(t.imag))
    if residue >= IMAG_TOL:
        raise NumericalConsistencyError(f"correlation tensor has imaginary residue {residue:.3g}")
    t = t.real.copy()
    if np.max(np.abs(t)) > 1 + 1e-12:
        raise NumericalConsistencyError("correlation tensor entry exceeds 1 in magnitude")
    return t


@dataclass(frozen=True)
class NoiseModel:
    """White-noise visibilities of the two sources."""

    v_ab: float = 1.0
    v_bc: float = 1.0
    V: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "v_ab", _check_visibility(self.v_ab, "v_ab"))
        object.__setattr__(self, "v_bc", _check_visibility(self.v_bc, "v_bc"))
        object.__setattr__(self, "V", math.sqrt(self.v_ab * self.v_bc))

    @classmethod
    def symmetric(cls, V: float) -> "NoiseModel":
        """Both sources at visibility ``V``, so the combined factor is ``V``."""
        return cls(V, V)


def rho_from_pairs(pairs) -> np.ndarray:
    """Convert a 4x4 nested list of ``[re, im]`` pairs to a complex array."""
    try:
        arr = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"rho is not a numeric array: {exc}") from None
    if arr.shape != (4, 4, 2):
        raise InvalidInputError(f"rho must be 4x4 [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def rho_to_pairs(rho: np.ndarray) -> list:
    rho = np.asarray(rho, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho]


def state_from_spec(spec) -> TwoQubitState:
    """Build a state from its JSON description.

    Accepted forms: ``{"kind": "singlet"}``, ``{"kind": "werner", "v": 0.9}``,
    ``{"kind": "classical_mixture", "v": 0.5}``, ``{"kind": "maximally_mixed"}``
    or ``{"rho": [[[re, im], ...], ...]}``.
    """
    if not isinstance(spec, dict):
        raise InvalidInputError(f"state spec must be an object, got {type(spec).__name__}")
    if "rho" in spec:
        return TwoQubitState(rho_from_pairs(spec["rho"]), spec.get("label", "custom"))
    kind = spec.get("kind")
    if kind == "singlet":
        return singlet()
    if kind == "maximally_mixed":
        return maximally_mixed()
    if kind in ("werner", "classical_mixture"):
        if "v" not in spec:
            raise InvalidInputError(f"state kind {kind!r} needs a visibility 'v'")
        try:
            v = float(spec["v"])
        except (TypeError, ValueError):
            raise InvalidInputError(f"visibility must be a number, got {spec['v']!r}") from None
        return werner(v) if kind == "werner" else classical_mixture(v)
    raise InvalidInputError(f"unknown state kind {kind!r}")


def load_state_file(path: str | Path) -> TwoQubitState:
    """Read a custom state file: a JSON object with key ``"rho"``."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read state file {path}: {exc}") from None
    if not isinstance(data, dict) or "rho" not in data:
        raise InvalidInputError(f"state file {path} has no 'rho' key")
    return TwoQubitState(rho_from_pairs(data["rho"]), "custom")
