"""Bilocality parameter: tables, correlators, Bloch form and maximisation.

Outcome labels are bits ``0 -> +1`` and ``1 -> -1``. The central station
reports ``b = b^A xor b^C``, i.e. the product of its two substation
outcomes. Probability tables are arrays indexed ``p[a, b, c, x, y, z]``.

An *assignment* names which vector of each station plays each role, in the
order ``(A0, A1, BA0, BA1, BC0, BC1, C0, C1)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, NumericalConsistencyError, TheoremViolationError
from .frames import MeasurementFrame, is_triad, observable_from_bloch
from .qcore import (
    IDENTITY2,
    NoiseModel,
    TwoQubitState,
    classical_mixture,
    correlation_tensor,
    depolarize,
)

BILOCAL = "bilocal"
LOCAL_NONBILOCAL = "local_nonbilocal"
NONLOCAL = "nonlocal"

TABLE_SHAPE = (2,) * 6
NORM_TOL = 1e-10
DEFAULT_ASSIGNMENT = (0, 1, 0, 1, 0, 1, 0, 1)
FOURTH_ROOT_2 = 2**0.25

# fixed calibrated wing used by the one-sided misalignment scheme
A_FIXED = np.array([[1, 0, 1], [-1, 0, 1]]) / math.sqrt(2)
BA_FIXED = np.array([[0, 0, 1], [1, 0, 0]], dtype=float)


# ---------------------------------------------------------------------------
# probability tables


def check_table(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != TABLE_SHAPE:
        raise InvalidInputError(f"probability table must have shape {TABLE_SHAPE}, got {p.shape}")
    if p.min() < -1e-12:
        raise NumericalConsistencyError(f"negative probability {p.min():.3g}")
    drift = np.max(np.abs(p.sum(axis=(0, 1, 2)) - 1))
    if drift > NORM_TOL:
        raise NumericalConsistencyError(f"table normalisation drift {drift:.3g}")
    return p


def _parity_signs() -> np.ndarray:
    bits = np.arange(2)
    return (-1.0) ** (bits[:, None, None] + bits[None, :, None] + bits[None, None, :])


def table_correlators(p: np.ndarray) -> np.ndarray:
    """``<A_x B_y C_z>`` for every context, shape ``(2, 2, 2)``.

    Even- and odd-parity probabilities are summed separately in sorted order, so
    a context whose two groups hold the same values gives exactly zero rather than
    rounding residue (which the square roots in B would amplify to ~1e-8).
    """
    flat = np.asarray(p, dtype=float).reshape(8, 8)
    even = _parity_signs().reshape(8) > 0
    pos = np.sort(flat[even], axis=0).sum(axis=0)
    neg = np.sort(flat[~even], axis=0).sum(axis=0)
    return (pos - neg).reshape(2, 2, 2)


def uniform_table() -> np.ndarray:
    return np.full(TABLE_SHAPE, 1 / 8)


def mix_tables(t0: np.ndarray, t1: np.ndarray, w: float = 0.5) -> np.ndarray:
    """Convex combination ``(1 - w) t0 + w t1``."""
    if not 0 <= w <= 1:
        raise InvalidInputError(f"mixing weight must lie in [0, 1], got {w}")
    return (1 - w) * np.asarray(t0, dtype=float) + w * np.asarray(t1, dtype=float)


def shared_randomness_table(v: float, lam: int) -> np.ndarray:
    """Closed-form distribution of the shared-randomness strategy with hidden bit ``lam``."""
    if not 0 <= v <= 1:
        raise InvalidInputError(f"visibility must lie in [0, 1], got {v}")
    if lam not in (0, 1):
        raise InvalidInputError(f"lambda must be 0 or 1, got {lam}")
    a, b, c, x, y, z = np.indices(TABLE_SHAPE)
    return v / 8 * (1 + (-1.0) ** (a + c + b + lam * (x + z))) + (1 - v) / 8


@dataclass(frozen=True)
class SharedRandomnessStrategy:
    """Alice and Charlie share a fair bit deciding whether to flip outcomes by setting."""

    v: float
    weight: float = 0.5

    def __post_init__(self):
        if not 0 <= self.v <= 1:
            raise InvalidInputError(f"visibility must lie in [0, 1], got {self.v}")

    def table(self, lam: int) -> np.ndarray:
        return shared_randomness_table(self.v, lam)

    def mixture(self) -> np.ndarray:
        return mix_tables(self.table(0), self.table(1), self.weight)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    state_ab: TwoQubitState
    state_bc: TwoQubitState
    frame_a: MeasurementFrame
    frame_ba: MeasurementFrame
    frame_bc: MeasurementFrame
    frame_c: MeasurementFrame
    noise: NoiseModel | None = None
    _tensors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ab, bc = self.effective_states()
        object.__setattr__(self, "_tensors", (correlation_tensor(ab), correlation_tensor(bc)))

    @classmethod
    def from_vectors(cls, state_ab, state_bc, a, ba, bc, c, noise=None) -> "Scenario":
        return cls(
            state_ab, state_bc,
            MeasurementFrame("A", a), MeasurementFrame("BA", ba),
            MeasurementFrame("BC", bc), MeasurementFrame("C", c),
            noise,
        )

    def effective_states(self) -> tuple[TwoQubitState, TwoQubitState]:
        if self.noise is None:
            return self.state_ab, self.state_bc
        return depolarize(self.state_ab, self.noise.v_ab), depolarize(self.state_bc, self.noise.v_bc)

    @property
    def t_ab(self) -> np.ndarray:
        return self._tensors[0]

    @property
    def t_bc(self) -> np.ndarray:
        return self._tensors[1]

    @property
    def frames(self) -> tuple[MeasurementFrame, ...]:
        return self.frame_a, self.frame_ba, self.frame_bc, self.frame_c

    def wing_a(self) -> np.ndarray:
        """Correlators ``e[j, k] = a_j . T_AB b^A_k``."""
        return wing_correlators(self.frame_a, self.frame_ba, self.t_ab)

    def wing_c(self) -> np.ndarray:
        """Correlators ``e[j, k] = b^C_k . T_BC c_j`` (rows index C's vectors)."""
        return wing_correlators(self.frame_c, self.frame_bc, self.t_bc.T)

    def role_vectors(self, assignment=DEFAULT_ASSIGNMENT) -> list[np.ndarray]:
        check_assignment(self, assignment)
        a0, a1, ba0, ba1, bc0, bc1, c0, c1 = assignment
        fa, fba, fbc, fc = (f.vectors for f in self.frames)
        return [fa[a0], fa[a1], fba[ba0], fba[ba1], fbc[bc0], fbc[bc1], fc[c0], fc[c1]]

    def select(self, assignment) -> "Scenario":
        """Two-setting scenario with the roles fixed by ``assignment``."""
        v = self.role_vectors(assignment)
        return replace(
            self,
            frame_a=MeasurementFrame("A", v[0:2]),
            frame_ba=MeasurementFrame("BA", v[2:4]),
            frame_bc=MeasurementFrame("BC", v[4:6]),
            frame_c=MeasurementFrame("C", v[6:8]),
        )

    def with_noise(self, noise: NoiseModel | None) -> "Scenario":
        return replace(self, noise=noise)


def check_assignment(scn: Scenario, assignment) -> None:
    if len(assignment) != 8:
        raise InvalidInputError(f"assignment needs 8 indices, got {len(assignment)}")
    sizes = [len(f) for f in scn.frames]
    for role, idx in enumerate(assignment):
        n = sizes[role // 2]
        if not 0 <= idx < n:
            raise InvalidInputError(f"assignment index {idx} out of range for a station with {n} settings")


def tripartite_correlator(scn: Scenario, x: int, y: int, z: int) -> float:
    """``<A_x B_y C_z>`` from the factorised Bloch expression."""
    fa, fba, fbc, fc = scn.frames
    if not (0 <= x < len(fa) and 0 <= z < len(fc) and 0 <= y < min(len(fba), len(fbc))):
        raise InvalidInputError(f"setting indices ({x}, {y}, {z}) out of range")
    wing_a = fa.vectors[x] @ scn.t_ab @ fba.vectors[y]
    wing_c = fbc.vectors[y] @ scn.t_bc @ fc.vectors[z]
    return float(wing_a * wing_c)


def _projector(v, outcome: int) -> np.ndarray:
    return (IDENTITY2 + (-1) ** outcome * observable_from_bloch(v)) / 2


def _wing_table(rho: np.ndarray, first, second) -> np.ndarray:
    """``p[o1, o2, s1, s2]`` for all vectors of two stations sharing ``rho``."""
    out = np.empty((2, 2, len(first), len(second)))
    for s1, u in enumerate(first):
        for s2, w in enumerate(second):
            for o1 in range(2):
                for o2 in range(2):
                    op = np.kron(_projector(u, o1), _projector(w, o2))
                    out[o1, o2, s1, s2] = np.trace(rho @ op).real
    return out


def quantum_probability_table(scn: Scenario, y: int | None = None, assignment=DEFAULT_ASSIGNMENT) -> np.ndarray:
    """Born-rule table ``p[a, b, c, x, y, z]`` for the roles in ``assignment``.

    With ``y`` given, only that central-setting slice ``p[a, b, c, x, z]`` is returned.
    """
    sel = scn.select(assignment)
    rho_ab, rho_bc = (s.rho for s in sel.effective_states())
    pa = _wing_table(rho_ab, sel.frame_a.vectors, sel.frame_ba.vectors)   # a, bA, x, y
    pc = _wing_table(rho_bc, sel.frame_bc.vectors, sel.frame_c.vectors)   # bC, c, y, z
    table = np.zeros(TABLE_SHAPE)
    for ba, bc in itertools.product(range(2), repeat=2):
        table[:, ba ^ bc] += np.einsum("axy,cyz->acxyz", pa[:, ba], pc[bc])
    table = check_table(table)
    return table if y is None else table[..., y, :]


def compute_I_J(obj, assignment=DEFAULT_ASSIGNMENT) -> tuple[float, float]:
    """``(I, J)`` from a probability table or, directly, from a scenario."""
    if isinstance(obj, Scenario):
        check_assignment(obj, assignment)
        corr = np.empty((2, 2, 2))
        sel = obj.select(assignment)
        for x, yy, z in itertools.product(range(2), repeat=3):
            corr[x, yy, z] = tripartite_correlator(sel, x, yy, z)
    else:
        p = np.asarray(obj, dtype=float)
        if p.shape != TABLE_SHAPE:
            raise InvalidInputError(f"expected a table of shape {TABLE_SHAPE} or a Scenario")
        corr = table_correlators(p)
    signs = np.array([[1, -1], [-1, 1]])
    i_val = corr[:, 0, :].sum() / 4
    j_val = (signs * corr[:, 1, :]).sum() / 4
    return float(i_val), float(j_val)


def bilocality_parameter(I: float, J: float) -> float:
    return math.sqrt(abs(I)) + math.sqrt(abs(J))


def b_from_bloch(t_ab, t_bc, vectors) -> float:
    """Bilocality parameter straight from the Bloch-sphere geometry.

    ``vectors`` are the eight role vectors ``(a0, a1, bA0, bA1, bC0, bC1, c0, c1)``.
    """
    a0, a1, ba0, ba1, bc0, bc1, c0, c1 = (np.asarray(v, dtype=float) for v in vectors)
    t_ab = np.asarray(t_ab, dtype=float)
    t_bc = np.asarray(t_bc, dtype=float)
    first = abs((a0 + a1) @ t_ab @ ba0) * abs(bc0 @ t_bc @ (c0 + c1))
    second = abs((a0 - a1) @ t_ab @ ba1) * abs(bc1 @ t_bc @ (c0 - c1))
    return 0.5 * math.sqrt(first) + 0.5 * math.sqrt(second)


def wing_correlators(frame_1, frame_2, tensor) -> np.ndarray:
    """Matrix ``e[j, k] = u_j . T w_k`` over the vectors of two frames.

    The state tensor is included, so for singlets ``e = -u . w``.
    """
    u = frame_1.vectors if isinstance(frame_1, MeasurementFrame) else np.asarray(frame_1, float)
    w = frame_2.vectors if isinstance(frame_2, MeasurementFrame) else np.asarray(frame_2, float)
    return u @ np.asarray(tensor, dtype=float) @ w.T


@dataclass(frozen=True)
class PairAssignment:
    """Roles ``(gamma, gamma', beta, beta')`` satisfying both pair inequalities.

    ``flip_beta``/``flip_beta_prime`` record the outcome relabelling (sign flip
    of the substation vector) that turns the absolute bounds into the literal
    ``E00 + E10 >= 1`` and ``E11 - E01 >= 1``.
    """

    gamma: int
    gamma_prime: int
    beta: int
    beta_prime: int
    flip_beta: bool
    flip_beta_prime: bool
    first: float
    second: float


def find_violation_pairs(e: np.ndarray, tol: float = 1e-12) -> PairAssignment:
    """Search the 81 ordered role choices for the pair inequalities.

    Returns the choice whose weaker inequality has the largest margin.
    """
    e = np.asarray(e, dtype=float)
    if e.shape != (3, 3):
        raise InvalidInputError(f"pair search needs a 3x3 correlator matrix, got {e.shape}")
    best = None
    for g, gp, b, bp in itertools.product(range(3), repeat=4):
        first = e[g, b] + e[gp, b]
        second = e[gp, bp] - e[g, bp]
        margin = min(abs(first), abs(second))
        if best is None or margin > best[0]:
            best = (margin, g, gp, b, bp, first, second)
    margin, g, gp, b, bp, first, second = best
    if margin < 1 - tol:
        raise TheoremViolationError(f"no role choice reaches 1 (best margin {margin:.6f}); are both frames triads?")
    return PairAssignment(g, gp, b, bp, first < 0, second < 0, abs(first), abs(second))


def classify_point(I: float, J: float, local_bound: float = 1.0, tol: float = 1e-12) -> str:
    """Place ``(I, J)`` in the bilocal set, the local set, or outside both."""
    if bilocality_parameter(I, J) <= 1 + tol:
        return BILOCAL
    if abs(I) + abs(J) <= local_bound + tol:
        return LOCAL_NONBILOCAL
    return NONLOCAL


@dataclass(frozen=True)
class BilocResult:
    I: float
    J: float
    B: float = field(init=False)
    assignment: tuple = DEFAULT_ASSIGNMENT
    classification: str = field(init=False)
    local_bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "B", bilocality_parameter(self.I, self.J))
        object.__setattr__(self, "classification", classify_point(self.I, self.J, self.local_bound))

    def to_dict(self) -> dict:
        return {
            "i": self.I,
            "j": self.J,
            "b": self.B,
            "assignment": [int(k) for k in self.assignment],
            "classification": self.classification,
        }


def evaluate(scn: Scenario, assignment=DEFAULT_ASSIGNMENT, local_bound: float = 1.0) -> BilocResult:
    i_val, j_val = compute_I_J(scn, assignment)
    return BilocResult(i_val, j_val, assignment=tuple(int(k) for k in assignment), local_bound=local_bound)


# ---------------------------------------------------------------------------
# maximisation over role assignments


def _wing_best(e: np.ndarray):
    """Per outer-role pair, the best substation vector for each radical.

    ``e`` has shape ``(N, n_outer, n_sub)``. Returns ``(s, s_arg, d, d_arg)``,
    each ``(N, n_outer, n_outer)``: ``s[r0, r1] = max_k |e[r0,k] + e[r1,k]|``
    and ``d[r0, r1] = max_k |e[r0,k] - e[r1,k]|``.
    """
    plus = np.abs(e[:, :, None, :] + e[:, None, :, :])
    minus = np.abs(e[:, :, None, :] - e[:, None, :, :])
    return plus.max(-1), plus.argmax(-1), minus.max(-1), minus.argmax(-1)


def max_b_batch(e_a: np.ndarray, e_c: np.ndarray, fix_a: bool = False):
    """Maximum bilocality parameter over role assignments, batched.

    ``e_a``: ``(N, nA, nBA)`` with ``e_a[n, j, k] = a_j . T_AB b^A_k``;
    ``e_c``: ``(N, nC, nBC)`` with ``e_c[n, j, k] = b^C_k . T_BC c_j``.
    With ``fix_a`` the A wing keeps roles ``(0, 1, 0, 1)``.

    The two radicals depend on disjoint substation roles, so each
    substation choice is maximised independently; this is exactly the
    exhaustive maximum over all ordered assignments with repetition.

    Returns ``(values, assignments)`` with assignments of shape ``(N, 8)``.
    """
    e_a = np.asarray(e_a, dtype=float)
    e_c = np.asarray(e_c, dtype=float)
    n = len(e_a)
    s_c, s_c_arg, d_c, d_c_arg = _wing_best(e_c)
    if fix_a:
        s_a = np.abs(e_a[:, 0, 0] + e_a[:, 1, 0])[:, None, None]
        d_a = np.abs(e_a[:, 0, 1] - e_a[:, 1, 1])[:, None, None]
        s_a_arg = np.zeros((n, 1, 1), dtype=int)
        d_a_arg = np.ones((n, 1, 1), dtype=int)
        a_pairs = np.array([[0, 1]])
    else:
        s_a, s_a_arg, d_a, d_a_arg = _wing_best(e_a)
        na = e_a.shape[1]
        a_pairs = np.array(list(itertools.product(range(na), repeat=2)))
    nc = e_c.shape[1]
    c_pairs = np.array(list(itertools.product(range(nc), repeat=2)))

    fa = lambda m: m.reshape(n, -1)[:, :, None]  # noqa: E731
    fc = lambda m: m.reshape(n, -1)[:, None, :]  # noqa: E731
    total = 0.5 * (np.sqrt(fa(s_a) * fc(s_c)) + np.sqrt(fa(d_a) * fc(d_c)))
    flat = total.reshape(n, -1)
    best = flat.argmax(1)
    values = flat[np.arange(n), best]

    ia, ic = np.divmod(best, len(c_pairs))
    rows = np.arange(n)
    a0, a1 = a_pairs[ia].T
    c0, c1 = c_pairs[ic].T
    if fix_a:
        ba0, ba1 = s_a_arg[:, 0, 0], d_a_arg[:, 0, 0]
    else:
        ba0, ba1 = s_a_arg[rows, a0, a1], d_a_arg[rows, a0, a1]
    bc0 = s_c_arg[rows, c0, c1]
    bc1 = d_c_arg[rows, c0, c1]
    assignments = np.stack([a0, a1, ba0, ba1, bc0, bc1, c0, c1], -1)
    return values, assignments


def assignment_id(assignment, sizes) -> int:
    """Mixed-radix index of an assignment given the station sizes ``(nA, nBA, nBC, nC)``."""
    idx = 0
    for role, k in enumerate(assignment):
        idx = idx * sizes[role // 2] + int(k)
    return idx


def assignment_ids(assignments: np.ndarray, sizes) -> np.ndarray:
    ids = np.zeros(len(assignments), dtype=np.int64)
    for role in range(8):
        ids = ids * sizes[role // 2] + assignments[:, role]
    return ids


def _max_result(scn: Scenario, fix_a: bool, local_bound: float) -> BilocResult:
    values, assignments = max_b_batch(scn.wing_a()[None], scn.wing_c()[None], fix_a=fix_a)
    result = evaluate(scn, tuple(int(k) for k in assignments[0]), local_bound)
    if abs(result.B - values[0]) > 1e-10:
        raise NumericalConsistencyError(f"maximiser value {values[0]} disagrees with direct evaluation {result.B}")
    return result


def maximize_b(scn: Scenario, local_bound: float = 1.0) -> BilocResult:
    """Best role assignment over every station's vectors."""
    return _max_result(scn, False, local_bound)


def max_b_2233(scn: Scenario, local_bound: float = 1.0) -> BilocResult:
    """Maximise over the 81 C-wing role choices with the A wing held at roles (0, 1, 0, 1)."""
    if not (is_triad(scn.frame_bc.vectors[:3]) and is_triad(scn.frame_c.vectors[:3])):
        raise InvalidInputError("B^C and C frames must be orthonormal triads")
    if len(scn.frame_bc) != 3 or len(scn.frame_c) != 3:
        raise InvalidInputError("B^C and C must measure exactly three directions")
    return _max_result(scn, True, local_bound)


def max_b_3333(scn: Scenario, local_bound: float = 1.0) -> BilocResult:
    """Maximise over all 3^8 role choices with triads at every station."""
    for f in scn.frames:
        if len(f) != 3 or not f.triad_flag:
            raise InvalidInputError(f"station {f.station} must measure an orthonormal triad")
    return _max_result(scn, False, local_bound)


def max_b_exhaustive(scn: Scenario) -> tuple[float, tuple]:
    """Plain loop over every assignment through :func:`b_from_bloch`. Slow; for checking."""
    sizes = [len(f) for f in scn.frames]
    best = (-1.0, None)
    for assignment in itertools.product(*(range(sizes[r // 2]) for r in range(8))):
        val = b_from_bloch(scn.t_ab, scn.t_bc, scn.role_vectors(assignment))
        if val > best[0]:
            best = (val, assignment)
    return best


# ---------------------------------------------------------------------------
# physical construction of the shared-randomness strategy


def _post_process(table: np.ndarray) -> np.ndarray:
    """Alice flips her outcome when x = 1, Charlie when z = 1."""
    out = np.empty_like(table)
    for x, z in itertools.product(range(2), repeat=2):
        t = table[..., x, :, z]
        if x:
            t = t[::-1]
        if z:
            t = t[:, :, ::-1]
        out[..., x, :, z] = t
    return out


def shared_randomness_table_from_states(v: float, lam: int) -> np.ndarray:
    """Same strategy realised with decohered states and sigma_z everywhere."""
    z_axis = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    state = classical_mixture(v)
    scn = Scenario.from_vectors(state, state, z_axis, z_axis, z_axis, z_axis)
    table = quantum_probability_table(scn)
    return _post_process(table) if lam else table


# ---------------------------------------------------------------------------
# scenario files


def scenario_from_dict(data: dict, base_dir=None) -> Scenario:
    """Build a scenario from its JSON form.

    ``{"state_ab": <state>, "state_bc": <state>, "frames": {"A": [[x, y, z], ...],
    "BA": ..., "BC": ..., "C": ...}, "noise": {"v_ab": .., "v_bc": ..}}``. A state is
    anything :func:`bilocality.qcore.state_from_spec` accepts, or ``{"file": path}``
    pointing at a custom state file.
    """
    from pathlib import Path

    from .qcore import load_state_file, state_from_spec

    if not isinstance(data, dict):
        raise InvalidInputError("scenario must be a JSON object")

    def state(key):
        spec = data.get(key)
        if isinstance(spec, dict) and "file" in spec:
            path = Path(spec["file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return load_state_file(path)
        return state_from_spec(spec)

    frames = data.get("frames")
    if not isinstance(frames, dict) or set(frames) != {"A", "BA", "BC", "C"}:
        raise InvalidInputError("scenario needs frames for exactly A, BA, BC and C")
    try:
        vecs = {k: np.asarray(v, dtype=float) for k, v in frames.items()}
    except (TypeError, ValueError):
        raise InvalidInputError("frame vectors must be numeric") from None
    noise = data.get("noise")
    if noise is not None:
        if not isinstance(noise, dict):
            raise InvalidInputError("noise must be an object with v_ab and v_bc")
        try:
            noise = NoiseModel(float(noise.get("v_ab", 1.0)), float(noise.get("v_bc", 1.0)))
        except (TypeError, ValueError):
            raise InvalidInputError("noise visibilities must be numbers") from None
    return Scenario.from_vectors(state("state_ab"), state("state_bc"),
                                 vecs["A"], vecs["BA"], vecs["BC"], vecs["C"], noise)
