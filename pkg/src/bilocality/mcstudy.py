"""Monte Carlo populations over random frames, and finite-statistics sampling.

Every sample reads a fixed-width row of uniforms addressed by its index
(see :mod:`bilocality.streams`), so results do not depend on block size or
on how many worker processes share the population.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .biloc import (
    A_FIXED,
    BA_FIXED,
    TABLE_SHAPE,
    assignment_ids,
    bilocality_parameter,
    compute_I_J,
    max_b_batch,
)
from .errors import InvalidInputError
from .frames import (
    CANONICAL_TRIAD,
    TWO_PI,
    directions_from_uniforms,
    outer_triads,
    rotations_from_uniforms,
    substation_triads,
)
from .streams import PhiloxSource, RandomBitsFile, derive_seed

KINDS = ("sweep2233", "subset2233", "sweep3333", "no_calibration")
DISTS = ("params", "haar")
SQRT2 = math.sqrt(2)
BLOCK = 8192
# uniforms per sample; multiples of 4 for the counter stream
STRIDE = {"sweep2233": 4, "subset2233": 4, "sweep3333": 8, "no_calibration": 24}
# the substations in the no-calibration study always use two directions
NO_CAL_SUBSTATION = 2


@dataclass(frozen=True)
class StudyConfig:
    kind: str
    n: int
    seed: int
    dist: str = "params"
    noise_v: float = 1.0
    bins: int = 200
    hist_range: tuple = (0.0, SQRT2)
    settings: int = 2
    workers: int = 1
    random_file: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown study kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.dist not in DISTS:
            raise InvalidInputError(f"unknown frame distribution {self.dist!r}")
        if int(self.n) < 1:
            raise InvalidInputError("population n must be at least 1")
        if int(self.bins) < 1:
            raise InvalidInputError("bins must be at least 1")
        if not 0 <= self.noise_v <= 1:
            raise InvalidInputError(f"noise V must lie in [0, 1], got {self.noise_v}")
        if self.kind == "no_calibration" and self.settings not in (2, 3, 4):
            raise InvalidInputError(f"settings must be 2, 3 or 4, got {self.settings}")
        if int(self.seed) < 0:
            raise InvalidInputError("seed must be non-negative")
        lo, hi = self.hist_range
        if not hi > lo:
            raise InvalidInputError("histogram range must be increasing")
        object.__setattr__(self, "hist_range", (float(lo), float(hi)))

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidInputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidInputError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hist_range"] = list(self.hist_range)
        return d

    @property
    def sizes(self) -> tuple:
        """Settings count per station (A, B^A, B^C, C)."""
        if self.kind in ("sweep2233", "subset2233"):
            return (2, 2, 3, 3)
        if self.kind == "sweep3333":
            return (3, 3, 3, 3)
        return (self.settings, NO_CAL_SUBSTATION, NO_CAL_SUBSTATION, self.settings)

    @property
    def param_names(self) -> tuple:
        if self.kind == "subset2233":
            return ("gamma1", "gamma2")
        if self.kind == "sweep2233":
            return ("beta", "gamma1", "gamma2") if self.dist == "params" else ("u1", "u2", "u3")
        if self.kind == "sweep3333":
            if self.dist == "params":
                return ("beta_a", "alpha1", "alpha2", "beta", "gamma1", "gamma2")
            return ("ua1", "ua2", "ua3", "uc1", "uc2", "uc3")
        return tuple(f"u{k}" for k in range(8 + 4 * self.settings))


def _source(cfg: StudyConfig):
    return RandomBitsFile(cfg.random_file) if cfg.random_file else PhiloxSource(cfg.seed)


def _outer_in_substation_frame(u, dist):
    """(substation triads, outer triads) from one wing's three uniforms."""
    if dist == "params":
        ang = TWO_PI * u
        return substation_triads(ang[:, 0]), outer_triads(ang[:, 1], ang[:, 2]), ang
    rot = rotations_from_uniforms(u[:, 0], u[:, 1], u[:, 2])
    sub = np.broadcast_to(CANONICAL_TRIAD, rot.shape)
    return sub, np.swapaxes(rot, -1, -2), u


def _singlet_wing(outer, sub):
    """Singlet correlators ``e[j, k] = -outer_j . sub_k``."""
    return -np.einsum("nji,nki->njk", outer, sub)


def sample_block(cfg: StudyConfig, start: int, count: int):
    """Ideal (V = 1) per-sample maxima for samples ``start .. start+count-1``.

    Returns ``(values, params, assignments)``.
    """
    u = _source(cfg).block(start, count, STRIDE[cfg.kind])
    if cfg.kind == "sweep2233":
        sub, outer, params = _outer_in_substation_frame(u[:, :3], cfg.dist)
        e_a = np.broadcast_to(-(A_FIXED @ BA_FIXED.T), (count, 2, 2))
        values, assign = max_b_batch(e_a, _singlet_wing(outer, sub), fix_a=True)
    elif cfg.kind == "subset2233":
        params = TWO_PI * u[:, :2]
        outer = outer_triads(params[:, 0], params[:, 1])
        sub = np.broadcast_to(CANONICAL_TRIAD, outer.shape)
        e_a = np.broadcast_to(-(A_FIXED @ BA_FIXED.T), (count, 2, 2))
        values, assign = max_b_batch(e_a, _singlet_wing(outer, sub), fix_a=True)
    elif cfg.kind == "sweep3333":
        sub_a, outer_a, pa = _outer_in_substation_frame(u[:, :3], cfg.dist)
        sub_c, outer_c, pc = _outer_in_substation_frame(u[:, 3:6], cfg.dist)
        params = np.concatenate([pa, pc], 1)
        values, assign = max_b_batch(_singlet_wing(outer_a, sub_a), _singlet_wing(outer_c, sub_c))
    else:
        s = cfg.settings
        dirs = lambda cols: directions_from_uniforms(u[:, cols[0]], u[:, cols[1]])  # noqa: E731
        ba = np.stack([dirs((0, 1)), dirs((2, 3))], 1)
        bc = np.stack([dirs((4, 5)), dirs((6, 7))], 1)
        # a_k and c_k sit at fixed offsets, so a larger settings count extends
        # the same sample rather than drawing a new one
        a = np.stack([dirs((8 + 4 * k, 9 + 4 * k)) for k in range(s)], 1)
        c = np.stack([dirs((10 + 4 * k, 11 + 4 * k)) for k in range(s)], 1)
        params = u[:, : 8 + 4 * s]
        values, assign = max_b_batch(_singlet_wing(a, ba), _singlet_wing(c, bc))
    return values, np.asarray(params), assign


def _block_job(args):
    cfg, start, count = args
    return sample_block(cfg, start, count)


@dataclass
class StudyReport:
    config: StudyConfig
    values: np.ndarray
    params: np.ndarray
    assignment_ids: np.ndarray
    mean: float = field(init=False)
    min: float = field(init=False)
    max: float = field(init=False)
    stderr: float = field(init=False)
    hist_counts: np.ndarray = field(init=False)
    hist_edges: np.ndarray = field(init=False)

    def __post_init__(self):
        v = self.values
        n = len(v)
        self.mean = float(np.sum(v) / n)
        self.min = float(v.min())
        self.max = float(v.max())
        self.stderr = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        lo, hi = self.config.hist_range
        # values a rounding error beyond the top edge belong to the last bin
        clipped = np.clip(v, lo, hi)
        self.hist_counts, self.hist_edges = np.histogram(clipped, bins=self.config.bins, range=(lo, hi))

    @property
    def seed(self) -> int:
        return self.config.seed

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "replay_seed": self.config.seed,
            "n": len(self.values),
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "stderr": self.stderr,
            "histogram": {"edges": self.hist_edges.tolist(), "counts": self.hist_counts.tolist()},
        }

    def write(self, out_dir: str | Path, prefix: str = "") -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "summary": out / f"{prefix}summary.json",
            "samples": out / f"{prefix}samples.csv",
            "histogram": out / f"{prefix}histogram.csv",
        }
        paths["summary"].write_text(json.dumps(self.summary(), indent=2) + "\n")
        with open(paths["samples"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", *self.config.param_names, "max_b", "assignment_id"])
            for i, (p, val, aid) in enumerate(zip(self.params, self.values, self.assignment_ids)):
                w.writerow([i, *(fmt(x) for x in p), fmt(val), int(aid)])
        write_histogram_csv(paths["histogram"], self.hist_edges, self.hist_counts)
        return paths


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_histogram_csv(path, edges, counts, density=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count"] + (["density"] if density is not None else []))
        for k, cnt in enumerate(counts):
            row = [fmt(edges[k]), fmt(edges[k + 1]), int(cnt)]
            if density is not None:
                row.append(fmt(density[k]))
            w.writerow(row)


def run_study(cfg: StudyConfig) -> StudyReport:
    """Sample ``cfg.n`` random frame configurations and collect per-sample maxima."""
    jobs = [(cfg, s, min(BLOCK, cfg.n - s)) for s in range(0, cfg.n, BLOCK)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_block_job, jobs))
    else:
        parts = [_block_job(j) for j in jobs]
    values = np.concatenate([p[0] for p in parts]) * cfg.noise_v
    params = np.concatenate([p[1] for p in parts])
    assign = np.concatenate([p[2] for p in parts])
    return StudyReport(cfg, values, params, assignment_ids(assign, cfg.sizes))


@dataclass(frozen=True)
class SubsetIntegral:
    mean: float
    min: float
    argmin: tuple
    resolution: int


def subset_surface(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid nodes ``2 pi k / resolution`` and the max-B surface over them."""
    if resolution < 64:
        raise InvalidInputError("resolution must be at least 64 points per axis")
    grid = TWO_PI * np.arange(resolution) / resolution
    g1, g2 = np.meshgrid(grid, grid, indexing="ij")
    outer = outer_triads(g1.ravel(), g2.ravel())
    sub = np.broadcast_to(CANONICAL_TRIAD, outer.shape)
    e_a = np.broadcast_to(-(A_FIXED @ BA_FIXED.T), (len(outer), 2, 2))
    values, _ = max_b_batch(e_a, _singlet_wing(outer, sub), fix_a=True)
    return grid, values.reshape(resolution, resolution)


def subset_mean_by_integration(resolution: int = 256) -> SubsetIntegral:
    """Average of the subset surface over the torus of both angles.

    The surface is periodic in both angles, so the equal-weight rule on the
    uniform grid is the trapezoidal rule.
    """
    grid, surf = subset_surface(resolution)
    k = np.unravel_index(np.argmin(surf), surf.shape)
    return SubsetIntegral(float(surf.mean()), float(surf.min()), (float(grid[k[0]]), float(grid[k[1]])), resolution)


def convergence_series(kind: str, populations, seed: int, dist: str = "params", **cfg_kwargs) -> list[tuple]:
    """Independent studies of growing size: rows of ``(N, mean, min, stderr)``."""
    populations = list(populations)
    if not populations:
        raise InvalidInputError("populations must be non-empty")
    rows = []
    for k, n in enumerate(populations):
        rep = run_study(StudyConfig(kind, int(n), derive_seed(seed, k), dist, **cfg_kwargs))
        rows.append((int(n), rep.mean, rep.min, rep.stderr))
    return rows


@dataclass(frozen=True)
class NoiseCurve:
    points: tuple

    def __post_init__(self):
        probs = [p for _, p in self.points]
        if any(not 0 <= p <= 1 for p in probs):
            raise InvalidInputError("violation probabilities must lie in [0, 1]")

    @property
    def visibilities(self) -> np.ndarray:
        return np.array([v for v, _ in self.points])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


def violation_probability(ideal_values: np.ndarray, V: float) -> float:
    """Fraction of samples whose noisy value ``V * B`` exceeds 1."""
    if V <= 0:
        return 0.0
    return float(np.count_nonzero(np.asarray(ideal_values) > 1.0 / V) / len(ideal_values))


@dataclass
class DensityResult:
    report: StudyReport
    density: np.ndarray
    curve: NoiseCurve


def density_and_violation_curve(settings: int, n: int, v_grid, seed: int, **cfg_kwargs) -> DensityResult:
    """Density of the ideal maxima without local calibration, and violation probability versus V."""
    cfg = StudyConfig("no_calibration", n, seed, settings=settings, **cfg_kwargs)
    if cfg.noise_v != 1.0:
        raise InvalidInputError("the density study is run at V = 1; noise enters through v_grid")
    rep = run_study(cfg)
    widths = np.diff(rep.hist_edges)
    density = rep.hist_counts / (len(rep.values) * widths)
    vs = sorted(float(v) for v in v_grid)
    if any(not 0 <= v <= 1 for v in vs):
        raise InvalidInputError("visibilities must lie in [0, 1]")
    curve = NoiseCurve(tuple((v, violation_probability(rep.values, v)) for v in vs))
    return DensityResult(rep, density, curve)


def write_noise_curve_csv(path, curve: NoiseCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["V", "p_violation"])
        for v, p in curve.points:
            w.writerow([fmt(v), fmt(p)])


# ---------------------------------------------------------------------------
# finite statistics


@dataclass(frozen=True)
class CountSample:
    counts: np.ndarray  # n[a, b, c, x, y, z]
    totals: np.ndarray  # events per (x, y, z)

    def __post_init__(self):
        if self.counts.shape != TABLE_SHAPE or np.any(self.counts < 0):
            raise InvalidInputError("counts must be a non-negative array of shape (2,)*6")
        if not np.array_equal(self.counts.sum(axis=(0, 1, 2)), self.totals):
            raise InvalidInputError("counts do not add up to the declared totals")


def sample_counts(table: np.ndarray, events_per_context: int, rng, poisson: bool = False) -> CountSample:
    """Multinomial outcome counts for every setting context."""
    if events_per_context < 1:
        raise InvalidInputError("events per context must be at least 1")
    table = np.asarray(table, dtype=float)
    counts = np.zeros(TABLE_SHAPE, dtype=np.int64)
    totals = np.zeros((2, 2, 2), dtype=np.int64)
    for x, y, z in np.ndindex(2, 2, 2):
        n = int(rng.poisson(events_per_context)) if poisson else int(events_per_context)
        p = np.clip(table[..., x, y, z].ravel(), 0, None)
        counts[..., x, y, z] = rng.multinomial(n, p / p.sum()).reshape(2, 2, 2)
        totals[x, y, z] = n
    return CountSample(counts, totals)


@dataclass(frozen=True)
class BootstrapEstimate:
    b_hat: float
    sigma: float
    I: float
    J: float
    resamples: int
    degenerate: bool = False


def estimate_b_with_error(counts: CountSample, resamples: int = 1000, rng=None) -> BootstrapEstimate:
    """Point estimate from empirical frequencies, error from a multinomial bootstrap."""
    if np.any(counts.totals < 1):
        raise InvalidInputError("every setting context needs at least one event")
    if resamples < 1:
        raise InvalidInputError("resamples must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    freqs = counts.counts / counts.totals
    i_hat, j_hat = compute_I_J(freqs)
    b_hat = bilocality_parameter(i_hat, j_hat)
    if resamples == 1:
        warnings.warn("a single bootstrap resample gives no spread; sigma reported as 0", RuntimeWarning)
        return BootstrapEstimate(b_hat, 0.0, i_hat, j_hat, 1, degenerate=True)

    boot = np.empty((resamples,) + TABLE_SHAPE)
    for x, y, z in np.ndindex(2, 2, 2):
        n = int(counts.totals[x, y, z])
        p = freqs[..., x, y, z].ravel()
        boot[..., x, y, z] = rng.multinomial(n, p, size=resamples).reshape(resamples, 2, 2, 2) / n
    signs = (-1.0) ** np.indices((2, 2, 2)).sum(0)
    corr = np.einsum("abc,rabcxyz->rxyz", signs, boot)
    i_b = corr[:, :, 0, :].sum((1, 2)) / 4
    j_b = (np.array([[1, -1], [-1, 1]]) * corr[:, :, 1, :]).sum((1, 2)) / 4
    b_b = np.sqrt(np.abs(i_b)) + np.sqrt(np.abs(j_b))
    return BootstrapEstimate(b_hat, float(b_b.std(ddof=1)), i_hat, j_hat, resamples)
