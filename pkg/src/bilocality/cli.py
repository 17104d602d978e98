"""Command-line entry point.

Exit status: 0 on success, 1 for bad input or configuration, 2 when a
numerical consistency check fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import biloc, mcstudy, presets
from .errors import InvalidInputError, NumericalConsistencyError, TheoremViolationError
from .qcore import NoiseModel
from .streams import fresh_seed

KIND_ALIASES = {
    "2233": "sweep2233", "sweep2233": "sweep2233",
    "3333": "sweep3333", "sweep3333": "sweep3333",
    "subset": "subset2233", "subset2233": "subset2233",
}
DEFAULT_V_GRID = tuple(round(0.5 + 0.01 * k, 2) for k in range(51))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from None


def _noise(args) -> NoiseModel | None:
    return None if args.noise_V is None else NoiseModel.symmetric(args.noise_V)


def _seed(args) -> int:
    return fresh_seed() if args.seed is None else args.seed


def false_positive_rows(v: float) -> list[dict]:
    strategy = biloc.SharedRandomnessStrategy(v)
    rows = []
    for name, table in (("lambda=0", strategy.table(0)), ("lambda=1", strategy.table(1)),
                        ("mixture", strategy.mixture())):
        res = biloc.BilocResult(*biloc.compute_I_J(table))
        rows.append({"row": name, **res.to_dict()})
    return rows


def cmd_check(args) -> int:
    if (args.preset is None) == (args.config is None):
        raise InvalidInputError("give exactly one of --preset or --config")
    if args.preset == "false-positive":
        v = 1.0 if args.visibility is None else args.visibility
        row = false_positive_rows(v)[-1]
        row.pop("row")
        _emit({"preset": "false-positive", "visibility": v, **row})
        return 0
    if args.preset is not None:
        scn = presets.scenario_preset(args.preset, _noise(args))
        label = {"preset": args.preset}
    else:
        scn = biloc.scenario_from_dict(_load_json(args.config), Path(args.config).parent)
        if args.noise_V is not None:
            scn = scn.with_noise(_noise(args))
        label = {"config": str(args.config)}
    if all(len(f) == 2 for f in scn.frames):
        res = biloc.evaluate(scn, local_bound=args.local_bound)
    else:
        res = biloc.maximize_b(scn, local_bound=args.local_bound)
    noise = scn.noise.V if scn.noise is not None else 1.0
    _emit({**label, "noise_V": noise, **res.to_dict()})
    return 0


def cmd_false_positive(args) -> int:
    _emit({"visibility": args.visibility, "rows": false_positive_rows(args.visibility)})
    return 0


def _study_config(args, kind: str, **extra) -> mcstudy.StudyConfig:
    if args.config:
        data = _load_json(args.config)
        data.setdefault("seed", _seed(args))
        return mcstudy.StudyConfig.from_dict(data)
    dist = args.dist
    if dist == "subset":
        kind, dist = "subset2233", "params"
    return mcstudy.StudyConfig(
        kind=kind, n=args.n, seed=_seed(args), dist=dist,
        noise_v=1.0 if args.noise_V is None else args.noise_V,
        bins=args.bins, workers=args.workers, random_file=args.random_file, **extra,
    )


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"cannot create output directory {out}: {exc}") from None
    return out


def cmd_sweep(args) -> int:
    kind = KIND_ALIASES.get(args.kind)
    if kind is None:
        raise InvalidInputError(f"unknown sweep kind {args.kind!r}")
    if args.integrate:
        if kind != "subset2233":
            raise InvalidInputError("--integrate only applies to the subset family")
        res = mcstudy.subset_mean_by_integration(args.resolution)
        out = {"kind": kind, "method": "integration", "resolution": res.resolution,
               "mean": res.mean, "min": res.min, "argmin": list(res.argmin)}
        if args.out_dir:
            (_out_dir(args.out_dir) / "subset_integral.json").write_text(json.dumps(out, indent=2) + "\n")
        _emit(out)
        return 0
    cfg = _study_config(args, kind)
    rep = mcstudy.run_study(cfg)
    summary = rep.summary()
    summary.pop("histogram")
    if args.out_dir:
        try:
            paths = rep.write(_out_dir(args.out_dir))
        except OSError as exc:
            raise InvalidInputError(f"cannot write outputs: {exc}") from None
        summary["outputs"] = {k: str(p) for k, p in paths.items()}
    _emit(summary)
    return 0


def cmd_convergence(args) -> int:
    kind = KIND_ALIASES.get(args.kind)
    if kind is None:
        raise InvalidInputError(f"unknown sweep kind {args.kind!r}")
    seed = _seed(args)
    rows = mcstudy.convergence_series(kind, args.populations, seed, args.dist, workers=args.workers)
    if args.out_dir:
        with open(_out_dir(args.out_dir) / f"{kind}_convergence.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "mean", "min", "stderr"])
            for n, mean, mn, se in rows:
                w.writerow([n, mcstudy.fmt(mean), mcstudy.fmt(mn), mcstudy.fmt(se)])
    _emit({"kind": kind, "replay_seed": seed,
           "rows": [{"n": n, "mean": m, "min": mn, "stderr": se} for n, m, mn, se in rows]})
    return 0


def cmd_no_calibration(args) -> int:
    seed = _seed(args)
    v_grid = DEFAULT_V_GRID if args.v_grid is None else args.v_grid
    settings = args.settings or [2, 3, 4]
    out = _out_dir(args.out_dir) if args.out_dir else None
    result = {"replay_seed": seed, "n": args.n, "curves": {}}
    for s in settings:
        d = mcstudy.density_and_violation_curve(s, args.n, v_grid, seed,
                                                workers=args.workers, random_file=args.random_file)
        result["curves"][str(s)] = {
            "mean": d.report.mean,
            "p_violation": [{"V": v, "p": p} for v, p in d.curve.points],
        }
        if out is not None:
            mcstudy.write_histogram_csv(out / f"settings{s}_density.csv",
                                        d.report.hist_edges, d.report.hist_counts, d.density)
            mcstudy.write_noise_curve_csv(out / f"settings{s}_noise_curve.csv", d.curve)
    _emit(result)
    return 0


def cmd_sample(args) -> int:
    seed = _seed(args)
    scn = presets.scenario_preset(args.preset, _noise(args))
    table = biloc.quantum_probability_table(scn)
    rng = np.random.Generator(np.random.Philox(key=seed))
    counts = mcstudy.sample_counts(table, args.events, rng, poisson=args.poisson)
    if np.any(counts.totals == 0):
        raise NumericalConsistencyError("a setting context received zero events")
    est = mcstudy.estimate_b_with_error(counts, args.resamples, rng)
    _emit({"preset": args.preset, "noise_V": scn.noise.V if scn.noise else 1.0,
           "events_per_context": args.events, "resamples": est.resamples, "replay_seed": seed,
           "b_hat": est.b_hat, "sigma": est.sigma, "i": est.I, "j": est.J,
           "degenerate_bootstrap": est.degenerate})
    return 0


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bilocality", description="Bilocality tests without shared reference frames.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="replay seed (default: fresh OS entropy)")
        sp.add_argument("--noise-V", dest="noise_V", type=float, default=None)

    c = sub.add_parser("check", help="evaluate a preset or scenario file")
    c.add_argument("--preset", choices=presets.PRESETS)
    c.add_argument("--config", type=Path)
    c.add_argument("--visibility", type=float, default=None, help="for the false-positive preset")
    c.add_argument("--local-bound", type=float, default=1.0)
    common(c, seed=False)
    c.set_defaults(func=cmd_check)

    f = sub.add_parser("false-positive", help="shared-randomness strategy rows")
    f.add_argument("--visibility", type=float, default=1.0)
    f.set_defaults(func=cmd_false_positive)

    s = sub.add_parser("sweep", help="Monte Carlo over random frames")
    s.add_argument("--kind", default="2233", choices=sorted(KIND_ALIASES))
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--dist", choices=("params", "haar", "subset"), default="params")
    s.add_argument("--bins", type=int, default=200)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--random-file", default=None)
    s.add_argument("--out-dir", default=None)
    s.add_argument("--config", default=None, help="JSON StudyConfig")
    s.add_argument("--integrate", action="store_true", help="quadrature over the subset family")
    s.add_argument("--resolution", type=int, default=256)
    common(s)
    s.set_defaults(func=cmd_sweep)

    cv = sub.add_parser("convergence", help="independent studies of growing population")
    cv.add_argument("--kind", default="2233", choices=sorted(KIND_ALIASES))
    cv.add_argument("--populations", type=_int_list, default=[100, 1000, 10_000, 100_000])
    cv.add_argument("--dist", choices=("params", "haar"), default="params")
    cv.add_argument("--workers", type=int, default=1)
    cv.add_argument("--out-dir", default=None)
    cv.add_argument("--seed", type=int, default=None)
    cv.set_defaults(func=cmd_convergence)

    nc = sub.add_parser("no-calibration", help="density and noise curve without local calibration")
    nc.add_argument("--settings", type=int, choices=(2, 3, 4), action="append")
    nc.add_argument("--n", type=int, default=200_000)
    nc.add_argument("--v-grid", type=_float_list, default=None)
    nc.add_argument("--workers", type=int, default=1)
    nc.add_argument("--random-file", default=None)
    nc.add_argument("--out-dir", default=None)
    nc.add_argument("--seed", type=int, default=None)
    nc.set_defaults(func=cmd_no_calibration)

    sm = sub.add_parser("sample", help="finite-statistics estimate with bootstrap error")
    sm.add_argument("--preset", default="separable-singlet", choices=[x for x in presets.PRESETS if x != "false-positive"])
    sm.add_argument("--events", type=int, default=1_000_000)
    sm.add_argument("--resamples", type=int, default=1000)
    sm.add_argument("--poisson", action="store_true", help="Poisson-fluctuate the per-context totals")
    common(sm)
    sm.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalConsistencyError, TheoremViolationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
