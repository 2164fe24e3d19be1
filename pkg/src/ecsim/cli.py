"""Seeded experiment runner.

    ecsim run --config experiment.json [--seed N] [--out DIR]
    ecsim verify --suite fast|full

A config file is a JSON object with keys `experiment`, `parameters`, and
optionally `seed` and `output_dir` (command-line flags win). Unknown keys are
rejected. Every run writes a manifest echoing the fully resolved config, its
hash, and the artifact list; reruns with the same config and seed produce
byte-identical outputs. Set ECSIM_THREADS to pin the BLAS thread count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError, NumericsError, SizingError, ValidationError

EXIT_CONFIG = 2
EXIT_SIZING = 3
EXIT_NUMERICS = 4

_REQUIRED = object()


@dataclass(frozen=True)
class Experiment:
    name: str
    schema: dict[str, tuple[type, Any]]
    runner: Callable[[dict, int, Path], list[str]]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows, meta: dict) -> None:
    lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(_fmt(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Experiment runners (imports kept local so ECSIM_THREADS applies first)
# ---------------------------------------------------------------------------


def _run_interfere(p: dict, seed: int, out: Path) -> list[str]:
    import numpy as np

    from .circle import conditional_weight, delta_profile, peak_locations, width_fit

    weight = conditional_weight(p["A"], p["B"], p["eps"], p["n"], grid=p["grid"])
    deltas, mag = delta_profile(weight, points=p["profile_points"])
    meta = {"config_sha256": p["_hash"], "seed": seed}
    _write_csv(out / "results.csv", ["delta", "magnitude"], zip(deltas.tolist(), mag.tolist()), meta)
    summary: dict[str, Any] = {
        "peaks": list(peak_locations(p["A"], p["B"])),
        "argmax_delta": float(deltas[int(np.argmax(mag))]),
        "log_peak_magnitude": weight.log_peak,
    }
    if p["A"] + p["B"] >= 16:
        fit = width_fit(weight)
        summary["width_sigma"] = fit.sigma
        summary["width_center"] = fit.center
        summary["width_fit_ok"] = fit.ok
    _write_json(out / "results.json", {"config_sha256": p["_hash"], "seed": seed, **summary})
    return ["results.csv", "results.json"]


def _run_trajectory(p: dict, seed: int, out: Path) -> list[str]:
    import numpy as np

    from . import fock
    from .circle import peak_locations, width_fit
    from .measurement import fringe_scan, run_interference_trajectory

    record, traj = run_interference_trajectory(
        p["n"], p["eps_step"], p["steps"], seed, p["stop_after_detections"] or None
    )
    deltas, mag = traj.delta_profile(p["profile_points"])
    meta = {"config_sha256": p["_hash"], "seed": seed}
    _write_csv(out / "results.csv", ["delta", "magnitude"], zip(deltas.tolist(), mag.tolist()), meta)
    a, b = record.totals
    summary: dict[str, Any] = {
        "record": record.to_json_dict(),
        "overflow_bound": traj.overflow_bound,
        "remaining_radius2": traj.radius2,
    }
    if a + b > 0:
        summary["peak_formula"] = list(peak_locations(a, b))
    if a + b >= 16 and a > 0 and b > 0:
        fit = width_fit((deltas, mag), A=a, B=b)
        summary["width_sigma"] = fit.sigma
    artifacts = ["results.csv", "results.json"]
    if p["fringe"]:
        gammas = 2.0 * math.pi * np.arange(p["fringe_points"]) / p["fringe_points"]
        scan = fringe_scan(traj, gammas, branch=p["fringe_branch"])
        _write_csv(out / "fringe.csv", ["gamma", "intensity"],
                   zip(scan.gammas.tolist(), scan.intensity.tolist()), meta)
        summary["visibility"] = scan.visibility
        artifacts.append("fringe.csv")
    if p["export_state"]:
        envelope = fock.to_json_dict(traj.cavity_state())
        envelope.update(config_sha256=p["_hash"], seed=seed)
        _write_json(out / "cavity_state.json", envelope)
        artifacts.append("cavity_state.json")
    _write_json(out / "results.json", {"config_sha256": p["_hash"], "seed": seed, **summary})
    return artifacts


def _run_laser_equivalence(p: dict, seed: int, out: Path) -> list[str]:
    from .sources import decomposition_equivalence_check

    rep = decomposition_equivalence_check(p["nbar"], p["modes"], p["cutoff"])
    tolerance = 1e-8 + rep.tail_bound
    if rep.trace_distance > tolerance:
        raise NumericsError(
            f"decomposition equivalence violated: {rep.trace_distance:.3e} > {tolerance:.3e}"
        )
    _write_json(
        out / "results.json",
        {
            "config_sha256": p["_hash"],
            "seed": seed,
            "trace_distance": rep.trace_distance,
            "tail_bound": rep.tail_bound,
            "tolerance": tolerance,
            "m_max": rep.m_max,
        },
    )
    return ["results.json"]


def _run_phase_walk(p: dict, seed: int, out: Path) -> list[str]:
    from .sources import PhaseWalkSpec, phase_walk_correlation

    spec = PhaseWalkSpec(p["step_variance"], p["modes"], p["photons"], seed)
    pairs = None
    if p["lags"]:
        pairs = [(0, lag) for lag in p["lags"]] + [(0, 0)]
    res = phase_walk_correlation(spec, p["realizations"], pairs=pairs)
    meta = {"config_sha256": p["_hash"], "seed": seed}
    rows = [r for r in res.to_csv_rows() if pairs is None or (r[0], r[1]) in set(pairs)]
    _write_csv(out / "results.csv", ["k", "l", "re", "im", "abs", "stderr"], rows, meta)
    summary = {
        "config_sha256": p["_hash"],
        "seed": seed,
        "realizations": res.realizations,
        "prediction": {
            str(lag): math.exp(-p["step_variance"] * lag / 2.0) for lag in (p["lags"] or [])
        },
    }
    _write_json(out / "results.json", summary)
    return ["results.csv", "results.json"]


def _run_homodyne(p: dict, seed: int, out: Path) -> list[str]:
    import numpy as np

    from .homodyne import HomodyneConfig, PhaseShiftProcess, process_tomography_scan

    theta = p["theta"] if p["theta"] is not None else math.acos(0.95)
    config = HomodyneConfig(p["n"], PhaseShiftProcess(p["offset"]), theta)
    gammas = 2.0 * math.pi * np.arange(p["points"]) / p["points"]
    scan = process_tomography_scan(config, gammas)
    meta = {"config_sha256": p["_hash"], "seed": seed}
    _write_csv(
        out / "results.csv",
        ["gamma", "mean", "variance"],
        zip(scan.gammas.tolist(), scan.means.tolist(), scan.variances.tolist()),
        meta,
    )
    _write_json(
        out / "results.json",
        {
            "config_sha256": p["_hash"],
            "seed": seed,
            "recovered_offset": scan.recovered_offset,
            "injected_offset": p["offset"],
            "amplitude": scan.amplitude,
        },
    )
    return ["results.csv", "results.json"]


def _run_squeeze(p: dict, seed: int, out: Path) -> list[str]:
    from .squeezing import approximation_quality, pair_ladder_coefficients, required_pair_cutoff

    points = approximation_quality(p["pumps"], p["scale"], p["pair_cutoff"] or None)
    meta = {"config_sha256": p["_hash"], "seed": seed}
    _write_csv(
        out / "results.csv",
        ["pump_n", "fidelity", "norm_deficit"],
        [(pt.pump_n, pt.fidelity, pt.norm_deficit) for pt in points],
        meta,
    )
    cut = required_pair_cutoff(p["scale"]) + 4
    ladder = pair_ladder_coefficients(p["scale"], cut)
    _write_json(
        out / "results.json",
        {
            "config_sha256": p["_hash"],
            "seed": seed,
            "fidelities": {str(pt.pump_n): pt.fidelity for pt in points},
            "idealized_schmidt": [[_fmt(c.real), _fmt(c.imag)] for c in ladder],
        },
    )
    return ["results.csv", "results.json"]


def _run_ecs_verify(p: dict, seed: int, out: Path) -> list[str]:
    from .circle import ecs_apply_coupler, ecs_to_fock, two_mode_circle
    from .coupler import CouplerParams, apply_coupler
    from .fock import fidelity

    worst = 0.0
    cases = 0
    for theta in p["thetas"]:
        for phi in p["phis"]:
            params = CouplerParams(theta, phi)
            for n in range(p["n_max"] + 1):
                for nprime in {0, n}:
                    cut = max(n + nprime, 1)
                    ecs = two_mode_circle(n, nprime, cutoffs=(cut, cut))
                    via_ecs = ecs_to_fock(ecs_apply_coupler(ecs, (0, 1), params))
                    via_fock = apply_coupler(ecs_to_fock(ecs), (0, 1), params)
                    worst = max(worst, 1.0 - fidelity(via_ecs, via_fock))
                    cases += 1
    if worst > 1e-10:
        raise NumericsError(f"commuting diagram violated: deficit {worst:.3e}")
    _write_json(
        out / "results.json",
        {"config_sha256": p["_hash"], "seed": seed, "cases": cases, "worst_infidelity": worst},
    )
    return ["results.json"]


EXPERIMENTS: dict[str, Experiment] = {
    "interfere": Experiment(
        "interfere",
        {
            "A": (int, _REQUIRED),
            "B": (int, _REQUIRED),
            "eps": (float, _REQUIRED),
            "n": (int, _REQUIRED),
            "grid": (int, 1024),
            "profile_points": (int, 1024),
        },
        _run_interfere,
    ),
    "trajectory": Experiment(
        "trajectory",
        {
            "n": (int, _REQUIRED),
            "eps_step": (float, _REQUIRED),
            "steps": (int, _REQUIRED),
            "stop_after_detections": (int, 0),
            "profile_points": (int, 1024),
            "fringe": (bool, False),
            "fringe_points": (int, 64),
            "fringe_branch": (str, "positive"),
            "export_state": (bool, False),
        },
        _run_trajectory,
    ),
    "laser-equivalence": Experiment(
        "laser-equivalence",
        {"nbar": (float, _REQUIRED), "modes": (int, _REQUIRED), "cutoff": (int, _REQUIRED)},
        _run_laser_equivalence,
    ),
    "phase-walk": Experiment(
        "phase-walk",
        {
            "step_variance": (float, _REQUIRED),
            "modes": (int, _REQUIRED),
            "photons": (int, _REQUIRED),
            "realizations": (int, _REQUIRED),
            "lags": (list, []),
        },
        _run_phase_walk,
    ),
    "homodyne": Experiment(
        "homodyne",
        {
            "n": (int, _REQUIRED),
            "theta": (float, None),
            "offset": (float, 0.0),
            "points": (int, 24),
        },
        _run_homodyne,
    ),
    "squeeze": Experiment(
        "squeeze",
        {
            "pumps": (list, [2, 4, 8, 12]),
            "scale": (float, 0.2),
            "pair_cutoff": (int, 0),
        },
        _run_squeeze,
    ),
    "ecs-verify": Experiment(
        "ecs-verify",
        {
            "n_max": (int, 6),
            "thetas": (list, [math.pi / 8, math.pi / 4, math.pi / 3]),
            "phis": (list, [0.0, math.pi / 2]),
        },
        _run_ecs_verify,
    ),
}


def load_config(path: Path, seed_override: int | None, out_override: str | None) -> tuple[Experiment, dict, int, Path]:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed_top = {"experiment", "parameters", "seed", "output_dir"}
    unknown = set(raw) - allowed_top
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    name = raw.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {sorted(EXPERIMENTS)}, got {name!r}"
        )
    exp = EXPERIMENTS[name]
    params_in = raw.get("parameters", {})
    if not isinstance(params_in, dict):
        raise ConfigError("parameters must be an object")
    unknown = set(params_in) - set(exp.schema)
    if unknown:
        raise ConfigError(f"unknown parameters for {name}: {sorted(unknown)}")
    params: dict[str, Any] = {}
    for key, (typ, default) in exp.schema.items():
        if key in params_in:
            value = params_in[key]
            if typ in (int, float) and isinstance(value, bool):
                raise ConfigError(f"parameter {key} must be {typ.__name__}")
            if typ is float and isinstance(value, int):
                value = float(value)
            if typ is int and isinstance(value, float) and value.is_integer():
                value = int(value)
            if value is not None and not isinstance(value, typ):
                raise ConfigError(f"parameter {key} must be {typ.__name__}")
            params[key] = value
        elif default is _REQUIRED:
            raise ConfigError(f"missing required parameter {key} for {name}")
        else:
            params[key] = default
    seed = seed_override if seed_override is not None else raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    outdir = Path(out_override or raw.get("output_dir", "."))
    return exp, params, seed, outdir


def config_hash(exp: Experiment, params: dict, seed: int) -> str:
    canonical = json.dumps(
        {"experiment": exp.name, "parameters": params, "seed": seed}, sort_keys=True
    )
    return hashlib.sha256(canonical.encode()).hexdigest()


def cmd_run(args) -> int:
    exp, params, seed, outdir = load_config(Path(args.config), args.seed, args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(exp, params, seed)
    run_params = dict(params)
    run_params["_hash"] = digest
    artifacts = exp.runner(run_params, seed, outdir)
    from importlib.metadata import version

    try:
        pkg_version = version("ecsim")
    except Exception:
        pkg_version = "unknown"
    _write_json(
        outdir / "manifest.json",
        {
            "experiment": exp.name,
            "parameters": params,
            "seed": seed,
            "config_sha256": digest,
            "rng": "numpy-pcg64",
            "package_version": pkg_version,
            "artifacts": sorted(artifacts),
        },
    )
    print(f"{exp.name}: wrote {', '.join(sorted(artifacts) + ['manifest.json'])} to {outdir}")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.suite)
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  measured={r.measured:.3e}  tolerance={r.tolerance:.3e}")
        failures += 0 if r.passed else 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="override the output directory")
    run.set_defaults(func=cmd_run)
    ver = sub.add_parser("verify", help="run the cross-module invariant suite")
    ver.add_argument("--suite", choices=("fast", "full"), default="fast")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    threads = os.environ.get("ECSIM_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizingError as exc:
        print(f"sizing error: {exc}", file=sys.stderr)
        return EXIT_SIZING
    except (NumericsError,) as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
