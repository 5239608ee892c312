"""Command-line driver: scenario files, runs, gain sweeps and their outputs.

Scenario JSON schema::

    {"name": str (optional), "n_agents": int,
     "edges": [[tail, head], ...],          # 1-indexed, order = edge labels
     "displacements": [[dx, dy], ...],      # p_tail - p_head per edge
     "gains": {"a": float, "b": float, "epsilon": float | null, "k": float | [float]},
     "target": [qx, qy],
     "initial": {"type": "random", "radius": float, "seed": int}
              | {"type": "explicit", "poses": [[x, y, theta], ...]},
     "t_final": float, "dt": float, "stride": int (optional)}

A missing or null ``epsilon`` selects the default timescale ``0.1 k_min / ell``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .analysis import formation_error_curve, steady_state_report
from .controller import GainConfig, heuristic_epsilon, with_heuristic_epsilon
from .errors import ParseError, SpecError, SwarmError, ValidationError
from .graph import spec_from_edges
from .scenarios import builtin_scenarios
from .sim import (
    DEFAULT_STRIDE,
    DEFAULT_TOL,
    ExplicitInitial,
    RandomInitial,
    Scenario,
    Trajectory,
    detect_convergence,
    integrate,
    max_stable_dt,
)

log = logging.getLogger("swarmfo")

EMIT_CHOICES = ("trajectory_csv", "summary_json", "curve_csv")
EXIT_CONVERGED, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def fmt(x) -> str:
    return format(float(x), ".17g")


# -- scenario files ----------------------------------------------------------


def scenario_to_dict(scenario: Scenario) -> dict:
    spec, gains = scenario.spec, scenario.gains
    if isinstance(scenario.initial, RandomInitial):
        initial = {"type": "random", "radius": scenario.initial.radius, "seed": scenario.initial.seed}
    else:
        initial = {"type": "explicit", "poses": scenario.initial.poses.tolist()}
    return {
        "name": scenario.name,
        "n_agents": spec.n_agents,
        "edges": [[t + 1, h + 1] for t, h in spec.edges],
        "displacements": spec.displacements.tolist(),
        "gains": {
            "a": gains.a,
            "b": gains.b,
            "epsilon": gains.epsilon,
            "k": list(gains.k) if isinstance(gains.k, tuple) else gains.k,
        },
        "target": scenario.target.tolist(),
        "initial": initial,
        "t_final": scenario.t_final,
        "dt": scenario.dt,
        "stride": scenario.stride,
    }


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def _require(data: dict, key: str, where: str = ""):
    if key not in data:
        raise ValidationError(f"missing field {where}{key!r}", field=where + key)
    return data[key]


def _number(value, name, positive=True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}", field=name)
    value = float(value)
    if not np.isfinite(value) or (positive and value <= 0):
        raise ValidationError(f"{name} must be strictly positive, got {value!r}", field=name)
    return value


def scenario_from_dict(data: dict, default_name: str = "scenario") -> Scenario:
    """Validate a decoded scenario document; errors name the offending field."""
    if not isinstance(data, dict):
        raise ValidationError("scenario document must be a JSON object")
    n = _require(data, "n_agents")
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise ValidationError("n_agents must be an integer >= 2", field="n_agents")
    edges = _require(data, "edges")
    disp = _require(data, "displacements")
    try:
        edges_arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        disp_arr = np.asarray(disp, dtype=float).reshape(-1, 2)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"edges/displacements must be lists of pairs: {exc}", field="edges")
    if len(edges_arr) != len(edges) or len(disp_arr) != len(disp):
        raise ValidationError("edges and displacements must be lists of pairs", field="edges")
    if len(edges_arr) != len(disp_arr):
        raise ValidationError(
            f"{len(edges_arr)} edges but {len(disp_arr)} displacements", field="displacements"
        )
    try:
        spec = spec_from_edges(n, edges_arr.tolist(), disp_arr)
    except SpecError as exc:
        culprit = "displacements" if "Unrealizable" in type(exc).__name__ else "edges"
        raise ValidationError(f"{type(exc).__name__}: {exc}", field=culprit) from exc

    g = _require(data, "gains")
    if not isinstance(g, dict):
        raise ValidationError("gains must be an object", field="gains")
    a = _number(_require(g, "a", "gains."), "gains.a")
    b = _number(_require(g, "b", "gains."), "gains.b")
    k_raw = _require(g, "k", "gains.")
    if isinstance(k_raw, list):
        if len(k_raw) != n:
            raise ValidationError(f"gains.k lists {len(k_raw)} gains for {n} agents", field="gains.k")
        k = tuple(_number(v, "gains.k") for v in k_raw)
    else:
        k = _number(k_raw, "gains.k")
    eps_raw = g.get("epsilon")
    eps = heuristic_epsilon(spec, a, b, k) if eps_raw is None else _number(eps_raw, "gains.epsilon")
    gains = GainConfig(a, b, eps, k)

    target = _require(data, "target")
    if not (isinstance(target, list) and len(target) == 2):
        raise ValidationError("target must be [qx, qy]", field="target")
    target = [_number(v, "target", positive=False) for v in target]

    init = _require(data, "initial")
    if not isinstance(init, dict):
        raise ValidationError("initial must be an object", field="initial")
    kind = init.get("type")
    if kind == "random":
        seed = init.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ValidationError("initial.seed must be a non-negative integer", field="initial.seed")
        initial = RandomInitial(_number(init.get("radius", 1.0), "initial.radius"), seed)
    elif kind == "explicit":
        poses = np.asarray(_require(init, "poses", "initial."), dtype=float)
        if poses.shape != (n, 3):
            raise ValidationError(f"initial.poses must be {n} rows of [x, y, theta]", field="initial.poses")
        initial = ExplicitInitial(poses)
    else:
        raise ValidationError(f"initial.type must be 'random' or 'explicit', got {kind!r}", field="initial.type")

    t_final = _number(_require(data, "t_final"), "t_final")
    dt = _number(_require(data, "dt"), "dt")
    stride = data.get("stride", DEFAULT_STRIDE)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
        raise ValidationError("stride must be a positive integer", field="stride")
    try:
        return Scenario(
            str(data.get("name", default_name)), spec, gains, target, initial, t_final, dt, stride
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def parse_scenario_file(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from exc
    return scenario_from_dict(data, default_name=path.stem)


def resolve_scenario(name_or_path: str) -> Scenario:
    scenarios = builtin_scenarios()
    if name_or_path in scenarios:
        return scenarios[name_or_path]
    path = Path(name_or_path)
    if path.is_file():
        return parse_scenario_file(path)
    raise ValidationError(
        f"{name_or_path!r} is neither a built-in scenario ({', '.join(sorted(scenarios))}) nor a file",
        field="scenario",
    )


# -- outputs -----------------------------------------------------------------


def trajectory_header(n_agents: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n_agents + 1):
        cols += [f"x_{i}", f"y_{i}", f"theta_{i}", f"u_x{i}", f"u_y{i}"]
    return cols + ["cost", "grad_norm", "formation_residual", "target_distance"]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.n_agents
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_header(n))
        for s in range(len(traj)):
            row = [fmt(traj.times[s])]
            for i in range(n):
                row += [fmt(v) for v in traj.poses[s, i]]
                row += [fmt(traj.inputs[s, 2 * i]), fmt(traj.inputs[s, 2 * i + 1])]
            row += [
                fmt(traj.cost[s]),
                fmt(traj.gradient_norm[s]),
                fmt(traj.formation_residual[s]),
                fmt(traj.target_distance[s]),
            ]
            writer.writerow(row)


CURVE_HEADER = ["a", "gain_ratio", "formation_residual", "target_distance"]
SIM_HEADER = ["sim_formation_residual", "sim_target_distance", "sim_converged"]


def write_curve_csv(rows: Sequence[Sequence], path, simulated: bool) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER + (SIM_HEADER if simulated else []))
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


# -- operations --------------------------------------------------------------


@dataclass
class RunConfig:
    scenario: str
    mode: str = "centralized"
    dt: Optional[float] = None
    t_final: Optional[float] = None
    seed: Optional[int] = None
    output_dir: Path = Path("out")
    emit: tuple = ("trajectory_csv", "summary_json")
    tol: float = DEFAULT_TOL
    backend: Optional[str] = None
    sweep_a: Optional[list] = None
    simulate_sweep: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("--dt must be positive", field="dt")
        if self.t_final is not None and not self.t_final > 0:
            raise ValidationError("--t-final must be positive", field="t_final")
        unknown = set(self.emit) - set(EMIT_CHOICES)
        if unknown:
            raise ValidationError(f"unknown outputs {sorted(unknown)}", field="emit")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValidationError("--seed must be a 64-bit unsigned integer", field="seed")
        self.output_dir = Path(self.output_dir)


def _default_curve_a(a: float) -> list[float]:
    return list(a * np.logspace(-2, 4, 13))


def _execute(config: RunConfig) -> int:
    scenario = resolve_scenario(config.scenario)
    if (
        isinstance(scenario.initial, RandomInitial)
        and scenario.initial.seed is None
        and config.seed is None
    ):
        raise ValidationError("random initial poses need a seed (--seed)", field="seed")
    traj = integrate(
        scenario, config.mode, seed=config.seed, dt=config.dt, t_final=config.t_final,
        backend=config.backend,
    )
    verdict = detect_convergence(traj, scenario.spec, scenario.gains, scenario.target, config.tol)
    report = steady_state_report(scenario.spec, scenario.gains, scenario.target)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if "trajectory_csv" in config.emit:
        write_trajectory_csv(traj, out / "trajectory.csv")
    if "summary_json" in config.emit:
        seed = config.seed
        if seed is None and isinstance(scenario.initial, RandomInitial):
            seed = scenario.initial.seed
        summary = {
            "scenario": scenario.name,
            "mode": config.mode,
            "backend": traj.backend,
            "seed": seed,
            "dt": traj.dt,
            "t_final": float(traj.times[-1]),
            "n_samples": len(traj),
            "tolerance": config.tol,
            "gains": scenario_to_dict(scenario)["gains"],
            "target": scenario.target.tolist(),
            "verdict": verdict.to_dict(),
            "steady_state": report.to_dict(),
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if "curve_csv" in config.emit:
        curve = formation_error_curve(
            scenario.spec, scenario.target, scenario.gains.b, config.sweep_a or _default_curve_a(scenario.gains.a)
        )
        write_curve_csv([p[:4] for p in curve], out / "curve.csv", simulated=False)
    label = "in formation" if report.in_formation else "OUT OF FORMATION"
    status = f"converged at t={verdict.t_converged:g}" if verdict.converged else "not converged"
    print(
        f"{scenario.name}: {status}; |r - r_inf| = {verdict.r_inf_deviation:.3g}; "
        f"residual {report.relative_residual:.3%} of |d| ({label}); "
        f"gain ratio {report.gain_ratio:.3g}"
    )
    return EXIT_CONVERGED if verdict.converged else EXIT_NOT_CONVERGED


def run(config: RunConfig) -> int:
    """Simulate, judge convergence, write outputs. Exit code 0, 2 (not converged) or 1 (error)."""
    try:
        return _execute(config)
    except (SwarmError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def sweep_rows(config: RunConfig, a_values: Sequence[float], simulate: bool = True) -> list[list]:
    """Closed-form curve over ``a`` (``b`` fixed), optionally with simulated endpoints.

    Every simulated row re-derives the default timescale for its ``a`` so the
    timescale separation is preserved along the sweep.
    """
    scenario = resolve_scenario(config.scenario)
    gains = scenario.gains
    curve = formation_error_curve(scenario.spec, scenario.target, gains.b, a_values, k=gains.k)
    rows = []
    for point in curve:
        row = list(point[:4])
        if simulate:
            g = with_heuristic_epsilon(scenario.spec, point.a, gains.b, gains.k)
            base_dt = config.dt if config.dt is not None else scenario.dt
            dt = min(base_dt, max_stable_dt(scenario.spec, g))
            sc = Scenario(
                scenario.name, scenario.spec, g, scenario.target, scenario.initial,
                max(scenario.t_final, dt), dt, scenario.stride,
            )
            traj = integrate(sc, config.mode, seed=config.seed, t_final=config.t_final, backend=config.backend)
            verdict = detect_convergence(traj, sc.spec, g, sc.target, config.tol)
            row += [verdict.final_formation_residual, verdict.final_target_distance, str(verdict.converged).lower()]
        rows.append(row)
    return rows


def sweep(config: RunConfig, a_values: Sequence[float], simulate: bool = True) -> Path:
    rows = sweep_rows(config, a_values, simulate)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / "curve.csv"
    write_curve_csv(rows, path, simulated=simulate)
    return path


# -- entry point -------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _emit_list(text: str) -> tuple:
    items = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [v for v in items if v not in EMIT_CHOICES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown outputs {bad}; choose from {', '.join(EMIT_CHOICES)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="swarmfo",
        description="Simulate distributed feedback optimisation of a unicycle swarm.",
    )
    p.add_argument("--scenario", default="pentagon", help="built-in name or path to a scenario JSON")
    p.add_argument("--mode", choices=("centralized", "distributed"), default="centralized")
    p.add_argument("--dt", type=float, help="override the scenario time step")
    p.add_argument("--t-final", type=float, help="override the scenario horizon")
    p.add_argument("--seed", type=int, help="seed for random initial poses")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument(
        "--emit", type=_emit_list, default=("trajectory_csv", "summary_json"),
        help=f"comma list from {', '.join(EMIT_CHOICES)}",
    )
    p.add_argument("--sweep-a", type=_float_list, help="comma list of formation weights a to sweep")
    p.add_argument("--closed-form-only", action="store_true", help="skip simulated endpoints in a sweep")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative gradient tolerance")
    p.add_argument("--backend", choices=("cython", "python"), help="kernel for centralized runs")
    p.add_argument("--list", action="store_true", help="list built-in scenarios and exit")
    p.add_argument("--write-scenario", type=Path, help="write the resolved scenario JSON and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.list:
        for name, sc in builtin_scenarios().items():
            print(f"{name:14s} N={sc.spec.n_agents:<3d} M={sc.spec.n_edges:<3d} {sc.notes}")
        print(f"kernel backend: {_backend.BACKEND}")
        return EXIT_CONVERGED
    try:
        config = RunConfig(
            scenario=args.scenario, mode=args.mode, dt=args.dt, t_final=args.t_final,
            seed=args.seed, output_dir=args.out, emit=args.emit, tol=args.tol,
            backend=args.backend, sweep_a=args.sweep_a,
            simulate_sweep=not args.closed_form_only,
        )
        if args.write_scenario:
            dump_scenario(resolve_scenario(config.scenario), args.write_scenario)
            return EXIT_CONVERGED
        if config.sweep_a:
            path = sweep(config, config.sweep_a, simulate=config.simulate_sweep)
            print(f"wrote {path}")
            return EXIT_CONVERGED
    except (SwarmError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
