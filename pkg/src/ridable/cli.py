"""Config-driven experiment runner.

Usage::

    ridable run CONFIG.toml [--out DIR] [--task TASK] [--seed SEED]

Exit codes: 0 success, 1 a finite-difference check failed, 2 invalid
configuration or unwritable output, 3 the solver stalled, hit its iteration
cap or met a non-finite objective. See ``README.md`` for the config grammar.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, problems as zoo
from .landscape import mark_critical_points, plane_landscape, sphere_landscape
from .manifolds import ManifoldPoint
from .output import emit_grid, emit_json, emit_trace
from .ridability import estimate_parameters, fd_check
from .solver import NonFiniteObjective, Status, TRConfig, minimize, recover_by_deflation

TASKS = ("minimize", "certify", "landscape", "fdcheck")
#: xor-ed into the run seed for the solver-initialization stream
INIT_STREAM = 0x5EED_1D17
OUT_ENV = "RIDABLE_OUT"
DEFAULT_OUT = "ridable-out"

EXIT_OK, EXIT_FDCHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- problem registry

# name -> default parameters; every accepted key is listed here
PROBLEM_DEFAULTS: dict[str, dict] = {
    "eigenvector": {"n": 10, "diag": None},
    "dictionary": {"n": 3, "p": 20000, "theta": 0.3, "mu": 0.01},
    "phase_retrieval": {"n": 8, "m": 600, "real": False},
    "tensor_single": {"n": 10, "components": "random"},
    "tensor_joint": {"n": 4, "r": 4, "components": "identity"},
    "phase_sync": {"n": 50, "sigma": None},
    "z2_sync": {"n": 40, "sigma": 1.0},
    "saddle_quadratic": {},
    "saddle_cubic": {},
}


def _components(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "identity":
        return np.eye(n)
    if kind == "random":
        return zoo.random_orthonormal(n, rng)
    raise ConfigError(f"components must be 'identity' or 'random', got {kind!r}")


def build_problem(name: str, params: dict, rng: np.random.Generator) -> zoo.Problem:
    """Construct a zoo problem; all instance randomness is drawn from ``rng``."""
    if name not in PROBLEM_DEFAULTS:
        raise ConfigError(f"unknown problem {name!r}; expected one of {sorted(PROBLEM_DEFAULTS)}")
    unknown = set(params) - set(PROBLEM_DEFAULTS[name])
    if unknown:
        raise ConfigError(f"unknown parameters for {name}: {sorted(unknown)}")
    p = {**PROBLEM_DEFAULTS[name], **params}
    for key in ("n", "p", "m", "r"):
        if key in p and not (isinstance(p[key], int) and not isinstance(p[key], bool) and p[key] >= 1):
            raise ConfigError(f"{name}: {key} must be a positive integer, got {p[key]!r}")
    try:
        if name == "eigenvector":
            A = np.diag(np.asarray(p["diag"], dtype=float)) if p["diag"] is not None else \
                zoo.random_symmetric(int(p["n"]), rng)
            return zoo.eigenvector_problem(A)
        if name == "dictionary":
            seed = int(rng.integers(2**63))
            return zoo.planted_dictionary(int(p["n"]), int(p["p"]), float(p["theta"]), float(p["mu"]), seed)
        if name == "phase_retrieval":
            n = int(p["n"])
            if p["real"]:
                x = rng.standard_normal(n)
            else:
                x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            x = x / np.linalg.norm(x)
            return zoo.phase_retrieval_problem(x, int(p["m"]), int(rng.integers(2**63)), real=bool(p["real"]))
        if name == "tensor_single":
            n = int(p["n"])
            return zoo.tensor_single_problem(_components(p["components"], n, rng))
        if name == "tensor_joint":
            n = int(p["n"])
            return zoo.tensor_joint_problem(_components(p["components"], n, rng), int(p["r"]))
        if name == "phase_sync":
            n = int(p["n"])
            sigma = 0.2 / np.sqrt(n) if p["sigma"] is None else float(p["sigma"])
            z = zoo.random_unit_complex(n, rng)
            return zoo.phase_sync_problem(z, zoo.hermitian_noise(n, rng), sigma)
        if name == "z2_sync":
            n = int(p["n"])
            z = rng.choice([-1.0, 1.0], n)
            G = rng.standard_normal((n, n))
            return zoo.z2_sync_problem(z, (G + G.T) / np.sqrt(2.0), float(p["sigma"]))
        quad, cubic = zoo.fig1_fixtures()
        return quad if name == "saddle_quadratic" else cubic
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot build {name}: {exc}") from exc


# --------------------------------------------------------------------------- config


SECTION_KEYS = {
    "certify": {"n_samples": 10000, "neighborhood_samples": 200},
    "landscape": {"n_azimuth": 200, "n_inclination": 100, "extent": 2.0, "resolution": 101, "mark_critical": True},
    "fdcheck": {"n_points": 100, "n_directions": 3},
}
TOP_KEYS = {"task", "seed", "n_restarts", "out", "deflation", "problem", "solver", "init", *SECTION_KEYS}


@dataclass
class RunConfig:
    problem: str
    problem_params: dict
    task: str = "minimize"
    seed: int = 0
    n_restarts: int = 1
    out: str | None = None
    deflation: bool = False
    solver: dict = field(default_factory=dict)
    init_point: list | None = None
    certify: dict = field(default_factory=dict)
    landscape: dict = field(default_factory=dict)
    fdcheck: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        prob = raw.get("problem")
        if not isinstance(prob, dict) or "name" not in prob:
            raise ConfigError("a [problem] table with a 'name' key is required")
        params = {k: v for k, v in prob.items() if k != "name"}
        sections = {}
        for name, defaults in SECTION_KEYS.items():
            sec = raw.get(name, {})
            if not isinstance(sec, dict):
                raise ConfigError(f"[{name}] must be a table")
            bad = set(sec) - set(defaults)
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            sections[name] = {**defaults, **sec}
        init = raw.get("init", {})
        if not isinstance(init, dict) or set(init) - {"point"}:
            raise ConfigError("[init] accepts only 'point'")
        solver = raw.get("solver", {})
        allowed = {f.name for f in fields(TRConfig)} - {"seed"}
        if not isinstance(solver, dict) or set(solver) - allowed:
            raise ConfigError(f"[solver] accepts only {sorted(allowed)}")
        cfg = cls(
            problem=str(prob["name"]),
            problem_params=params,
            task=raw.get("task", "minimize"),
            seed=raw.get("seed", 0),
            n_restarts=raw.get("n_restarts", 1),
            out=raw.get("out"),
            deflation=raw.get("deflation", False),
            solver=dict(solver),
            init_point=init.get("point"),
            **sections,
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.n_restarts, int) or self.n_restarts < 1:
            raise ConfigError("n_restarts must be a positive integer")
        if self.problem != "all" and self.problem not in PROBLEM_DEFAULTS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.problem == "all" and self.task != "fdcheck":
            raise ConfigError("problem 'all' is only valid for the fdcheck task")
        if self.deflation and self.problem != "tensor_single":
            raise ConfigError("deflation applies to tensor_single only")
        try:
            self.tr_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [solver] settings: {exc}") from exc
        c = self.certify
        if int(c["n_samples"]) < 1 or int(c["neighborhood_samples"]) < 0:
            raise ConfigError("[certify] needs n_samples >= 1 and neighborhood_samples >= 0")
        f = self.fdcheck
        if int(f["n_points"]) < 1 or int(f["n_directions"]) < 1:
            raise ConfigError("[fdcheck] needs n_points >= 1 and n_directions >= 1")

    def tr_config(self) -> TRConfig:
        return TRConfig(**self.solver, seed=self.seed)

    def echo(self) -> dict:
        """Canonical description used in artifact headers."""
        return {
            "problem": {"name": self.problem, **self.problem_params},
            "task": self.task,
            "seed": self.seed,
            "n_restarts": self.n_restarts,
            "deflation": self.deflation,
            "solver": self.solver,
            "init_point": self.init_point,
            "section": getattr(self, self.task, {}) if self.task != "minimize" else {},
        }


def problem_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def init_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng((seed + restart) ^ INIT_STREAM)


# --------------------------------------------------------------------------- tasks


def _metrics(problem: zoo.Problem, coords: np.ndarray) -> dict:
    out = {}
    if problem.solution_set is not None:
        out["distance_to_solution"] = problem.solution_set.distance(problem.kind, coords)
    if problem.optimal_value is not None:
        out["optimal_value"] = problem.optimal_value
        out["optimality_gap"] = problem.value(coords) - problem.optimal_value
    if problem.label == "phase_sync":
        out["correlation"] = zoo.sync_correlation(problem.data["z_true"], coords)
    if problem.label == "z2_sync":
        z = problem.data["z_true"]
        zhat = zoo.round_z2(coords)
        out["rounding_exact"] = bool(np.array_equal(zhat, z) or np.array_equal(zhat, -z))
        out["correlation"] = float(abs(zhat @ z)) / z.size
    return out


def _initial_point(cfg: RunConfig, problem: zoo.Problem, restart: int) -> ManifoldPoint:
    if cfg.init_point is not None:
        try:
            return ManifoldPoint(problem.kind, np.asarray(cfg.init_point, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [init] point: {exc}") from exc
    return ManifoldPoint(problem.kind, problem.kind.random_point(init_rng(cfg.seed, restart)))


def _run_minimize(cfg: RunConfig, problem: zoo.Problem, out: Path) -> int:
    tr = cfg.tr_config()
    header = cfg.echo()
    summaries = []
    code = EXIT_OK
    for k in range(cfg.n_restarts):
        trace_path = out / f"trace_{k:03d}.jsonl"
        entry: dict = {"restart": k, "trace": trace_path.name}
        try:
            if cfg.deflation:
                found, traces = recover_by_deflation(problem, init_rng(cfg.seed, k), tr)
                for c, t in enumerate(traces):
                    emit_trace(out / f"trace_{k:03d}_component_{c:02d}.jsonl", t.records,
                               {**header, "restart": k, "component": c})
                emit_trace(trace_path, traces[0].records, {**header, "restart": k, "component": 0})
                A = problem.data["components"]
                dists = [problem.solution_set.distance(problem.kind, u) for u in found]
                matched = sorted(int(np.argmax(np.abs(A.T @ u))) for u in found)
                status = Status.STATIONARY if all(t.status == Status.STATIONARY for t in traces) else \
                    next(t.status for t in traces if t.status != Status.STATIONARY)
                last = traces[-1].final
                entry.update(status=status.value, components=[u.tolist() for u in found],
                             component_distances=dists, all_components_recovered=matched == list(range(A.shape[1])),
                             max_component_distance=max(dists), f=min(problem.value(u) for u in found),
                             grad_norm=last.grad_norm, lambda_min=last.lambda_min,
                             n_iters=sum(len(t.records) for t in traces))
            else:
                x0 = _initial_point(cfg, problem, k)
                x, trace = minimize(problem, x0, tr)
                emit_trace(trace_path, trace.records, {**header, "restart": k})
                fin = trace.final
                entry.update(status=trace.status.value, message=trace.message, f=fin.f,
                             grad_norm=fin.grad_norm, lambda_min=fin.lambda_min, n_iters=len(trace.records),
                             n_accepted=trace.n_accepted, x=np.asarray(x.coords).tolist(),
                             **_metrics(problem, np.asarray(x.coords)))
                status = trace.status
        except NonFiniteObjective as exc:
            if exc.trace is not None:
                emit_trace(trace_path, exc.trace.records, {**header, "restart": k})
            entry.update(status="non_finite", message=str(exc), f=None)
            status = None
        if status != Status.STATIONARY:
            code = EXIT_SOLVER
        summaries.append(entry)
    finite = [s for s in summaries if s.get("f") is not None]
    best = min(finite, key=lambda s: s["f"])["restart"] if finite else None
    emit_json(out / "summary.json", {"config": header, "version": __version__, "restarts": summaries,
                                     "best_restart": best})
    return code


def _run_certify(cfg: RunConfig, problem: zoo.Problem, out: Path) -> int:
    c = cfg.certify
    est = estimate_parameters(problem, int(c["n_samples"]), cfg.seed ^ INIT_STREAM,
                              neighborhood_samples=int(c["neighborhood_samples"]))
    claim = problem.ridability_params
    emit_json(out / "estimate.json", {
        "config": cfg.echo(),
        "version": __version__,
        "problem": problem.label,
        "estimate": est.as_dict(),
        "reported_parameters": None if claim is None else {
            "alpha": claim.alpha, "beta": claim.beta, "gamma": claim.gamma, "delta": claim.delta,
            "values": claim.values,
        },
    })
    return EXIT_OK


def _run_landscape(cfg: RunConfig, problem: zoo.Problem, out: Path) -> int:
    g = cfg.landscape
    try:
        if problem.kind.ambient_dim == 3 and problem.kind.n_blocks == 1:
            grid = sphere_landscape(problem, int(g["n_azimuth"]), int(g["n_inclination"]))
        else:
            grid = plane_landscape(problem, float(g["extent"]), int(g["resolution"]))
    except ValueError as exc:
        raise ConfigError(f"no landscape chart for {problem.label}: {exc}") from exc
    header = cfg.echo()
    emit_grid(out / "grid.csv", grid, header)
    if g["mark_critical"]:
        marks = mark_critical_points(problem, grid, TRConfig(delta0=min(0.05, cfg.tr_config().delta0)))
        emit_json(out / "grid_critical.json", {"config": header, "version": __version__, "chart": grid.chart,
                                               "local_minima": marks})
    return EXIT_OK


def _run_fdcheck(cfg: RunConfig, out: Path) -> int:
    names = [n for n in PROBLEM_DEFAULTS] if cfg.problem == "all" else [cfg.problem]
    f = cfg.fdcheck
    reports = {}
    ok = True
    for i, name in enumerate(names):
        params = cfg.problem_params if cfg.problem != "all" else {}
        problem = build_problem(name, params, problem_rng(cfg.seed))
        rng = np.random.default_rng([cfg.seed ^ INIT_STREAM, i])
        worst_g = worst_h = 0.0
        passed = True
        for _ in range(int(f["n_points"])):
            x = ManifoldPoint(problem.kind, problem.kind.random_point(rng))
            rep = fd_check(problem, x, int(f["n_directions"]), rng=rng)
            worst_g, worst_h = max(worst_g, rep.grad_error), max(worst_h, rep.hess_error)
            passed &= rep.passed
        reports[name] = {"grad_error": worst_g, "hess_error": worst_h, "passed": bool(passed),
                         "n_points": int(f["n_points"])}
        ok &= passed
    emit_json(out / "fdcheck.json", {"config": cfg.echo(), "version": __version__, "problems": reports,
                                     "passed": bool(ok)})
    return EXIT_OK if ok else EXIT_FDCHECK


def resolve_out(cfg: RunConfig, override: str | None) -> Path:
    return Path(override or os.environ.get(OUT_ENV) or cfg.out or DEFAULT_OUT)


def run(config_path, out: str | None = None, task: str | None = None, seed: int | None = None) -> int:
    """Execute one configured experiment and return the process exit code."""
    try:
        cfg = RunConfig.load(config_path)
        if task is not None:
            cfg.task = task
        if seed is not None:
            cfg.seed = seed
        cfg.validate()
        out_dir = resolve_out(cfg, out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            probe = out_dir / ".write-test"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output path {out_dir} is not writable: {exc}") from exc
        if cfg.task == "fdcheck":
            return _run_fdcheck(cfg, out_dir)
        problem = build_problem(cfg.problem, cfg.problem_params, problem_rng(cfg.seed))
        if cfg.task == "minimize":
            return _run_minimize(cfg, problem, out_dir)
        if cfg.task == "certify":
            return _run_certify(cfg, problem, out_dir)
        return _run_landscape(cfg, problem, out_dir)
    except ConfigError as exc:
        print(f"ridable: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ridable: error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ridable", description="Riemannian trust-region experiments.")
    parser.add_argument("--version", action="version", version=f"ridable {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment described by a TOML config")
    r.add_argument("config", help="path to the TOML config")
    r.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    r.add_argument("--task", choices=TASKS, help="override the configured task")
    r.add_argument("--seed", type=int, help="override the configured seed")
    args = parser.parse_args(argv)
    return run(args.config, out=args.out, task=args.task, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
