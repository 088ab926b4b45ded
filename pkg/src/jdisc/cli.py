"""Command-line entry point: ``python -m jdisc <command> [options]``.

Commands: ``solve-disc``, ``foliate``, ``squeeze`` and ``verify``.  Every
run reads an optional YAML configuration, writes its outputs plus a
``manifest.json`` (config echo, seed, stage status, checksums) into the
output directory and exits with

* 0 on success,
* 2 on configuration errors,
* 3 on solver failures (including ellipticity and continuation breakdown),
* 4 when a squeeze certificate is incomplete.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import time
from contextlib import contextmanager

import numpy as np
import yaml

from . import __version__
from .errors import (AccuracyError, AttachFailure, ConfigError, ContinuationBreakdown,
                     DegenerateStructureError, DivergenceError, EllipticityError,
                     JDiscError, SetupError, TamingError)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INCOMPLETE = 0, 2, 3, 4
SOLVER_ERRORS = (AttachFailure, ContinuationBreakdown, DegenerateStructureError,
                 DivergenceError, EllipticityError, TamingError, AccuracyError)

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "structure": {"preset": "flat", "params": {}},
    "grid": {"n_radial": 64, "n_angular": 256},
    "disc": {"t": 0.5, "tau": 0.0},
    "solver": {"tol": 1e-10, "max_iter": 300},
    "continuation": {},
    "symplectic": {"check_points": 1000},
    "experiment": {"preset": "identity", "params": {}},
    "verify": {"suites": ["taming", "lelong", "liouville", "hamiltonian", "levi",
                          "beltrami"]},
    "seed": 0,
}
TOP_KEYS = set(DEFAULTS) | {"command", "output"}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the YAML file, then command-line overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {data.get('schema')}")
        cfg = _merge(cfg, data)
    cfg = _merge(cfg, overrides)
    _check_config(cfg)
    return cfg


def _check_config(cfg):
    g = cfg["grid"]
    if int(g["n_radial"]) < 8 or int(g["n_angular"]) < 8:
        raise ConfigError("grid too small")
    n = int(g["n_angular"])
    if n & (n - 1):
        raise ConfigError("n_angular must be a power of two")
    if not float(cfg["solver"]["tol"]) > 0:
        raise ConfigError("tolerances must be positive")
    if cfg["structure"]["preset"] not in STRUCTURES:
        raise ConfigError(f"unknown structure preset {cfg['structure']['preset']!r}")
    if cfg["experiment"]["preset"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment preset {cfg['experiment']['preset']!r}")


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _flat(**_):
    from .structures import flat_triangular
    return flat_triangular()


def _bump(**params):
    from .structures import bump_perturbation
    return bump_perturbation(**params)


def _constant(a=0.0, b=0.0):
    """``W_zbar + a W_z = b`` with constant coefficients."""
    from .structures import TriangularStructure
    a, b = complex(a), complex(b)
    return TriangularStructure(lambda z, w: a + 0 * z, lambda z, w: b + 0 * z, abs(a),
                               "constant")


def _pinch(strength=0.95, w_on=0.5, width=0.1):
    from .structures import pinch_structure
    return pinch_structure(strength, w_on, width)


STRUCTURES = {"flat": _flat, "standard": _flat, "bump": _bump, "constant": _constant,
              "pinch": _pinch}
EXPERIMENTS = {"identity", "shear", "rh-probe"}


def build_structure(cfg):
    spec = cfg["structure"]
    try:
        return STRUCTURES[spec["preset"]](**(spec.get("params") or {}))
    except TypeError as exc:
        raise ConfigError(f"bad structure parameters: {exc}") from exc


def _grid(cfg):
    from .grid import DiscGrid
    return DiscGrid(int(cfg["grid"]["n_radial"]), int(cfg["grid"]["n_angular"]))


# ---------------------------------------------------------------------------
# manifest, lock and output helpers
# ---------------------------------------------------------------------------

def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


@contextmanager
def output_lock(out):
    """Exclusive ``.lock`` file in the output directory for the run's duration."""
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, ".lock")
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise ConfigError(f"output directory {out} is locked by another run") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        os.remove(path)


class Run:
    """Bookkeeping for one command: stages, files and the manifest."""

    def __init__(self, command, cfg, out):
        self.command, self.cfg, self.out = command, cfg, out
        self.stages = []
        self.files = []
        self.started = time.time()

    def stage(self, name, status, **info):
        self.stages.append({"name": name, "status": status, **info})

    def path(self, *parts):
        p = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def add(self, path):
        self.files.append(path)
        return path

    def manifest(self, exit_code):
        inventory = {os.path.relpath(p, self.out): sha256(p)
                     for p in sorted(set(self.files)) if os.path.exists(p)}
        data = {"artifact": "jdisc", "version": __version__, "command": self.command,
                "config": self.cfg, "seed": self.cfg["seed"], "stages": self.stages,
                "exit_code": exit_code, "files": inventory,
                "timing": {"started": self.started, "wall_clock": time.time() - self.started}}
        write_json(os.path.join(self.out, "manifest.json"), data)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve_disc(cfg, run: Run):
    from .attach import TorusTarget, attach_disc, verify_admissible_disc
    from .symplectic import measure
    S = build_structure(cfg)
    grid = _grid(cfg)
    d = cfg["disc"]
    sol = attach_disc(S, TorusTarget(float(d["t"])), float(d["tau"]), grid=grid,
                      tol=float(cfg["solver"]["tol"]), max_iter=int(cfg["solver"]["max_iter"]))
    m = measure(sol)
    sol.area, sol.boundary_area = m.area, m.boundary_area
    sol.save(run.add(run.path("disc.csv")))
    with open(run.add(run.path("convergence.csv")), "w") as fh:
        fh.write("sweep,residual,boundary_deviation\n")
        for k, (res, bdev) in enumerate(sol.history, start=1):
            fh.write(f"{k},{res:.6e},{bdev:.6e}\n")
    report = {"metadata": sol.metadata(), "verification": verify_admissible_disc(sol).as_dict(),
              "area": m.area, "boundary_area": m.boundary_area, "stokes_gap": m.stokes_gap,
              "length": m.length, "area_length_ratio": m.ratio}
    write_json(run.add(run.path("report.json")), report)
    run.stage("attach", "ok", iterations=sol.iterations, residual=sol.residual_norm)
    return EXIT_OK


def _continuation_config(cfg):
    from .continuation import ContinuationConfig
    c = dict(cfg["continuation"])
    c.pop("restart_probe", None)
    c.setdefault("tol", float(cfg["solver"]["tol"]))
    c.setdefault("max_iter", int(cfg["solver"]["max_iter"]))
    c.setdefault("n_radial", int(cfg["grid"]["n_radial"]))
    c.setdefault("n_angular", int(cfg["grid"]["n_angular"]))
    c.setdefault("seed", int(cfg["seed"]))
    try:
        return ContinuationConfig(**c)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad continuation config: {exc}") from exc


def cmd_foliate(cfg, run: Run):
    from .continuation import admissibility_report, export_foliation, restart_probe, run_continuation
    S = build_structure(cfg)
    ccfg = _continuation_config(cfg)
    try:
        F = run_continuation(S, ccfg)
    except ContinuationBreakdown as exc:
        run.stage("continuation", "breakdown", last_good_t=exc.last_good_t, message=str(exc))
        if exc.foliation is not None:
            F = exc.foliation
            F.admissibility_report = admissibility_report(F)
            F.admissibility_report["breakdown"] = {"last_good_t": exc.last_good_t,
                                                   "message": str(exc)}
            for p in export_foliation(F, run.path("foliation")):
                run.add(p)
        write_json(run.add(run.path("report.json")),
                   {"complete": False, "last_good_t": exc.last_good_t, "message": str(exc)})
        return EXIT_SOLVER
    run.stage("continuation", "ok", levels=len(F.t_levels))
    report = dict(F.admissibility_report)
    if cfg["continuation"].get("restart_probe"):
        probe, _ = restart_probe(S, F)
        report["restart_probe"] = probe
        run.stage("restart_probe", "ok", **probe)
    F.admissibility_report = report
    for p in export_foliation(F, run.path("foliation")):
        run.add(p)
    write_json(run.add(run.path("report.json")), {"complete": True, **report})
    return EXIT_OK


def _experiment(cfg):
    from .nonsqueezing import SqueezeExperiment, ball
    from .symplectic import HamiltonianMap, IdentityMap, shear_hamiltonian
    p = dict(cfg["experiment"].get("params") or {})
    preset = cfg["experiment"]["preset"]
    res = (int(cfg["grid"]["n_radial"]), int(cfg["grid"]["n_angular"]))
    common = {"resolution": res, "tol": float(cfg["solver"]["tol"]), "seed": int(cfg["seed"])}
    for key in ("exhaustion", "shift", "area_tol", "step"):
        if key in p:
            common[key] = tuple(p.pop(key)) if key == "exhaustion" else float(p.pop(key))
    if preset == "identity":
        r = float(p.pop("radius", 1.0))
        e = SqueezeExperiment(IdentityMap(), ball(r), R=float(p.pop("R", r)), **common)
    else:
        H = shear_hamiltonian(float(p.pop("strength", 0.1)))
        phi = HamiltonianMap(H, float(p.pop("flow_time", 1.0)), float(p.pop("dt", 0.1)))
        e = SqueezeExperiment(phi, ball(float(p.pop("radius", 0.8))),
                              R=float(p.pop("R", 1.0)), **common)
    if p:
        raise ConfigError(f"unknown experiment parameters: {sorted(p)}")
    return e


def cmd_squeeze(cfg, run: Run):
    if cfg["experiment"]["preset"] == "rh-probe":
        return _rh_probe(cfg, run)
    from .nonsqueezing import run_squeeze_experiment
    e = _experiment(cfg)
    try:
        report = run_squeeze_experiment(e)
    except SetupError as exc:
        run.stage("setup", "failed", message=str(exc))
        raise ConfigError(str(exc)) from exc
    for s in report["stages"]:
        disc = s.pop("disc", None)
        if disc is not None:
            disc.save(run.add(run.path(f"disc_n{s['n']}.csv")))
        run.stage(f"exhaustion n={s['n']}", "failed" if "error" in s else "ok")
    write_json(run.add(run.path("certificate.json")), report)
    return EXIT_OK if report["certificate"] else EXIT_INCOMPLETE


def _rh_probe(cfg, run: Run):
    from .nonsqueezing import PRESETS, real_bidisc_probe, rh_upper_estimate
    p = dict(cfg["experiment"].get("params") or {})
    name = p.get("domain", "real_bidisc")
    if name not in PRESETS:
        raise ConfigError(f"unknown domain preset {name!r}")
    G = PRESETS[name](*p.get("args", []))
    rng = np.random.default_rng(int(cfg["seed"]))
    est = rh_upper_estimate(G, budget=int(p.get("budget", 1200)),
                            refine_budget=int(p.get("refine_budget", 200)), rng=rng)
    report = {"domain": G.name, "label": est.label, "rh_upper_estimate": est.value,
              "margin_over_one": est.margin(1.0), "sampled_best": est.sampled_best,
              "candidates": est.n_candidates, "evaluations": est.evaluations,
              "budget_exhausted": est.budget_exhausted,
              "best_candidate": {"a": list(est.candidate.a), "b": list(est.candidate.b),
                                 "rho": est.candidate.rho},
              "resolution": {"n_theta": 256, "n_r": 64}}
    if name == "real_bidisc":
        report["probe"] = real_bidisc_probe(rng=rng)
    write_json(run.add(run.path("certificate.json")), report)
    run.stage("rh_estimate", "ok", value=est.value)
    ok = est.margin(1.0) > 0 if name == "real_bidisc" else True
    return EXIT_OK if ok else EXIT_INCOMPLETE


def cmd_verify(cfg, run: Run):
    seed = int(cfg["seed"])
    results = {}
    for name in cfg["verify"]["suites"]:
        if name not in SUITES:
            raise ConfigError(f"unknown suite {name!r}")
        results[name] = SUITES[name](np.random.default_rng(seed))
        run.stage(name, "ok" if results[name]["ok"] else "failed")
    write_json(run.add(run.path("verify.json")), results)
    return EXIT_OK if all(r["ok"] for r in results.values()) else EXIT_SOLVER


# ---------------------------------------------------------------------------
# property suites
# ---------------------------------------------------------------------------

def suite_taming(rng, n=10_000):
    """``omega(V, JV) > 0`` for all ``V`` exactly when ``||A|| < 1``.

    The "for all V" side is the smallest eigenvalue of the symmetric part
    of ``OMEGA J``; the sampled ``V`` must also give a positive value
    whenever ``||A|| < 1``.  Draws with ``det(I - A conj(A))`` at the
    degeneracy threshold have no ``J`` and are counted separately.
    """
    from .structures import OMEGA, operator_norm, structure_from_matrix, taming_form
    A = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    A *= (rng.uniform(0, 2, n) / operator_norm(A))[:, None, None]
    V = rng.normal(size=(n, 4))
    det = np.abs(np.linalg.det(np.eye(2) - A @ np.conj(A)))
    ok = det > 1e-9
    J = structure_from_matrix(A[ok])
    lam = np.linalg.eigvalsh(taming_form(J))[:, 0]
    tamed = operator_norm(A[ok]) < 1
    sampled = np.einsum("ni,ij,njk,nk->n", V[ok], OMEGA, J, V[ok])
    mism = int(np.count_nonzero((lam > 0) != tamed) + np.count_nonzero(tamed & (sampled <= 0)))
    return {"samples": n, "degenerate_skipped": int(n - ok.sum()), "mismatches": mism,
            "ok": mism == 0}


def suite_lelong(rng, n=1000):
    from .nonsqueezing import lelong_batch
    rep = lelong_batch(n, (0.5, 1.0), rng=rng)
    return rep


def suite_liouville(rng, n=1000):
    from .symplectic import SymplecticContext
    d = SymplecticContext().primitive_defect(rng.uniform(-2, 2, (n, 4)))
    return {"points": n, "max_defect": d, "ok": d < 1e-6}


def suite_hamiltonian(rng, n=1000):
    from .symplectic import (HamiltonianMap, radial_bump_hamiltonian,
                             shear_hamiltonian)
    X = rng.uniform(-1.2, 1.2, (n, 4))
    out = {}
    for H in (shear_hamiltonian(0.1), radial_bump_hamiltonian()):
        out[H.name] = HamiltonianMap(H, 1.0, 1e-2).symplectic_defect(X)
    return {"points": n, "max_defect": out, "ok": max(out.values()) < 1e-6}


def suite_levi(rng, n=1000):
    """Levi form of ``|z|^2 + |w|^2``: positive, and equal to ``4|V|^2``."""
    from .structures import levi_form

    def rho(X):
        return np.sum(np.asarray(X) ** 2, axis=-1)
    worst_gap, min_val = 0.0, np.inf
    for _ in range(n):
        p = rng.uniform(-1, 1, 4)
        V = rng.normal(size=4)
        V /= np.linalg.norm(V)
        L = levi_form(rho, p, V)
        min_val = min(min_val, L)
        worst_gap = max(worst_gap, abs(L - 4.0))
    return {"samples": n, "min_value": min_val, "max_oracle_gap": worst_gap,
            "ok": min_val > 0 and worst_gap < 1e-4}


def suite_beltrami(rng, n_cases=3):
    """Manufactured solutions ``w*`` with analytic ``Q``, recovered to 1e-6."""
    from .beltrami import BeltramiProblem, RiemannHilbert, solve_beltrami
    from .grid import DiscGrid, GridFunction
    grid = DiscGrid(64, 256)
    z = grid.z
    worst_res, worst_err = 0.0, 0.0
    for k in range(n_cases):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        q0 = 0.3 * k
        # w* = (1 - |z|^2) (c0 + c1 z + c2 zbar), with exact derivatives
        w = (1 - np.abs(z) ** 2) * (c[0] + c[1] * z + c[2] * np.conj(z))
        wz = -np.conj(z) * (c[0] + c[1] * z + c[2] * np.conj(z)) + (1 - np.abs(z) ** 2) * c[1]
        wzb = -z * (c[0] + c[1] * z + c[2] * np.conj(z)) + (1 - np.abs(z) ** 2) * c[2]
        q = q0 * np.exp(1j * np.real(z))
        problem = BeltramiProblem(GridFunction(q, grid), GridFunction(wzb - q * wz, grid))
        sol = solve_beltrami(problem, RiemannHilbert.matching(GridFunction(w, grid)))
        worst_res = max(worst_res, sol.residual_norm)
        worst_err = max(worst_err, float(np.abs(sol.w.values - w).max()))
    return {"cases": n_cases, "max_residual": worst_res, "max_error": worst_err,
            "ok": worst_res < 1e-8 and worst_err < 1e-6}


SUITES = {"taming": suite_taming, "lelong": suite_lelong, "liouville": suite_liouville,
          "hamiltonian": suite_hamiltonian, "levi": suite_levi, "beltrami": suite_beltrami}


COMMANDS = {"solve-disc": cmd_solve_disc, "foliate": cmd_foliate,
            "squeeze": cmd_squeeze, "verify": cmd_verify}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="jdisc", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resolution", nargs=2, type=int, metavar=("NR", "NA"))
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS/OpenMP threads (recorded; effective for child processes)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.resolution:
        overrides["grid"] = {"n_radial": args.resolution[0], "n_angular": args.resolution[1]}
    if args.tol is not None:
        overrides["solver"] = {"tol": args.tol}
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
        overrides["threads"] = args.threads
    threads = overrides.pop("threads", None)
    out = args.out or f"jdisc-{args.command}"
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        os.makedirs(out, exist_ok=True)
        run = Run(args.command, {"error": str(exc), "seed": args.seed}, out)
        run.stage("config", "failed", message=str(exc))
        run.manifest(EXIT_CONFIG)
        return EXIT_CONFIG
    if cfg.get("command") not in (None, args.command):
        print(f"config error: config is for {cfg['command']!r}", file=sys.stderr)
        return EXIT_CONFIG
    cfg["threads"] = threads
    try:
        with output_lock(out):
            run = Run(args.command, cfg, out)
            try:
                code = COMMANDS[args.command](cfg, run)
            except ConfigError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                run.stage("config", "failed", message=str(exc))
                code = EXIT_CONFIG
            except SOLVER_ERRORS as exc:
                print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
                run.stage("solver", "failed", error=type(exc).__name__, message=str(exc))
                code = EXIT_SOLVER
            except JDiscError as exc:
                print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
                run.stage("solver", "failed", error=type(exc).__name__, message=str(exc))
                code = EXIT_SOLVER
            run.manifest(code)
            return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
