"""Command-line front end: ``lmorse {shoot,conjugates,index,verify,sweep,selftest}``.

Every command reads a JSON run configuration, writes CSV/JSON into the
output directory and is deterministic given the configuration and seed.

Exit codes: 0 success, 1 a verification check failed, 2 bad configuration,
3 integration or numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from . import lindex
from .errors import LGeometryError
from .flowbg import FlowBackground, as_point, dg_dtau_at, tensors_at, transition_arrays
from .lgeo import DEFAULT_TOL, llength, shoot, shoot_tau_form
from .ljacobi import conjugate_scan, jacobi_matrix

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
MAX_GRID = 1_000_000

_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}

RUN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["background", "p", "v", "tau_bar"],
    "properties": {
        "background": {
            "type": "object",
            "required": ["kind", "n"],
            "properties": {
                "kind": {"enum": ["euclidean", "sphere", "cylinder"]},
                "n": {"type": "integer", "minimum": 1},
                "c0": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "p": _vec,
        "p_chart": {"enum": [0, 1]},
        "v": _vec,
        "tau_bar": {"type": "number", "exclusiveMinimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-3},
        "meshes": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 2},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "v_grid": {
            "type": "object",
            "properties": {
                "axes": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [{"type": "number"}, {"type": "number"},
                                                               {"type": "integer", "minimum": 1}],
                              "minItems": 3, "maxItems": 3},
                },
                "vectors": {"type": "array", "items": _vec, "minItems": 1},
            },
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
        },
        "jobs": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    background: FlowBackground
    p: np.ndarray
    v: np.ndarray
    tau_bar: float
    tol: float = DEFAULT_TOL
    meshes: tuple = (64, 128)
    output_dir: str = "out"
    seed: int = 0
    p_chart: int = 0

    @property
    def point(self):
        return as_point(self.p, self.p_chart)


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    vectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    jobs: int = 0


def load_config(path, overrides=None) -> tuple[RunConfig, dict]:
    """Read, validate and apply command-line overrides; raises :class:`ConfigError`."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        jsonschema.validate(raw, RUN_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {loc}: {exc.message}") from exc
    try:
        bg = FlowBackground.from_json(raw["background"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"background: {exc}") from exc
    p, v = np.asarray(raw["p"], float), np.asarray(raw["v"], float)
    if p.shape != (bg.n,) or v.shape != (bg.n,):
        raise ConfigError(f"p and v must have {bg.n} components")
    meshes = tuple(raw.get("meshes", (64, 128)))
    if list(meshes) != sorted(set(meshes)):
        raise ConfigError("meshes must be strictly increasing")
    cfg = RunConfig(bg, p, v, float(raw["tau_bar"]), float(raw.get("tol", DEFAULT_TOL)), meshes,
                    raw.get("output_dir", "out"), int(raw.get("seed", 0)),
                    int(raw.get("p_chart", 0)))
    return cfg, raw


def sweep_vectors(raw: dict, n: int) -> np.ndarray:
    grid = raw.get("v_grid")
    if grid is None:
        raise ConfigError("sweep needs a v_grid")
    if "vectors" in grid:
        vecs = np.asarray(grid["vectors"], float)
        if vecs.ndim != 2 or vecs.shape[1] != n:
            raise ConfigError(f"v_grid vectors must have {n} components")
        return vecs
    axes = grid["axes"]
    if len(axes) != n:
        raise ConfigError(f"v_grid needs {n} axes")
    if int(np.prod([a[2] for a in axes])) > MAX_GRID:
        raise ConfigError(f"v_grid exceeds {MAX_GRID} points")
    return np.array(list(itertools.product(*(np.linspace(a, b, m) for a, b, m in axes))))


# ---------------------------------------------------------------------------
# output helpers


def _outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _write_json(data, path):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _tau_form_endpoint(cfg: RunConfig, tau_eps: float, path):
    """Endpoint of the unregularized integration and its gap to the regularized one."""
    bg = cfg.background
    sol = shoot_tau_form(bg, cfg.point, cfg.v, cfg.tau_bar, tau_eps, tol=min(cfg.tol, 1e-12))
    y, chart = sol(cfg.tau_bar)
    x = y[:bg.n]
    end = path.endpoint
    if chart != end.chart:
        x = transition_arrays(bg, x)[0]
    return {"tau_epsilon": tau_eps, "endpoint": y[:bg.n].tolist(), "chart": int(chart),
            "gap_to_regularized": float(np.max(np.abs(x - end.coords)))}


# ---------------------------------------------------------------------------
# commands


def cmd_shoot(cfg: RunConfig, tau_eps=None) -> int:
    out = _outdir(cfg)
    path = shoot(cfg.background, cfg.point, cfg.v, cfg.tau_bar, cfg.tol)
    path.to_csv(os.path.join(out, "path.csv"))
    summary = path.summary()
    if tau_eps is not None:
        summary["tau_form"] = _tau_form_endpoint(cfg, tau_eps, path)
    _write_json(summary, os.path.join(out, "summary.json"))
    return EXIT_OK


def cmd_conjugates(cfg: RunConfig, tau_eps=None) -> int:
    out = _outdir(cfg)
    path = shoot(cfg.background, cfg.point, cfg.v, cfg.tau_bar, cfg.tol)
    conjugate_scan(path).write(os.path.join(out, "conjugates.json"))
    return EXIT_OK


def cmd_index(cfg: RunConfig, tau_eps=None) -> int:
    out = _outdir(cfg)
    path = shoot(cfg.background, cfg.point, cfg.v, cfg.tau_bar, cfg.tol)
    rows, report = [], {"meshes": list(cfg.meshes), "morse_index": []}
    for m in cfg.meshes:
        ev = lindex.assemble(path, m).eigenvalues()
        scale = float(np.max(np.abs(ev)))
        report["morse_index"].append(int(np.sum(ev < -1e-9 * scale)))
        rows.extend((m, i, repr(float(e))) for i, e in enumerate(ev))
    with open(os.path.join(out, "eigenvalues.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mesh", "i", "eigenvalue"])
        w.writerows(rows)
    _write_json(report, os.path.join(out, "index.json"))
    return EXIT_OK


def _random_fields(rng, n, s_max, count):
    for _ in range(count):
        yield (lindex.FieldAlong.polynomial(rng.normal(size=(4, n)), 0.0, s_max),
               lindex.FieldAlong.polynomial(rng.normal(size=(4, n)), 0.0, s_max))


def verify_checks(cfg: RunConfig, tau_eps=None, pairs: int = 5, variation_fields: int = 2) -> dict:
    """All checks of ``cmd_verify``; each entry carries a boolean ``passed``."""
    bg = cfg.background
    rng = np.random.default_rng(cfg.seed)
    path = shoot(bg, cfg.point, cfg.v, cfg.tau_bar, cfg.tol)
    n, s_max = bg.n, path.s_max
    jac = jacobi_matrix(path)
    report = conjugate_scan(path, jac=jac)
    checks = {}

    verdict = lindex.verify_morse(path, cfg.meshes, report=report)
    checks["morse"] = {"passed": verdict.agree, **verdict.to_json()}

    suite = lindex.lemma_suite(path, seed=cfg.seed, report=report, jac=jac)
    checks["lemmas"] = {"passed": suite.pop("passed"), **suite}

    worst = 0.0
    for U, V in _random_fields(rng, n, s_max, pairs):
        r = lindex.key_lemma_residual(path, U, V, detail=True)
        worst = max(worst, r.residual / (1.0 + abs(r.index)))
    cut = float(rng.uniform(0.3, 0.7)) * s_max
    Up = (lindex.FieldAlong.polynomial(rng.normal(size=(3, n)), 0.0, cut)
          + lindex.FieldAlong.polynomial(rng.normal(size=(3, n)), cut, s_max))
    V = lindex.FieldAlong.polynomial(rng.normal(size=(3, n)), 0.0, s_max)
    rp = lindex.key_lemma_residual(path, Up, V, detail=True)
    piece = rp.residual / (1.0 + abs(rp.index))
    checks["key_lemma"] = {"passed": bool(worst < 1e-7 and piece < 1e-6),
                           "worst_relative_residual": worst,
                           "piecewise_relative_residual": piece}

    gaps = []
    for _ in range(variation_fields):
        c = rng.normal(size=(4, n))
        c[0] = 0.0                                  # Y(0) = 0
        Y = lindex.FieldAlong.polynomial(c / max(1.0, s_max), 0.0, s_max)
        lhs, rhs = lindex.second_variation_check(path, Y)
        gaps.append(abs(lhs - rhs) / (1.0 + abs(lhs)))
    checks["second_variation"] = {"passed": bool(max(gaps) < 1e-4), "relative_gaps": gaps}

    if tau_eps is not None:
        reg = _tau_form_endpoint(cfg, tau_eps, path)
        reg["passed"] = bool(reg["gap_to_regularized"] < 1e-6)
        checks["regularization"] = reg
    return checks


def cmd_verify(cfg: RunConfig, tau_eps=None) -> int:
    out = _outdir(cfg)
    checks = verify_checks(cfg, tau_eps)
    ok = all(c["passed"] for c in checks.values())
    _write_json({"passed": ok, "background": cfg.background.to_json(), "checks": checks},
                os.path.join(out, "verdict.json"))
    return EXIT_OK if ok else EXIT_FAILED


SWEEP_FIELDS = ("endpoint", "chart", "L", "conjugate_count", "morse_index", "errors")


def sweep_row(cfg: RunConfig, v) -> dict:
    """One sweep row; failures are recorded, never raised."""
    row = {"endpoint": "", "chart": "", "L": "", "conjugate_count": "", "morse_index": "",
           "errors": ""}
    try:
        path = shoot(cfg.background, cfg.point, v, cfg.tau_bar, cfg.tol)
        end = path.endpoint
        row["endpoint"] = " ".join(repr(float(c)) for c in end.coords)
        row["chart"] = end.chart
        row["L"] = repr(llength(path).value)
        row["conjugate_count"] = conjugate_scan(path).total_multiplicity
        row["morse_index"] = lindex.morse_index(path, cfg.meshes[-1])
    except (LGeometryError, ValueError, np.linalg.LinAlgError) as exc:
        row["errors"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _sweep_worker(args):
    cfg, v = args
    return sweep_row(cfg, v)


def cmd_sweep(sweep: SweepConfig) -> int:
    cfg = sweep.base
    out = _outdir(cfg)
    tasks = [(cfg, v) for v in sweep.vectors]
    jobs = sweep.jobs or min(len(tasks), os.cpu_count() or 1)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_sweep_worker(t) for t in tasks]
    n = cfg.background.n
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"v{i}" for i in range(n)] + list(SWEEP_FIELDS))
        for v, row in zip(sweep.vectors, rows):
            w.writerow([repr(float(c)) for c in v] + [row[k] for k in SWEEP_FIELDS])
    return EXIT_OK


# ---------------------------------------------------------------------------
# self-test


def selftest_checks(seed: int = 0) -> dict:
    """Quick end-to-end checks against closed forms and the fault-injected background."""
    from .flowbg import ShrinkingCylinder, ShrinkingSphere, StaticEuclidean

    rng = np.random.default_rng(seed)
    res = {}
    E = StaticEuclidean(2)
    v = rng.normal(size=2)
    path = shoot(E, np.zeros(2), v, 2.0)
    err = max(np.max(np.abs(path.endpoint.coords - 2.0 * np.sqrt(2.0) * v)),
              abs(llength(path).value - 2.0 * np.sqrt(2.0) * v @ v))
    res["flat_closed_form"] = {"passed": bool(err < 1e-8), "error": float(err)}

    worst = 0.0
    for bg in (E, ShrinkingSphere(2, 1.0), ShrinkingCylinder(3, 1.0)):
        for _ in range(20):
            x = as_point(rng.uniform(-1.5, 1.5, size=bg.n))
            tau = float(rng.uniform(1e-3, 2.0))
            h = 1e-4
            fd = (tensors_at(bg, x, tau + h).g - tensors_at(bg, x, tau - h).g) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - 2.0 * tensors_at(bg, x, tau).ricci))))
            worst = max(worst, float(np.max(np.abs(dg_dtau_at(bg, x, tau)
                                                   - 2.0 * tensors_at(bg, x, tau).ricci))))
    res["flow_identity"] = {"passed": bool(worst < 1e-6), "max_error": worst}

    S = ShrinkingSphere(2, 0.01)
    path = shoot(S, np.zeros(2), np.array([20.0, 0.0]), 1.0)
    verdict = lindex.verify_morse(path)
    res["morse_sphere"] = {"passed": bool(verdict.agree and verdict.discrete_index >= 1),
                           "discrete_index": verdict.discrete_index,
                           "conjugate_sum": verdict.conjugate_sum}

    U, V = next(_random_fields(rng, 2, path.s_max, 1))
    r = lindex.key_lemma_residual(path, U, V, detail=True)
    res["key_lemma"] = {"passed": bool(r.residual < 1e-7 * (1 + abs(r.index))),
                        "residual": r.residual, "index": r.index}
    bad = shoot(replace(S, flip_jacobi_curvature=True), np.zeros(2), np.array([20.0, 0.0]), 1.0)
    rb = lindex.key_lemma_residual(bad, U, V)
    res["fault_injection_detected"] = {"passed": bool(rb > 1e-2), "residual": rb}
    return res


def cmd_selftest(out: str | None, seed: int) -> int:
    t0 = time.perf_counter()
    res = selftest_checks(seed)
    for name, r in res.items():
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {name}")
    ok = all(r["passed"] for r in res.values())
    if out:
        os.makedirs(out, exist_ok=True)
        _write_json({"passed": ok, "seconds": time.perf_counter() - t0, "checks": res},
                    os.path.join(out, "selftest.json"))
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# argument parsing


def _mesh_pair(text: str):
    try:
        vals = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected integers like 64,128")
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("expected at least two mesh sizes")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmorse",
        description="L-geodesics, L-Jacobi fields and the Morse index along Ricci flow backgrounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--tol", type=float, help="integrator tolerance (overrides tol)")
    common.add_argument("--seed", type=int, help="seed for randomized checks (overrides seed)")
    common.add_argument("--mesh", type=_mesh_pair, metavar="M1,M2",
                        help="index-form mesh sizes (overrides meshes)")
    common.add_argument("--tau-epsilon", type=float, metavar="EPS",
                        help="also integrate the unregularized tau-form from this tau")
    common.add_argument("--corrupt-curvature-sign", action="store_true",
                        help=argparse.SUPPRESS)
    for name, text in [("shoot", "integrate one L-geodesic; writes path.csv and summary.json"),
                       ("conjugates", "locate L-conjugate points; writes conjugates.json"),
                       ("index", "discrete Morse index; writes index.json and eigenvalues.csv"),
                       ("verify", "Morse equality, lemma suite and identities; writes verdict.json"),
                       ("sweep", "tabulate counts over v_grid; writes sweep.csv")]:
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "sweep":
            p.add_argument("--jobs", type=int, help="worker processes (0 = all cores)")
    st = sub.add_parser("selftest", help="fast built-in checks", description="fast built-in checks")
    st.add_argument("--out", help="directory for selftest.json")
    st.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args.out, args.seed)
    overrides = {"output_dir": args.out, "tol": args.tol, "seed": args.seed,
                 "meshes": args.mesh}
    if args.command == "sweep":
        overrides["jobs"] = args.jobs
    if args.tau_epsilon is not None and not args.tau_epsilon > 0:
        print("error: --tau-epsilon must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg, raw = load_config(args.config, overrides)
        if args.corrupt_curvature_sign:
            cfg = replace(cfg, background=replace(cfg.background, flip_jacobi_curvature=True))
        if args.tau_epsilon is not None and not args.tau_epsilon < cfg.tau_bar:
            raise ConfigError("--tau-epsilon must be below tau_bar")
        if args.command == "sweep":
            sweep = SweepConfig(cfg, sweep_vectors(raw, cfg.background.n), int(raw.get("jobs", 0)))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            return cmd_sweep(sweep)
        cmd = {"shoot": cmd_shoot, "conjugates": cmd_conjugates, "index": cmd_index,
               "verify": cmd_verify}[args.command]
        return cmd(cfg, args.tau_epsilon)
    except (LGeometryError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
