"""Batch driver: ``polysymp <kind> --config file.json [--out prefix] [--seed int]``.

Exit status: 0 all checks pass, 1 some check failed, 2 bad config, 3 internal error.
The JSON report has no timing fields so identical inputs give identical bytes;
wall-clock time goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import GridPatch, KGParams, PlaneWave, kg_hamiltonian, plane_wave_run, verify_prop2, write_csv
from .exterior import GradedBasis, Metric, Multivector, is_decomposable, wedge_vectors
from .hamvec import construct_decomposition, verify_hamvec
from .hjt import check_T_conditions, hj_residual, kg_adapted, kg_S_family, no_go_probe
from .phase_space import PhaseSpaceShape, ScalarField, dw_function, random_dw_hamiltonian, random_point

SCHEMA = 1
KINDS = ("verify-hamvec", "run-kg", "prop2", "check-hj", "no-go", "decompose")

DEFAULT_TOLERANCES = {
    "verify-hamvec": {"residual": 1e-8},
    "run-kg": {"order": 1.9},
    "prop2": {"order": 1.9, "h_value": 1e-10},
    "check-hj": {"hj": 1e-8, "grid_factor": 5.0},
    "no-go": {"consistent": 1e-10, "inconsistent": 1e-3},
    "decompose": {"rtol": 1e-10},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    shape: tuple[int, int] = (2, 1)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    output: str | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, kind: str | None = None, seed: int | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw = dict(raw)
        k = raw.pop("kind", None) or kind
        if kind is not None and k != kind:
            raise ConfigError(f"config kind {k!r} does not match command {kind!r}")
        if k not in KINDS:
            raise ConfigError(f"unknown kind {k!r}")
        shape = raw.pop("shape", [2, 1])
        if not (isinstance(shape, (list, tuple)) and len(shape) == 2 and all(isinstance(s, int) and s >= 1 for s in shape)):
            raise ConfigError("shape must be [n, N] with positive integers")
        cfg_seed = raw.pop("seed", 0)
        if seed is not None:
            cfg_seed = seed
        if not isinstance(cfg_seed, int):
            raise ConfigError("seed must be an integer")
        tol = dict(DEFAULT_TOLERANCES[k])
        user_tol = raw.pop("tolerances", {})
        if not isinstance(user_tol, dict):
            raise ConfigError("tolerances must be an object")
        for name, val in user_tol.items():
            if not isinstance(val, (int, float)) or not val > 0:
                raise ConfigError(f"tolerance {name!r} must be positive")
            tol[name] = float(val)
        grid = raw.pop("grid", {})
        if not isinstance(grid, dict):
            raise ConfigError("grid must be an object")
        output = raw.pop("output", None)
        return cls(k, tuple(shape), cfg_seed, tol, grid, output, raw)

    def echo(self) -> dict:
        return {
            "kind": self.kind,
            "shape": list(self.shape),
            "seed": self.seed,
            "tolerances": self.tolerances,
            "grid": self.grid,
            "params": self.params,
        }


@dataclass
class RunReport:
    config: dict
    results: list
    extra: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r["pass"])

    @property
    def ok(self) -> bool:
        return self.passed == len(self.results)

    def to_dict(self) -> dict:
        out = {"schema": SCHEMA, "config": self.config, "results": self.results}
        out.update(self.extra)
        out["summary"] = {"total": len(self.results), "passed": self.passed}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("POLYSYMP_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = _threads()
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _check(name, residual, passed, **info) -> dict:
    out = {"name": name, "residual": float(residual), "pass": bool(passed)}
    out.update(info)
    return out


def _get(d: dict, key, default, typ):
    val = d.get(key, default)
    if typ is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, typ):
        raise ConfigError(f"{key!r} must be of type {typ.__name__}")
    return val


def _resolutions(cfg: ExperimentConfig) -> list[int]:
    res = cfg.grid.get("resolutions", [64, 128])
    if not (isinstance(res, list) and res and all(isinstance(r, int) and r >= 8 for r in res)):
        raise ConfigError("grid.resolutions must be a list of integers >= 8")
    return res


def _kg_setup(cfg: ExperimentConfig):
    g = cfg.grid
    params = KGParams(2, _get(cfg.params, "mass", 1.0, float))
    extent = _get(g, "extent", 2 * math.pi, float)
    cfl = _get(g, "cfl", 0.8, float)
    t_final = _get(g, "t_final", 1.0, float)
    modes = _get(g, "modes", 1, int)
    if extent <= 0 or t_final <= 0 or not 0 < cfl <= 1:
        raise ConfigError("grid needs extent > 0, t_final > 0 and 0 < cfl <= 1")
    return params, extent, cfl, t_final, modes


def _orders(values) -> list[float]:
    return [float(np.log2(a / b)) if a > 0 and b > 0 else float("inf") for a, b in zip(values[:-1], values[1:])]


def run_verify_hamvec(cfg: ExperimentConfig) -> RunReport:
    n, N = cfg.shape
    shape = PhaseSpaceShape(n, N)
    points = _get(cfg.params, "points", 100, int)
    n_h = _get(cfg.params, "hamiltonians", 1, int)
    degree = _get(cfg.params, "degree", 3, int)
    tol = cfg.tolerances["residual"]
    rng = np.random.default_rng(cfg.seed)
    jobs = []
    for h in range(n_h):
        H = dw_function(random_dw_hamiltonian(shape, rng, degree))
        jobs += [(h, i, H, random_point(shape, rng)) for i in range(points)]

    def one(job):
        h, i, H, pt = job
        dec = construct_decomposition(H, pt)
        rep = verify_hamvec(dec.multivector(), H, pt)
        return _check(f"H{h}/point{i}", rep.max_abs, rep.max_abs < tol)

    return RunReport(cfg.echo(), _pmap(one, jobs))


def run_kg(cfg: ExperimentConfig, out_prefix: str | None) -> RunReport:
    params, extent, cfl, t_final, modes = _kg_setup(cfg)
    errors, rows = [], []
    for nx in _resolutions(cfg):
        sol, wave = plane_wave_run(params, extent, nx, cfl, t_final, modes)
        exact = np.array([[wave.value((t, x)) for x in sol.x] for t in sol.t])
        err = float(np.abs(exact - sol.phi).max())
        errors.append(err)
        entry = {"nx": nx, "dx": sol.dx, "dt": sol.dt, "steps": sol.nt - 1, "max_error": err}
        if out_prefix:
            path = write_csv(sol, f"{out_prefix}_nx{nx}.csv")
            entry["csv"] = path.name
        rows.append(entry)
    orders = _orders(errors)
    tol = cfg.tolerances["order"]
    results = [_check(f"order/{a}->{b}", errors[i + 1], o >= tol, order=o)
               for i, (o, a, b) in enumerate(zip(orders, _resolutions(cfg), _resolutions(cfg)[1:]))]
    return RunReport(cfg.echo(), results, {"runs": rows, "convergence_order": min(orders) if orders else None})


def run_prop2(cfg: ExperimentConfig) -> RunReport:
    params, extent, cfl, t_final, modes = _kg_setup(cfg)
    h_tol = cfg.tolerances["h_value"]
    residuals, results, rows = [], [], []
    for nx in _resolutions(cfg):
        sol, _ = plane_wave_run(params, extent, nx, cfl, t_final, modes)
        it = sol.nt // 2
        reps = _pmap(lambda ix: verify_prop2(sol, (it, ix)), range(sol.nx))
        r = max(rep.residual.max_abs for rep in reps)
        h = max(rep.h_value for rep in reps)
        residuals.append(r)
        rows.append({"nx": nx, "residual": r, "h_value": h})
        results.append(_check(f"h_value/nx{nx}", h, h < h_tol))
    tol = cfg.tolerances["order"]
    res = _resolutions(cfg)
    for i, o in enumerate(_orders(residuals)):
        results.append(_check(f"order/{res[i]}->{res[i + 1]}", residuals[i + 1], o >= tol, order=o))
    return RunReport(cfg.echo(), results, {"runs": rows})


def run_check_hj(cfg: ExperimentConfig) -> RunReport:
    params, extent, cfl, t_final, modes = _kg_setup(cfg)
    results = []
    wave = PlaneWave((2 * math.pi * modes / extent,), params)
    S = kg_S_family(wave, params)
    HH = kg_hamiltonian(params)
    rng = np.random.default_rng(cfg.seed)
    hj_tol = cfg.tolerances["hj"]
    for i in range(_get(cfg.params, "samples", 10, int)):
        x = rng.uniform(0, extent, size=2)
        r = hj_residual(S, HH, x, [wave.value(x)])
        results.append(_check(f"hj/sample{i}", r, r < hj_tol, point=x.tolist()))
    factor = cfg.tolerances["grid_factor"]
    for nx in _resolutions(cfg):
        sol, _ = plane_wave_run(params, extent, nx, cfl, t_final, modes)
        it = sol.nt // 2
        tol = factor * sol.dx ** 2

        def node(ix):
            patch = GridPatch(sol, (it, ix))
            HHa, Sa = kg_adapted(patch, params)
            pt = (sol.t[it], sol.x[ix])
            return check_T_conditions(Sa.to_tmap(), HHa, pt, [0.0]).records([*pt, 0.0], tol)

        for ix, recs in enumerate(_pmap(node, range(sol.nx))):
            for rec in recs:
                results.append(_check(f"{rec['condition']}/nx{nx}/ix{ix}", rec["residual"], rec["pass"], point=rec["point"]))
    return RunReport(cfg.echo(), results)


def random_quadratic_potential(shape: PhaseSpaceShape, rng: np.random.Generator, at, zero_gradient: bool) -> ScalarField:
    """V = 1/2 (v - c)^T Q (v - c) + (linear in x), with dV/dv of norm >= 0.1 or exactly zero at ``at``."""
    n, N = shape.n, shape.N
    v_at = np.asarray(at.v if hasattr(at, "v") else at[n:n + N], dtype=float)
    while True:
        Q = rng.normal(size=(N, N))
        Q = Q @ Q.T + np.eye(N)
        c = v_at.copy() if zero_gradient else rng.uniform(-2, 2, size=N)
        if zero_gradient or np.linalg.norm(Q @ (v_at - c)) >= 0.1:
            break
    a = rng.normal(size=n)

    def func(y):
        d = y[n:n + N] - c
        return 0.5 * float(d @ Q @ d) + float(a @ y[:n])

    def partials(y):
        out = np.zeros(shape.dim)
        out[:n] = a
        out[n:n + N] = Q @ (y[n:n + N] - c)
        return out

    return ScalarField(shape, func, partials)


def run_no_go(cfg: ExperimentConfig) -> RunReport:
    ns = cfg.params.get("n_values", [1, 2, 3])
    Ns = cfg.params.get("N_values", [1, 2])
    count = _get(cfg.params, "potentials", 50, int)
    if not all(isinstance(v, int) and v >= 1 for v in [*ns, *Ns]):
        raise ConfigError("n_values and N_values must be positive integers")
    rng = np.random.default_rng(cfg.seed)
    results = []
    for n in ns:
        for N in Ns:
            shape = PhaseSpaceShape(n, N, extended=False)
            g, eta = Metric.minkowski(n), Metric.euclidean(N)
            for i in range(count):
                pt = random_point(shape, rng)
                V = random_quadratic_potential(shape, rng, pt, zero_gradient=bool(i % 5 == 0))
                rep = no_go_probe(V, g, eta, pt, consistent_tol=cfg.tolerances["consistent"],
                                  threshold=cfg.tolerances["inconsistent"])
                results.append(_check(f"n{n}N{N}/V{i}", rep.residual, rep.agrees,
                                      status=rep.status, predicted_consistent=rep.predicted_consistent))
    return RunReport(cfg.echo(), results)


def parse_multivector(spec: dict) -> Multivector:
    """``{"dim": D, "terms": [[[i, j, ...], coef], ...]}`` with 1-based indices."""
    try:
        dim = int(spec["dim"])
        terms = spec["terms"]
        basis = GradedBasis.plain(dim)
        grades = {len(idx) for idx, _ in terms}
        if len(grades) != 1:
            raise ConfigError("all terms must share one grade")
        k = grades.pop()
        out = Multivector.zero(basis, k)
        for idx, coef in terms:
            if any(not 1 <= i <= dim for i in idx):
                raise ConfigError(f"index out of range in {idx}")
            out = out + Multivector.monomial(basis, [i - 1 for i in idx], float(coef))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad multivector spec: {exc}") from exc


def run_decompose(cfg: ExperimentConfig) -> RunReport:
    if "multivector" in cfg.params:
        X = parse_multivector(cfg.params["multivector"])
    elif "vectors" in cfg.params:
        vecs = np.asarray(cfg.params["vectors"], dtype=float)
        if vecs.ndim != 2:
            raise ConfigError("vectors must be a list of equal-length lists")
        X = wedge_vectors(GradedBasis.plain(vecs.shape[1]), vecs)
    else:
        raise ConfigError("decompose needs 'multivector' or 'vectors'")
    expect = cfg.params.get("expect")
    if expect is not None and not isinstance(expect, bool):
        raise ConfigError("expect must be true, false or absent")
    rep = is_decomposable(X, cfg.tolerances["rtol"])
    passed = True if expect is None else rep.decomposable == expect
    results = [_check("decomposable", 0.0, passed, decomposable=rep.decomposable,
                      annihilator_dim=rep.annihilator_dim)]
    return RunReport(cfg.echo(), results, {"decomposable": rep.decomposable, "annihilator_dim": rep.annihilator_dim})


def run(cfg: ExperimentConfig, out_prefix: str | None = None) -> RunReport:
    t0 = time.perf_counter()
    if cfg.kind == "verify-hamvec":
        rep = run_verify_hamvec(cfg)
    elif cfg.kind == "run-kg":
        rep = run_kg(cfg, out_prefix)
    elif cfg.kind == "prop2":
        rep = run_prop2(cfg)
    elif cfg.kind == "check-hj":
        rep = run_check_hj(cfg)
    elif cfg.kind == "no-go":
        rep = run_no_go(cfg)
    else:
        rep = run_decompose(cfg)
    rep.seconds = time.perf_counter() - t0
    return rep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polysymp", description="Multisymplectic verification suites.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="output path prefix (report goes to <prefix>.json)")
    p.add_argument("--seed", type=int, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = ExperimentConfig.from_dict(raw, args.kind, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    prefix = args.out or cfg.output or f"polysymp_{cfg.kind}"
    try:
        Path(prefix).parent.mkdir(parents=True, exist_ok=True)
        rep = run(cfg, prefix)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    Path(f"{prefix}.json").write_text(rep.dumps())
    print(f"{cfg.kind}: {rep.passed}/{len(rep.results)} passed in {rep.seconds:.2f}s -> {prefix}.json", file=sys.stderr)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
