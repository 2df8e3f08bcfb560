"""Declarative experiment configs, grid orchestration and run artifacts.

A run reads one YAML file, builds the circuit, emulates every ``(lam, D)``
grid point (skipping those already in ``records.jsonl``), evaluates the
requested reference simulators, extrapolates every observable and writes
``nzne.json`` plus CSV plot data into the output directory.
"""

from __future__ import annotations

import csv
import fnmatch
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import matchgate, oracle
from .circuits import Circuit, build_fhm, build_random_brickwork, build_tfim, build_xym
from .engine import EmulationRecord, record_key, run_emulation
from .extrapolation import NzneResult, run_nzne
from .noise import noise_model

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "build_circuit",
    "run",
    "report",
    "WORKERS_ENV",
    "CONFIG_SCHEMA",
]

log = logging.getLogger(__name__)

CONFIG_SCHEMA = "nzne-config/1"
WORKERS_ENV = "NZNE_WORKERS"
BENCHMARKS = {"tfim": build_tfim, "fhm": build_fhm, "xym": build_xym, "random": build_random_brickwork}
ORACLES = ("dense", "trajectory", "matchgate")


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` points into the YAML file when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = f"{source or '<config>'}:{line}: " if line else (f"{source}: " if source else "")
        super().__init__(where + message)


@dataclass
class RunConfig:
    """One experiment: circuit recipe, noise grid, bond dimensions and outputs.

    Attributes:
        name: Label used in reports.
        benchmark: ``tfim``, ``fhm``, ``xym``, ``random`` or ``custom-json``.
        params: Keyword arguments for the circuit builder.
        noise: Noise family name.
        lams: Noise strengths, containing 0.
        target: Target strength ``lam*``.
        bond_dims: Strictly increasing bond dimensions.
        observables: Names or glob patterns; empty means all.
        oracles: Reference simulators keyed by kind with their options.
        output: Output directory, relative to the working directory.
        circuit_file: Circuit JSON for ``custom-json``, relative to the config file.
        delta_f, delta_d: Fit-weight exponents.
        workers: Default worker count (overridden by ``NZNE_WORKERS``).
    """

    name: str
    benchmark: str
    noise: str
    lams: list[float]
    target: float
    bond_dims: list[int]
    params: dict = field(default_factory=dict)
    observables: list[str] = field(default_factory=list)
    oracles: dict = field(default_factory=dict)
    output: str = "out"
    circuit_file: str | None = None
    delta_f: float = 2.0
    delta_d: float = 20.0
    workers: int = 1
    base_dir: str = "."

    @property
    def output_dir(self) -> Path:
        return Path(self.output).resolve()

    @property
    def fingerprint(self) -> str:
        d = asdict(self)
        d.pop("base_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_FIELDS = {
    "schema", "name", "benchmark", "params", "noise", "lams", "target", "bond_dims", "observables",
    "oracles", "output", "circuit_file", "nzne", "workers",
}


def _key_lines(text: str) -> dict[str, int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def parse_config(text: str, source: str | None = None, base_dir: str = ".") -> RunConfig:
    """Validate YAML text and return a :class:`RunConfig`."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source)
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines = _key_lines(text)

    def fail(key: str, msg: str):
        raise ConfigError(f"{key}: {msg}", lines.get(key), source)

    for key in raw:
        if key not in _FIELDS:
            fail(key, "unknown field")
    if raw.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        fail("schema", f"expected {CONFIG_SCHEMA!r}")
    for key in ("benchmark", "noise", "lams", "target", "bond_dims"):
        if key not in raw:
            raise ConfigError(f"missing required field {key!r}", None, source)

    bench = raw["benchmark"]
    if bench not in (*BENCHMARKS, "custom-json"):
        fail("benchmark", f"unknown benchmark {bench!r}")
    if bench == "custom-json" and not raw.get("circuit_file"):
        fail("benchmark", "custom-json needs circuit_file")
    params = raw.get("params") or {}
    if not isinstance(params, dict):
        fail("params", "must be a mapping")
    try:
        model = noise_model(str(raw["noise"]))
    except ValueError as exc:
        fail("noise", str(exc))

    lams = raw["lams"]
    if not isinstance(lams, list) or not all(isinstance(x, (int, float)) for x in lams):
        fail("lams", "must be a list of numbers")
    lams = sorted({float(x) for x in lams})
    if 0.0 not in lams:
        fail("lams", "the grid must contain 0")
    if len(lams) < 2:
        fail("lams", "the grid needs at least one strength besides 0")
    if lams[0] < 0 or lams[-1] > model.max_lam:
        fail("lams", f"strengths must lie in [0, {model.max_lam}] for {model.family}")
    target = raw["target"]
    if not isinstance(target, (int, float)) or target < 0:
        fail("target", "must be a non-negative number")

    dims = raw["bond_dims"]
    if not isinstance(dims, list) or not dims or not all(isinstance(x, int) and x >= 1 for x in dims):
        fail("bond_dims", "must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        fail("bond_dims", "must be strictly increasing")

    obs = raw.get("observables") or []
    if isinstance(obs, str):
        obs = [obs]
    if not all(isinstance(x, str) for x in obs):
        fail("observables", "must be a list of names or patterns")

    oracles = raw.get("oracles") or {}
    if not isinstance(oracles, dict):
        fail("oracles", "must be a mapping")
    for kind, opts in oracles.items():
        if kind not in ORACLES:
            fail("oracles", f"unknown oracle {kind!r}")
        if opts is not None and not isinstance(opts, (dict, bool)):
            fail("oracles", f"options for {kind!r} must be a mapping")
    oracles = {k: (v if isinstance(v, dict) else {}) for k, v in oracles.items() if v is not False}

    nz = raw.get("nzne") or {}
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        fail("workers", "must be a positive integer")
    return RunConfig(
        name=str(raw.get("name") or Path(source or "run").stem),
        benchmark=bench,
        noise=model.family,
        lams=lams,
        target=float(target),
        bond_dims=list(dims),
        params=params,
        observables=list(obs),
        oracles=oracles,
        output=str(raw.get("output", "out")),
        circuit_file=raw.get("circuit_file"),
        delta_f=float(nz.get("delta_f", 2.0)),
        delta_d=float(nz.get("delta_d", 20.0)),
        workers=workers,
        base_dir=base_dir,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path))
    return parse_config(text, str(path), str(path.parent))


def build_circuit(cfg: RunConfig) -> Circuit:
    """Build the configured circuit restricted to the selected observables."""
    if cfg.benchmark == "custom-json":
        circuit = Circuit.load(Path(cfg.base_dir) / cfg.circuit_file)
    else:
        try:
            circuit = BENCHMARKS[cfg.benchmark](**cfg.params)
        except TypeError as exc:
            raise ConfigError(f"params: {exc}")
    if cfg.observables:
        names = [n for n in circuit.observables if any(fnmatch.fnmatchcase(n, p) for p in cfg.observables)]
        if not names:
            raise ConfigError(f"observables: no match for {cfg.observables}")
        circuit = circuit.with_observables({n: circuit.observables[n] for n in names})
    if not circuit.observables:
        raise ConfigError("the circuit defines no observables")
    return circuit


def _worker_count(cfg: RunConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)
    return cfg.workers


def _emulate(circuit: Circuit, noise: str, lam: float, max_bond: int) -> EmulationRecord:
    try:
        return run_emulation(circuit, noise, lam, max_bond)
    except (ValueError, FloatingPointError, MemoryError, np.linalg.LinAlgError) as exc:
        return EmulationRecord(
            lam, max_bond, noise, "failed", error=f"{type(exc).__name__}: {exc}",
            key=record_key(circuit, noise, lam, max_bond),
        )


def _read_records(path: Path) -> list[EmulationRecord]:
    out = []
    if not path.exists():
        return out
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                out.append(EmulationRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, TypeError):
                log.warning("skipping unreadable record line in %s", path)
    return out


def _write_records(path: Path, records: list[EmulationRecord]) -> None:
    tmp = path.with_suffix(".tmp")
    with tmp.open("w") as fh:
        for r in sorted(records, key=lambda r: (r.lam, r.max_bond)):
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    tmp.replace(path)


def _run_grid(cfg: RunConfig, circuit: Circuit, path: Path) -> list[EmulationRecord]:
    done = {r.key: r for r in _read_records(path) if r.ok}
    todo = []
    for lam in cfg.lams:
        for D in cfg.bond_dims:
            key = record_key(circuit, cfg.noise, lam, D)
            if key not in done:
                todo.append((lam, D))
    log.info("%d grid points, %d to run", len(cfg.lams) * len(cfg.bond_dims), len(todo))
    results = dict(done)
    with path.open("a") as fh:
        def append(rec: EmulationRecord) -> None:
            results[rec.key] = rec
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            fh.flush()
            log.info("lam=%g D=%d fidelity=%.4g %s", rec.lam, rec.max_bond, rec.emulation_fidelity, rec.error or "")

        workers = _worker_count(cfg)
        if workers == 1 or len(todo) <= 1:
            for lam, D in todo:
                append(_emulate(circuit, cfg.noise, lam, D))
        else:
            # larger bond dimensions first so the slowest points start early
            todo.sort(key=lambda p: -p[1])
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_emulate, circuit, cfg.noise, lam, D) for lam, D in todo]
                for fut in as_completed(futures):
                    append(fut.result())
    keys = {record_key(circuit, cfg.noise, lam, D) for lam in cfg.lams for D in cfg.bond_dims}
    records = [r for k, r in results.items() if k in keys]
    _write_records(path, records)
    return records


def _run_oracles(cfg: RunConfig, circuit: Circuit, path: Path) -> dict:
    cached = json.loads(path.read_text()) if path.exists() else {}
    if cached.get("fingerprint") != cfg.fingerprint:
        cached = {}
    out = {"schema": "nzne-oracle/1", "fingerprint": cfg.fingerprint, "target": cfg.target}
    for kind, opts in cfg.oracles.items():
        if kind in cached:
            out[kind] = cached[kind]
            continue
        log.info("running %s oracle", kind)
        if kind == "dense":
            if cfg.target == 0:
                state = oracle.evolve_statevector(circuit)
            else:
                state = oracle.evolve_density(circuit, cfg.noise, cfg.target)
            out[kind] = {
                "mean": {n: oracle.dense_expectation(state, o) for n, o in circuit.observables.items()},
                "sem": {n: 0.0 for n in circuit.observables},
            }
        elif kind == "trajectory":
            res = oracle.trajectory_mean(
                circuit, cfg.noise, cfg.target, int(opts.get("samples", 1000)), int(opts.get("seed", 0))
            )
            out[kind] = {"mean": {n: v[0] for n, v in res.items()}, "sem": {n: v[1] for n, v in res.items()}}
        else:
            if cfg.noise not in ("matchgate_depolarizing", "none"):
                raise ConfigError("the matchgate oracle needs matchgate_depolarizing noise")
            res = matchgate.trajectory_mean(
                circuit, cfg.target, int(opts.get("samples", 10000)),
                seed=int(opts.get("seed", 0)), batch_size=int(opts.get("batch_size", 2000)),
            )
            out[kind] = {"mean": res.mean, "sem": res.sem, "std": res.std, "batch_std": res.batch_std}
        path.write_text(json.dumps(out, indent=1, sort_keys=True))
    path.write_text(json.dumps(out, indent=1, sort_keys=True))
    return out


def _reference(oracles: dict) -> tuple[str, dict] | tuple[None, None]:
    for kind in ("dense", "matchgate", "trajectory"):
        if kind in oracles:
            return kind, oracles[kind]
    return None, None


def _write_csvs(cfg: RunConfig, circuit: Circuit, records, results: dict[str, NzneResult], oracles, out: Path) -> None:
    ok = [r for r in records if r.ok]
    with (out / "fidelity_vs_lam.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lam", "max_bond", "emulation_fidelity"])
        for r in sorted(ok, key=lambda r: (r.lam, r.max_bond)):
            w.writerow([r.lam, r.max_bond, r.emulation_fidelity])

    with (out / "log_value_vs_lam.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["observable", "lam", "extrapolated", "log_abs_value", "accepted", "fit_value", "mode"])
        for name, res in results.items():
            for lam, ex in sorted(res.extrapolations.items()):
                v = ex["value"]
                fit = _fit_value(res, lam)
                w.writerow([name, lam, v, math.log(abs(v)) if v else "", int(lam in res.accepted), fit, res.mode])

    _, ref = _reference(oracles)
    with (out / "error_vs_fidelity.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["observable", "lam", "max_bond", "emulation_fidelity", "value", "abs_error"])
        for r in sorted(ok, key=lambda r: (r.lam, r.max_bond)):
            for name, v in r.values.items():
                err = abs(v - ref["mean"][name]) if ref and r.lam == cfg.target and name in ref["mean"] else ""
                w.writerow([name, r.lam, r.max_bond, r.emulation_fidelity, v, err])

    if circuit.metadata.get("model") == "fhm":
        _write_site_grid(circuit, results, oracles, out / "fhm_sites.csv")


def _fit_value(res: NzneResult, lam: float):
    c = res.coefficients
    if res.mode == "weighted_log_linear":
        return c["a"] * math.exp(-c["b"] * lam)
    if res.mode == "direct_exponential":
        return c["a"] * math.exp(-c["b"] * lam) + c["c"]
    return ""


def _write_site_grid(circuit: Circuit, results, oracles, path: Path) -> None:
    nx, ny = circuit.metadata["lattice"]
    _, ref = _reference(oracles)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "row", "col", "quantity", "single", "nzne", "reference"])
        for s in range(nx * ny):
            for q in ("filling", "magnetization"):
                name = f"{q}_{s}"
                if name not in results:
                    continue
                res = results[name]
                refv = ref["mean"].get(name, "") if ref else ""
                w.writerow([s, s // nx, s % nx, q, res.single_emulation, res.estimate, refv])


def run(cfg: RunConfig) -> int:
    """Execute a config. Returns 0 on success and 1 when any part failed."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    circuit = build_circuit(cfg)
    (out / "config.json").write_text(json.dumps({**asdict(cfg), "fingerprint": cfg.fingerprint}, indent=1, sort_keys=True))
    records = _run_grid(cfg, circuit, out / "records.jsonl")
    status = 0
    if any(not r.ok for r in records):
        status = 1
        for r in records:
            if not r.ok:
                log.error("lam=%g D=%d failed: %s", r.lam, r.max_bond, r.error)
    oracles = _run_oracles(cfg, circuit, out / "oracle.json")
    results: dict[str, NzneResult] = {}
    failures = {}
    for name in circuit.observables:
        try:
            results[name] = run_nzne(records, name, cfg.target, cfg.delta_f, cfg.delta_d)
        except ValueError as exc:
            failures[name] = str(exc)
            status = 1
    payload = {
        "schema": "nzne-run/1",
        "name": cfg.name,
        "target": cfg.target,
        "results": {k: r.to_json() for k, r in results.items()},
        "failures": failures,
    }
    (out / "nzne.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    _write_csvs(cfg, circuit, records, results, oracles, out)
    return status


def report(out_dir, stream=None) -> list[dict]:
    """Per-observable comparison table of single emulation, NZNE and reference.

    Writes ``report.csv`` next to the artifacts and prints an aligned table
    to ``stream`` when given.
    """
    out = Path(out_dir)
    nz_path = out / "nzne.json"
    if not nz_path.exists():
        raise FileNotFoundError(f"{nz_path} not found; run the config first")
    nz = json.loads(nz_path.read_text())
    oracles = json.loads((out / "oracle.json").read_text()) if (out / "oracle.json").exists() else {}
    kind, ref = _reference(oracles)
    rows = []
    for name, res in nz["results"].items():
        single, est = res["single_emulation"], res["estimate"]
        row = {"observable": name, "single": single, "nzne": est, "mode": res["mode"], "reference": None,
               "reference_sem": None, "abs_err_single": None, "rel_err_single": None, "abs_err_nzne": None,
               "rel_err_nzne": None}
        if ref and name in ref["mean"]:
            r = ref["mean"][name]
            row.update(reference=r, reference_sem=ref["sem"].get(name))
            if single is not None:
                row["abs_err_single"] = abs(single - r)
                row["rel_err_single"] = abs(single - r) / abs(r) if r else None
            row["abs_err_nzne"] = abs(est - r)
            row["rel_err_nzne"] = abs(est - r) / abs(r) if r else None
        rows.append(row)
    with (out / "report.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["observable"])
        w.writeheader()
        w.writerows(rows)
    if stream is not None:
        _print_table(rows, kind, nz, stream)
    return rows


def _fmt(x, spec=".4f") -> str:
    return "n/a" if x is None else format(x, spec)


def _print_table(rows, kind, nz, stream) -> None:
    print(f"# {nz['name']}  lam* = {nz['target']}  reference: {kind or 'unavailable'}", file=stream)
    head = f"{'observable':<22}{'single':>10}{'NZNE':>10}{'reference':>11}{'rel.single':>12}{'rel.NZNE':>10}  mode"
    print(head, file=stream)
    for r in rows:
        print(
            f"{r['observable']:<22}{_fmt(r['single']):>10}{_fmt(r['nzne']):>10}{_fmt(r['reference']):>11}"
            f"{_fmt(r['rel_err_single']):>12}{_fmt(r['rel_err_nzne']):>10}  {r['mode']}",
            file=stream,
        )
    errs = [(r["abs_err_single"], r["abs_err_nzne"]) for r in rows if r["abs_err_nzne"] is not None and r["abs_err_single"] is not None]
    if errs:
        s, n = np.mean(errs, axis=0)
        print(f"mean |error|: single {s:.4f}  NZNE {n:.4f}", file=stream)
    for name, msg in nz.get("failures", {}).items():
        print(f"{name}: extrapolation failed ({msg})", file=stream)
