"""Execute configured experiments and write their artifacts.

A run directory holds ``trajectory.csv``, ``metadata.json``, optional
``ansatz_t<time>.json`` snapshots, ``ansatz_final.json`` (AVQDS) and
``final_state.npy``.  Every file is written to a temporary name first and
then renamed, so readers never see partial output.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import curve_fit

from .. import __version__
from ..adapt_vqe import VqeConfig, prepare_ground_state
from ..ansatz import Ansatz
from ..driver import hamiltonian_pool, run, two_local_pool
from ..evolvers import ExactReference, run_exact, run_trotter
from ..observables import fidelity, nearest_time_values, trajectory_std
from ..state import ground_state, product_state
from .config import (
    ConfigError,
    ExperimentConfig,
    set_path,
    validate_config,
)

__all__ = [
    "CompareError",
    "RunResult",
    "read_trajectory",
    "write_atomic",
    "run_experiment",
    "compare_runs",
    "parse_grid",
    "sweep",
    "fit_power_law",
    "fit_exponential",
]

log = logging.getLogger(__name__)

COUNTER_COLUMNS = {"t", "n_theta", "n_cx", "L2", "dt"}


class CompareError(ValueError):
    pass


def write_atomic(path: Path, data: str | bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def state_snapshot_name(t: float) -> str:
    return f"state_t{t:g}.npy"


def snapshot_name(t: float) -> str:
    return f"ansatz_t{t:g}.json"


# -- run -----------------------------------------------------------------


class RunResult:
    """In-memory outcome of one run (rows as written to the CSV)."""

    def __init__(self, columns, rows, metadata, final_state, final_ansatz=None):
        self.columns = columns
        self.rows = rows
        self.metadata = metadata
        self.final_state = final_state
        self.final_ansatz = final_ansatz

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)


def initial_ansatz(cfg: ExperimentConfig, schedule) -> Ansatz:
    init = cfg.initial_state
    n = cfg.n_qubits
    if init.kind == "product":
        return Ansatz(product_state(init.bits or [0] * n))
    if init.kind == "dense_ground":
        return Ansatz(ground_state(schedule.initial_hamiltonian)[1])
    if init.kind == "adapt_vqe":
        h0 = schedule.initial_hamiltonian
        pool = two_local_pool(n) if init.pool == "two_local" else hamiltonian_pool(h0)
        vqe = VqeConfig(
            pool=tuple(pool), grad_tol=init.grad_tol, energy_tol=init.energy_tol,
            max_operators=init.max_operators,
        )
        a, _ = prepare_ground_state(h0, product_state(init.bits or [0] * n), vqe)
        return a
    a = Ansatz.from_json(Path(init.path).read_text())
    if a.n_qubits != n:
        raise ConfigError(f"initial_state.path: ansatz has {a.n_qubits} qubits, model has {n}")
    return a


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   extra_metadata: dict | None = None) -> RunResult:
    """Run ``cfg`` and write its artifacts to ``out_dir`` (default: the configured directory)."""
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    schedule = cfg.schedule_obj()
    observables = cfg.observable_set()
    a0 = initial_ansatz(cfg, schedule)
    psi0 = a0.evaluate()
    method = cfg.method
    columns = cfg.columns()
    extra = columns[1 + len(cfg.observables):]
    files = []
    stall_times: list[float] = []
    final_ansatz = None

    snaps = sorted({t for t in cfg.output.snapshot_times if 0 < t <= cfg.t_final})

    def exact_reference(dt):
        if not observables.needs_reference:
            return None
        return ExactReference(schedule, psi0, dt).state_at

    if method.kind == "avqds":
        pool = (
            hamiltonian_pool(schedule.structure) if method.pool == "hamiltonian"
            else two_local_pool(cfg.n_qubits)
        )
        def on_step(rec, a):
            if rec.t in snaps:
                write_atomic(out / snapshot_name(rec.t), a.to_json())
                files.append(snapshot_name(rec.t))

        records, final_ansatz = run(
            schedule, a0, cfg.t_final, method.driver_config(), observables, pool,
            reference=exact_reference(method.dt_exact), on_step=on_step, checkpoints=snaps,
        )
        psi_final = final_ansatz.evaluate()
        stall_times = [r.t for r in records if r.stalled]
        source = {"n_theta": "n_theta", "n_cx": "n_cx", "L2": "L2", "dt": "dt_used"}
        write_atomic(out / "ansatz_final.json", final_ansatz.to_json())
        files.append("ansatz_final.json")
    else:
        pending = list(snaps)

        def on_fixed_step(rec, psi):
            # the grid point nearest each snapshot time
            while pending and rec.t >= pending[0] - 0.5 * method.dt:
                name = state_snapshot_name(pending.pop(0))
                tmp = io.BytesIO()
                np.save(tmp, psi)
                write_atomic(out / name, tmp.getvalue())
                files.append(name)

        if method.kind == "trotter":
            records, psi_final = run_trotter(
                schedule, psi0, cfg.t_final, method.dt, observables,
                reference=exact_reference(method.dt_exact), on_step=on_fixed_step,
            )
        else:
            records, psi_final = run_exact(
                schedule, psi0, cfg.t_final, method.dt, observables, on_step=on_fixed_step
            )
        source = {"n_cx": "n_cx", "dt": "dt_used"}

    rows = []
    for r in records:
        row = [r.t] + [r.observables[o.name] for o in cfg.observables]
        row += [getattr(r, source[c]) for c in extra]
        rows.append(row)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    write_atomic(out / "trajectory.csv", buf.getvalue())
    files.append("trajectory.csv")
    if cfg.output.save_state:
        tmp = io.BytesIO()
        np.save(tmp, psi_final)
        write_atomic(out / "final_state.npy", tmp.getvalue())
        files.append("final_state.npy")

    last = records[-1]
    final = {"t": last.t}
    if final_ansatz is not None:
        final |= {
            "n_theta": final_ansatz.n_theta,
            "n_two_qubit": final_ansatz.two_qubit_count(),
            "n_cx": final_ansatz.cnot_count(),
            "n_initial_theta": a0.n_theta,
        }
    elif method.kind == "trotter":
        final["n_cx"] = last.n_cx
    metadata = {
        "config": cfg.model_dump(mode="json"),
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "n_records": len(rows),
        "stalled_steps": len(stall_times),
        "stall_times": stall_times[:50],
        "final": final,
        "files": sorted(files) + ["metadata.json"],
        "deterministic": True,
    } | (extra_metadata or {})
    write_atomic(out / "metadata.json", json.dumps(metadata, indent=2) + "\n")
    if stall_times:
        log.warning("%d adaptive steps stalled above the L2 cutoff", len(stall_times))
    return RunResult(columns, rows, metadata, psi_final, final_ansatz)


# -- compare -------------------------------------------------------------


def read_trajectory(run_dir: Path) -> tuple[list[str], np.ndarray]:
    with open(Path(run_dir) / "trajectory.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    return header, data.reshape(-1, len(header))


def _state_at(run_dir: Path, t: float) -> np.ndarray | None:
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "metadata.json").read_text())
    if abs(meta["final"]["t"] - t) < 1e-9 and (run_dir / "final_state.npy").exists():
        return np.load(run_dir / "final_state.npy")
    snap = run_dir / snapshot_name(t)
    if snap.exists():
        return Ansatz.from_json(snap.read_text()).evaluate()
    if (run_dir / state_snapshot_name(t)).exists():
        return np.load(run_dir / state_snapshot_name(t))
    return None


def compare_runs(dir_a: str | Path, dir_b: str | Path, t_max: float | None = None) -> dict:
    """Deviation of run ``a`` (test) from run ``b`` (reference).

    ``s`` is evaluated on a's time mesh over the common time range, with b
    sampled at the nearest of its own times.  The fidelity is taken at the
    end of the common range when both runs stored a state there.
    ``gate_ratio`` is ``n_cx(a) / n_cx(b)`` at that time.
    """
    cols_a, a = read_trajectory(dir_a)
    cols_b, b = read_trajectory(dir_b)
    shared = [c for c in cols_a if c in cols_b and c not in COUNTER_COLUMNS]
    if not shared:
        raise CompareError(f"runs share no observable columns ({cols_a} vs {cols_b})")
    ta, tb = a[:, 0], b[:, 0]
    t_end = min(ta[-1], tb[-1], t_max if t_max is not None else np.inf)
    mask = ta <= t_end + 1e-12
    if mask.sum() < 2:
        raise CompareError("fewer than two common time points")
    report: dict[str, Any] = {"t_end": float(t_end), "n_points": int(mask.sum()), "s": {}}
    for c in shared:
        ref = nearest_time_values(tb, b[:, cols_b.index(c)], ta[mask])
        report["s"][c] = trajectory_std(a[mask, cols_a.index(c)], ref)
    psi_a, psi_b = _state_at(dir_a, t_end), _state_at(dir_b, t_end)
    report["fidelity"] = fidelity(psi_a, psi_b) if psi_a is not None and psi_b is not None else None
    if "n_cx" in cols_a and "n_cx" in cols_b:
        n_a = float(nearest_time_values(ta, a[:, cols_a.index("n_cx")], [t_end])[0])
        n_b = float(nearest_time_values(tb, b[:, cols_b.index("n_cx")], [t_end])[0])
        report["n_cx"] = {"a": n_a, "b": n_b}
        report["gate_ratio"] = n_a / n_b if n_b else None
    else:
        report["gate_ratio"] = None
    return report


# -- sweep ---------------------------------------------------------------


def parse_grid(specs: list[str]) -> dict[str, list]:
    """``key=v1,v2`` (JSON values) or ``key=lo:hi`` (inclusive integer range)."""
    grid = {}
    for spec in specs:
        key, sep, values = spec.partition("=")
        if not sep or not key or not values:
            raise ConfigError(f"grid spec {spec!r} is not of the form key=values")
        if ":" in values and "," not in values:
            lo, hi = values.split(":")
            try:
                grid[key] = list(range(int(lo), int(hi) + 1))
            except ValueError:
                raise ConfigError(f"grid spec {spec!r}: range bounds must be integers") from None
        else:
            grid[key] = [json.loads(v) if _is_json(v) else v for v in values.split(",")]
    return grid


def _is_json(text: str) -> bool:
    try:
        json.loads(text)
        return True
    except json.JSONDecodeError:
        return False


def fit_power_law(x, y) -> dict:
    """Least-squares fit of ``a N^alpha``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    alpha0, loga0 = np.polyfit(np.log(x), np.log(y), 1)
    (a, alpha), _ = curve_fit(lambda n, a, al: a * n**al, x, y, p0=(np.exp(loga0), alpha0),
                              maxfev=20000)
    rss = float(np.sum((a * x**alpha - y) ** 2))
    return {"a": float(a), "alpha": float(alpha), "rss": rss}


def fit_quadratic(x, y) -> dict:
    """Least-squares coefficient of ``a N^2`` (exponent held fixed)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    a = float(np.sum(y * x**2) / np.sum(x**4))
    return {"a": a, "rss": float(np.sum((a * x**2 - y) ** 2))}


def fit_exponential(x, y) -> dict:
    """Least-squares fit of ``b (exp(N / beta) - 1)``."""
    x, y = np.asarray(x, float), np.asarray(y, float)

    def f(n, b, beta):
        return b * np.expm1(n / beta)

    beta0 = max((x[-1] - x[0]) / max(np.log(y[-1] / y[0]), 1e-3), 0.2)
    b0 = y[-1] / np.expm1(x[-1] / beta0)
    (b, beta), _ = curve_fit(f, x, y, p0=(b0, beta0), maxfev=20000)
    rss = float(np.sum((f(x, b, beta) - y) ** 2))
    return {"b": float(b), "beta": float(beta), "rss": rss}


def _run_point(data: dict, out_dir: str, cut_times: list[float]) -> dict:
    try:
        cfg = validate_config(data)
        res = run_experiment(cfg, out_dir)
    except Exception as err:  # a failed point must not end the sweep
        return {"status": "error", "error": f"{type(err).__name__}: {err}"}
    row = {"status": "ok", "wall_time_s": res.metadata["wall_time_s"]}
    row |= {k: v for k, v in res.metadata["final"].items() if k != "t"}
    row["stalled_steps"] = res.metadata["stalled_steps"]
    if cut_times and "n_cx" in res.columns:
        t, ncx = res.column("t"), res.column("n_cx")
        for c in cut_times:
            before = t <= c + 1e-9
            row[f"n_cx_t{c:g}"] = int(ncx[before][-1]) if before.any() else None
    return row


def sweep(template: dict, grid: dict[str, list], out_dir: str | Path,
          cut_times: list[float] = (), fit_variable: str = "model.n",
          fit_columns: list[str] = ("n_theta", "n_two_qubit", "n_cx"),
          threads: int = 1) -> dict:
    """Run every grid point (in a process pool when ``threads > 1``) and fit scaling laws."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    jobs = []
    for k, point in enumerate(points):
        data = copy.deepcopy({key: val for key, val in template.items() if key != "sweep"})
        for key, value in point.items():
            set_path(data, key, value)
        validate_config(data)  # fail fast on a bad grid before any point runs
        jobs.append((data, str(out / f"point_{k:03d}"), list(cut_times)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_point, *zip(*jobs)))
    else:
        results = [_run_point(*job) for job in jobs]
    rows = [point | res for point, res in zip(points, results)]

    fits = {}
    ok = [r for r in rows if r["status"] == "ok"]
    if fit_variable in keys and len(ok) >= 3:
        x = np.array([r[fit_variable] for r in ok], dtype=float)
        for col in fit_columns:
            if not all(isinstance(r.get(col), (int, float)) for r in ok):
                continue
            y = np.array([r[col] for r in ok], dtype=float)
            fits[col] = {}
            for name, fn in (("power_law", fit_power_law), ("quadratic", fit_quadratic),
                             ("exponential", fit_exponential)):
                try:
                    if np.any(y <= 0):
                        raise ValueError("fits need positive values")
                    fits[col][name] = fn(x, y)
                except (ValueError, RuntimeError) as err:
                    fits[col][name] = {"error": str(err)}

    columns = list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow(["" if r.get(c) is None else r.get(c) for c in columns])
    write_atomic(out / "sweep.csv", buf.getvalue())
    summary = {"grid": grid, "fit_variable": fit_variable, "rows": rows, "fits": fits}
    write_atomic(out / "sweep.json", json.dumps(summary, indent=2, default=float) + "\n")
    return summary

