"""Ensemble execution, backend routing and result persistence.

Trajectory i always uses ``stream(master_seed, i)``; diluted protocols draw their
gate placement from that stream before any outcome. Reductions run in index order,
so outputs do not depend on the number of workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import gaussian, oracle, percolation, stabilizer
from .config import Protocol, RunConfig, stream
from .errors import ConfigError, FibmonError, SizeError
from .records import EntropySeries, MeasurementRecord
from .schedule import DilutedFibonacci, DilutionMask, Fibonacci, Floquet, Word, realize_dilution

FORMAT_VERSION = 1


def _version() -> str:
    from . import __version__

    return __version__


# ------------------------------------------------------------------ serialization


def fmt(x: float) -> str:
    """17 significant digits; non-finite values as JSON-compatible strings."""
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj) -> str:
    """Compact deterministic JSON with every float written by :func:`fmt`."""
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in sorted(obj.items())) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "value"):
        return dumps(obj.value)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ------------------------------------------------------------------ single trajectories


@dataclass(frozen=True)
class ResultRecord:
    config_hash: str
    index: int
    series: EntropySeries
    record: MeasurementRecord | None
    observables: dict
    wall_time: float = field(default=0.0, compare=False)

    def to_json(self) -> str:
        """One JSONL line; wall time is left out so records are reproducible byte for byte."""
        return dumps({
            "config_hash": self.config_hash,
            "index": self.index,
            "series": self.series.to_dict(),
            "record": None if self.record is None else self.record.to_dict(),
            "observables": self.observables,
        })


def resolve_backend(config: RunConfig) -> str:
    """Backend name for ``config``: oracle, gaussian, stabilizer or percolation."""
    b = config.backend
    weak = config.protocol in (Protocol.POSTSELECTED, Protocol.BORN)
    if b == "auto":
        if weak:
            b = "gaussian"
        elif config.protocol is Protocol.PERCOLATION:
            b = "percolation"
        else:
            b = "stabilizer"
    allowed = {"oracle", "gaussian"} if weak else {"stabilizer", "percolation"}
    if b not in allowed:
        raise ConfigError(f"backend {b!r} cannot run protocol {config.protocol.value}")
    limits = {"oracle": oracle.MAX_L, "gaussian": gaussian.MAX_L, "stabilizer": stabilizer.MAX_L,
              "percolation": 1 << 20}
    if config.L > limits[b]:
        raise SizeError(f"L={config.L} exceeds the {b} backend limit {limits[b]}")
    return b


def schedule_word(config: RunConfig) -> Word:
    if config.schedule == "floquet":
        return Floquet().word(config.depth)
    return Fibonacci().word(config.depth)


def _realization(config: RunConfig, rng: np.random.Generator) -> DilutionMask:
    """Gate placement for diluted protocols; the first draws of the trajectory stream."""
    if config.schedule == "fibonacci":
        return realize_dilution(DilutedFibonacci(config.p_x, config.p_zz), config.L, config.depth, rng)
    word = schedule_word(config)
    rates = np.where(word.bits == 1, config.p_x, config.p_zz)
    active = rng.random((config.depth, config.L)) < rates[:, None]
    active.flags.writeable = False
    return DilutionMask(word, active)


def run_single(config: RunConfig, index: int) -> ResultRecord:
    """Trajectory ``index`` of ``config`` on the routed backend."""
    backend = resolve_backend(config)
    rng = stream(config.master_seed, index)
    t0 = time.perf_counter()
    obs: dict = {}
    rec = None
    if backend in ("oracle", "gaussian"):
        mod = oracle if backend == "oracle" else gaussian
        series, rec, raw = mod.run_trajectory(config, schedule_word(config), rng)
        for key in ("coherent_information", "log_weight"):
            if key in raw:
                obs[key] = float(raw[key])
    elif backend == "stabilizer":
        mask = _realization(config, rng)
        series, rec, tab = stabilizer.run_clifford_trajectory(config, mask, rng)
        if config.with_reference:
            obs["coherent_information"] = stabilizer.coherent_information(tab)
    else:
        mask = _realization(config, rng)
        lat = percolation.build_lattice(mask, with_reference=config.with_reference)
        labels = percolation.cluster_labels(lat)
        counts = percolation.arc_proxy(lat, labels)
        cuts = config.resolved_cuts
        series = EntropySeries(np.array([config.depth]), cuts, counts[np.asarray(cuts) - 1].reshape(1, -1))
        if config.with_reference:
            obs["coherent_information"] = percolation.coherent_information(lat, labels)
    if not config.record_outcomes:
        rec = None
    return ResultRecord(config.config_hash(), index, series, rec, obs, time.perf_counter() - t0)


def _run_chunk(args) -> list[ResultRecord]:
    config, indices = args
    return [run_single(config, i) for i in indices]


# ------------------------------------------------------------------ ensembles


@dataclass(frozen=True)
class EnsembleSummary:
    """Index-ordered means and standard errors of every recorded quantity."""

    times: np.ndarray
    cuts: tuple[int, ...]
    mean: np.ndarray
    sem: np.ndarray
    n: int
    observables: dict  # name -> (mean, sem)

    def rows(self) -> list[tuple]:
        out = []
        for i, t in enumerate(self.times):
            for j, c in enumerate(self.cuts):
                out.append(("entropy", int(t), int(c), self.mean[i, j], self.sem[i, j], self.n))
        for name, (m, s) in sorted(self.observables.items()):
            out.append((name, int(self.times[-1]), -1, m, s, self.n))
        return out

    def arc(self, time_index: int = -1):
        from .analysis import Arc

        return Arc(0, np.asarray(self.cuts), self.mean[time_index], self.sem[time_index])


def summarize(results: list[ResultRecord]) -> EnsembleSummary:
    results = sorted(results, key=lambda r: r.index)
    vals = np.stack([r.series.values for r in results])
    n = len(results)
    sem = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(vals.shape[1:])
    obs = {}
    for key in sorted({k for r in results for k in r.observables}):
        v = np.array([r.observables[key] for r in results if key in r.observables], float)
        obs[key] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0)
    s0 = results[0].series
    return EnsembleSummary(s0.times, s0.cuts, vals.mean(axis=0), sem, n, obs)


@dataclass
class EnsembleResult:
    config: RunConfig
    results: list[ResultRecord]
    summary: EnsembleSummary
    backend: str
    out_dir: Path | None = None


def _manifest(config: RunConfig, backend: str, status: str, completed: int, files: dict) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "package_version": _version(),
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "backend": backend,
        "seeds": {"master_seed": config.master_seed, "stream": "Philox(SeedSequence(master_seed, spawn_key=(index,)))",
                  "indices": [0, config.n_trajectories]},
        "status": status,
        "completed": completed,
        "files": files,
    }


def write_summary_csv(path: Path, rows: list[tuple], header=("quantity", "time", "cut", "mean", "sem", "n")) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def run_ensemble(config: RunConfig, out_dir: str | os.PathLike | None = None, workers: int = 1,
                 chunk: int = 16) -> EnsembleResult:
    """Run ``config.n_trajectories`` trajectories and optionally persist them.

    Files in ``out_dir``: manifest.json, records.jsonl, summary.csv. Timings go to
    timing.json, which is the only file that differs between identical runs.
    """
    backend = resolve_backend(config)
    n = config.n_trajectories
    if workers > 1:
        batches = [(config, list(range(i, min(i + chunk, n)))) for i in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_run_chunk, batches) for r in part]
    else:
        results = [run_single(config, i) for i in range(n)]
    results.sort(key=lambda r: r.index)
    summary = summarize(results)
    path = None
    if out_dir is not None:
        path = Path(out_dir)
        files = {"records": "records.jsonl", "summary": "summary.csv", "timing": "timing.json"}
        written = 0
        try:
            path.mkdir(parents=True, exist_ok=True)
            with open(path / files["records"], "w") as fh:
                for r in results:
                    fh.write(r.to_json() + "\n")
                    written += 1
            write_summary_csv(path / files["summary"], summary.rows())
            (path / files["timing"]).write_text(dumps({"wall_time": [r.wall_time for r in results]}) + "\n")
            (path / "manifest.json").write_text(dumps(_manifest(config, backend, "complete", written, files)) + "\n")
        except OSError as exc:
            try:
                (path / "manifest.json").write_text(dumps(_manifest(config, backend, "partial", written, files)) + "\n")
            except OSError:
                pass
            raise FibmonError(f"writing results to {path} failed after {written} records: {exc}") from exc
    return EnsembleResult(config, results, summary, backend, path)


def load_records(path: str | os.PathLike) -> list[dict]:
    """Parse a records.jsonl file back into dicts (series and records rebuilt)."""
    out = []
    with open(path) as fh:
        for line in fh:
            d = json.loads(line)
            d["series"] = EntropySeries.from_dict(d["series"])
            if d.get("record") is not None:
                d["record"] = MeasurementRecord.from_dict(d["record"])
            out.append(d)
    return out


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepCell:
    params: dict
    summary: EnsembleSummary


def sweep(template: RunConfig, axes: dict[str, list], out_dir: str | os.PathLike | None = None,
          workers: int = 1) -> list[SweepCell]:
    """Cartesian grid over ``axes`` (RunConfig field -> values); every cell reuses the master seed."""
    if not axes:
        raise ConfigError("sweep needs at least one axis")
    names = list(axes)
    cells = []
    rows = []
    for values in product(*(axes[k] for k in names)):
        params = dict(zip(names, values))
        cfg = template.with_(**params)
        res = run_ensemble(cfg, workers=workers)
        cells.append(SweepCell(params, res.summary))
        for row in res.summary.rows():
            rows.append(tuple(float(params[k]) for k in names) + row)
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        write_summary_csv(path / "sweep.csv", rows, header=tuple(names) + ("quantity", "time", "cut", "mean", "sem", "n"))
        (path / "manifest.json").write_text(dumps({
            "format_version": FORMAT_VERSION, "package_version": _version(),
            "template": template.to_dict(), "axes": {k: list(map(float, v)) for k, v in axes.items()},
        }) + "\n")
    return cells
