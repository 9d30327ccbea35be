"""Command-line entry point: ``fibmon <subcommand> [flags]``.

Exit status: 0 success, 1 acceptance failure, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import KrausConvention, Protocol, RunConfig
from .errors import ConfigError, FibmonError, SizeError, UsageError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _cuts(s: str) -> tuple[int, ...] | str:
    if s == "all":
        return s
    return tuple(int(c) for c in s.split(",") if c)


def _float(s: str) -> float:
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


def add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="JSON file with RunConfig fields used as defaults")
    g.add_argument("--protocol", choices=[x.value for x in Protocol])
    g.add_argument("--L", type=int)
    g.add_argument("--depth", type=int)
    g.add_argument("--tau-x", type=_float)
    g.add_argument("--tau-zz", type=_float)
    g.add_argument("--p-x", type=float)
    g.add_argument("--p-zz", type=float)
    g.add_argument("--n-trajectories", type=int)
    g.add_argument("--master-seed", type=int)
    g.add_argument("--kraus-convention", choices=[x.value for x in KrausConvention])
    g.add_argument("--cuts", type=_cuts, help="comma-separated cut positions or 'all'")
    g.add_argument("--record-outcomes", type=_bool, metavar="BOOL")
    g.add_argument("--fibonacci-only-sampling", type=_bool, metavar="BOOL")
    g.add_argument("--final-only-sampling", type=_bool, metavar="BOOL")
    g.add_argument("--with-reference", type=_bool, metavar="BOOL")
    g.add_argument("--schedule", choices=["fibonacci", "floquet"])
    g.add_argument("--backend", choices=["auto", "oracle", "gaussian", "stabilizer", "percolation"])
    g.add_argument("--reorth-every", type=int)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the JSON file, then explicit flags."""
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    names = {f.name for f in fields(RunConfig)} - {"extra"}
    flags = {k: v for k, v in vars(args).items() if k in names and v is not None}
    # an explicit p flag replaces a tau from the file and vice versa
    for t, p in (("tau_x", "p_x"), ("tau_zz", "p_zz")):
        if t in flags and p not in flags:
            data.pop(p, None)
        if p in flags and t not in flags:
            data.pop(t, None)
    data.update(flags)
    if data.get("cuts") == "all":
        data["cuts"] = tuple(range(1, int(data.get("L", RunConfig.L))))
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "tau_x" not in data and "p_x" not in data or "tau_zz" not in data and "p_zz" not in data:
        raise ConfigError("set --tau-x/--tau-zz or --p-x/--p-zz (or put them in --config)")
    return RunConfig(**data)


def _parse_axis(spec: str) -> tuple[str, list[float]]:
    """``name=a:b:n`` (inclusive linspace) or ``name=v1,v2,...``."""
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r} must look like name=start:stop:num or name=v1,v2")
    name, rhs = spec.split("=", 1)
    name = name.strip().replace("-", "_")
    if name not in ("tau_x", "tau_zz", "p_x", "p_zz"):
        raise ConfigError(f"sweep axes run over tau_x, tau_zz, p_x or p_zz, not {name!r}")
    try:
        if ":" in rhs:
            a, b, n = rhs.split(":")
            values = np.linspace(float(a), float(b), int(n)).tolist()
        else:
            values = [float(v) for v in rhs.split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad axis values in {spec!r}") from exc
    if not values:
        raise ConfigError(f"axis {name} has no values")
    return name, values


# ------------------------------------------------------------------ subcommands


def cmd_simulate(args) -> int:
    from .orchestrator import run_ensemble

    cfg = config_from_args(args)
    res = run_ensemble(cfg, args.out, workers=args.workers)
    print(f"backend {res.backend}, {cfg.n_trajectories} trajectories, hash {cfg.config_hash()}")
    s = res.summary
    for j, c in enumerate(s.cuts):
        print(f"t={int(s.times[-1])} cut={c} S={s.mean[-1, j]:.10g} +- {s.sem[-1, j]:.3g}")
    for name, (m, e) in s.observables.items():
        print(f"{name}={m:.10g} +- {e:.3g}")
    if args.out:
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .orchestrator import sweep

    cfg = config_from_args(args)
    axes = dict(_parse_axis(a) for a in args.axis)
    cells = sweep(cfg, axes, args.out, workers=args.workers)
    names = list(axes)
    print(",".join(names + ["cut", "S_final", "sem"]))
    for cell in cells:
        s = cell.summary
        for j, c in enumerate(s.cuts):
            print(",".join([f"{cell.params[k]:.10g}" for k in names] + [str(c), f"{s.mean[-1, j]:.10g}", f"{s.sem[-1, j]:.3g}"]))
    return EXIT_OK


def _load_run(path: Path):
    from .orchestrator import load_records

    rec_file = path / "records.jsonl" if path.is_dir() else path
    manifest = rec_file.parent / "manifest.json"
    if not rec_file.exists():
        raise UsageError(f"no records at {rec_file}")
    cfg = RunConfig.from_dict(json.loads(manifest.read_text())["config"]) if manifest.exists() else None
    return cfg, load_records(rec_file)


def cmd_analyze(args) -> int:
    from . import analysis as A

    cfg, rows = _load_run(args.run)
    if not rows:
        raise UsageError("records file is empty")
    series = [r["series"] for r in rows]
    L = cfg.L if cfg is not None else args.L
    values = np.stack([s.values[args.time_index] for s in series])
    cuts = np.asarray(series[0].cuts)
    arc = A.Arc.from_samples(L, cuts, values)
    print(f"trajectories {len(rows)}, t={int(series[0].times[args.time_index])}")
    if len(cuts) >= 6 and L is not None:
        c, se = A.fit_cent(arc, cutoff=args.cutoff)
        print(f"c_ent={c:.6f} +- {se:.6f} (cuts {args.cutoff}..{L - args.cutoff})")
    else:
        for l, S, e in zip(arc.l, arc.S, arc.err if arc.err is not None else [0.0] * len(arc.l)):
            print(f"cut={int(l)} S={S:.10g} +- {e:.3g}")
    recs = [r["record"] for r in rows if r.get("record") is not None]
    if recs:
        st = A.record_stats(recs, args.pairing)
        for kind in ("X", "ZZ"):
            pp, pr = st.p_plus[kind], st.p_repeat[kind]
            print(f"{kind}: P(s=+1)={pp.value:.5f} +- {pp.err:.5f}  P(repeat)={pr.value:.5f} +- {pr.err:.5f} (n={pr.n})")
    return EXIT_OK


def cmd_fourier(args) -> int:
    from . import analysis as A
    from . import analytics as an

    lo, hi = args.window
    if args.run is not None:
        cfg, rows = _load_run(args.run)
        vals = np.mean([r["series"].values[:, 0] for r in rows], axis=0)
        times = rows[0]["series"].times
        spec = A.fourier_spectrum(vals, (lo, hi), times=times)
    else:
        t = np.arange(1, hi + 1)
        spec = A.fourier_spectrum(an.projective_entropy(t).astype(float), (lo, hi), times=t)
    ns = np.arange(1, args.peaks + 1)
    amps = A.golden_peaks(spec, ns, taper=args.taper)
    print("n,omega_n,measured,closed_form,rel_dev")
    for n, a in zip(ns, amps):
        ref = abs(an.fourier_coefficient(int(n)))
        print(f"{n},{2 * math.pi * n / an.PHI % (2 * math.pi):.10f},{a:.10g},{ref:.10g},{a / ref - 1:+.3e}")
    print(f"# Parseval relative error {spec.parseval_error():.3e}")
    return EXIT_OK


def cmd_percolation(args) -> int:
    from . import percolation as P

    if args.line is not None:
        for px in args.line:
            print(f"p_x={px:.6g} p_zz={P.critical_line_p(px):.10f} series={P.critical_line_series(px):.10f}")
        return EXIT_OK
    cfg = config_from_args(args)
    cfg = cfg.with_(protocol="percolation") if cfg.protocol.value != "percolation" else cfg
    grid = [(cfg.p_x, q) for q in (args.p_zz_grid or [cfg.p_zz])]
    print("p_x,p_zz,S_half,sem,I_c,sem")
    for st in P.sweep_percolation(cfg, grid=grid):
        ic = "" if st.mean_ic is None else f"{st.mean_ic:.10g},{st.sem_ic:.3g}"
        print(f"{st.p_x:.10g},{st.p_zz:.10g},{st.mean_half:.10g},{st.sem_arc[cfg.L // 2 - 1]:.3g},{ic}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .recipes import RECIPES, reproduce

    ids = list(RECIPES) if args.figure_ids == ["all"] else args.figure_ids
    reports = [reproduce(fid, quick=args.quick, seed=args.seed) for fid in ids]
    for rep in reports:
        print(rep.text())
    if args.json is not None:
        args.json.write_text(json.dumps([r.to_dict() for r in reports], indent=1, default=float) + "\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fibmon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one trajectory ensemble")
    add_config_flags(s)
    s.add_argument("--out", type=Path, help="directory for manifest, records and summary")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="cartesian grid of ensembles")
    add_config_flags(s)
    s.add_argument("--axis", action="append", required=True, help="name=start:stop:num or name=v1,v2,...")
    s.add_argument("--out", type=Path)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("analyze", help="arc fit and record statistics of a stored run")
    s.add_argument("run", type=Path, help="run directory or records.jsonl")
    s.add_argument("--L", type=int, help="chain length when no manifest is present")
    s.add_argument("--time-index", type=int, default=-1)
    s.add_argument("--cutoff", type=int, default=4)
    s.add_argument("--pairing", choices=["next-of-kind", "adjacent"], default="next-of-kind")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("fourier", help="golden-ratio peaks of an entropy series")
    s.add_argument("--run", type=Path, help="stored run (first cut, trajectory mean); default: projective formula")
    s.add_argument("--window", type=int, nargs=2, default=(610, 4181), metavar=("T_A", "T_B"))
    s.add_argument("--peaks", type=int, default=10)
    s.add_argument("--taper", choices=["rect", "hann"], default="hann")
    s.set_defaults(func=cmd_fourier)

    s = sub.add_parser("percolation", help="percolation ensembles or the analytic boundary")
    add_config_flags(s)
    s.add_argument("--line", type=float, nargs="+", metavar="P_X", help="print the analytic boundary and exit")
    s.add_argument("--p-zz-grid", type=float, nargs="+")
    s.set_defaults(func=cmd_percolation)

    s = sub.add_parser("reproduce", help="run acceptance recipes")
    s.add_argument("figure_ids", nargs="+", help="recipe ids, criterion numbers, or 'all'")
    s.add_argument("--quick", action="store_true", help="small sizes (smoke test)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", type=Path, help="write reports as JSON")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SizeError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FibmonError, OSError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
