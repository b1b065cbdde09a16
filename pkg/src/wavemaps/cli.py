"""Command-line driver.

Every run resolves a flat configuration (``section.key = value``), validates it
before computing anything, writes its outputs into ``<out>/<run.name>/`` and
finishes with ``manifest.json``.  Exit codes: 0 success, 1 invalid input or
configuration, 2 numerical failure, 3 acceptance failure (``selftest``).

Configuration sources, later ones winning: built-in defaults, the
``WAVEMAPS_OUT`` environment variable (for ``run.out``), ``--config FILE``,
the shortcut flags, and ``--set section.key=value``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .errors import ConfigurationError, DomainError, ResolutionError, WaveMapError
from .io import write_csv, write_manifest

SUBCOMMANDS = ("simulate", "fit", "modulate", "virial", "integrals", "ode", "selftest")
ENV_OUT = "WAVEMAPS_OUT"


# ------------------------------------------------------------ config schema
def _ladder(text: str) -> list[float]:
    """``a:b:n`` (``n`` log-spaced values) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("ladder must be lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if not 0 < lo < hi or n < 2:
            raise ValueError("ladder needs 0 < lo < hi and n >= 2")
        return [float(x) for x in np.logspace(math.log10(lo), math.log10(hi), n)]
    return _floats(text)


def _floats(text: str) -> list[float]:
    vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _ints(text: str) -> list[int]:
    if text.strip() == "all":
        return []
    return [int(x) for x in text.split(",") if x.strip()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _positive(cast):
    def parse(text: str):
        v = cast(text)
        if not v > 0:
            raise ValueError("must be positive")
        return v
    return parse


# key -> (parser, default text)
SCHEMA: dict[str, tuple[Callable[[str], object], str]] = {
    "run.k": (int, "2"),
    "run.out": (str, "wavemaps-runs"),
    "run.name": (str, ""),
    "run.seed": (int, "0"),
    "run.workers": (_positive(int), "1"),
    "grid.r_max": (_positive(float), "25"),
    "grid.h": (_positive(float), "0.0025"),
    "data.kind": (_choice("two_bubble", "bubble", "smooth"), "two_bubble"),
    "data.lam": (_positive(float), "0.05"),
    "data.mu": (_positive(float), "1.0"),
    "data.iota": (int, "1"),
    "data.amp": (float, "0.6"),
    "data.vel_amp": (float, "0.0"),
    "evolve.T": (float, "1.0"),
    "evolve.snapshot_every": (_positive(float), "0.1"),
    "evolve.cfl": (_positive(float), "0.5"),
    "evolve.max_drift": (_positive(float), "1e-2"),
    "evolve.diag_every": (_positive(int), "10"),
    "evolve.proximity": (_bool, "true"),
    "fit.input": (str, ""),
    "fit.sign": (_choice("both", "+", "-"), "both"),
    "fit.n_starts": (_positive(int), "5"),
    "fit.scan": (_positive(int), "24"),
    "modulate.input": (str, ""),
    "modulate.eta0": (_positive(float), "0.01"),
    "modulate.profile_c": (_positive(float), "0.05"),
    "modulate.profile_R": (_positive(float), "20"),
    "virial.input": (str, ""),
    "virial.R": (_floats, "1,2,4"),
    "integrals.sigma_ladder": (_ladder, "1e-3:1e-1:8"),
    "integrals.ks": (_ints, "2,3,4,5,6"),
    "ode.zeta0": (_positive(float), "0.1"),
    "ode.b0": (str, "separatrix"),
    "ode.direction": (int, "-1"),
    "ode.horizon": (_positive(float), "1e12"),
    "ode.mu": (_positive(float), "1.0"),
    "ode.ks": (_ints, "2,3,4,5,6"),
    "selftest.criteria": (_ints, "all"),
}

SHORTCUTS = {
    "k": "run.k", "out": "run.out", "name": "run.name", "seed": "run.seed", "workers": "run.workers",
    "sigma_ladder": "integrals.sigma_ladder", "lam": "data.lam", "mu": "data.mu", "T": "evolve.T",
    "input": None, "R": "virial.R", "criteria": "selftest.criteria",
}


def read_config(path) -> dict[str, str]:
    """Parse ``section.key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def resolve(raw: dict[str, str]) -> tuple[dict[str, object], dict[str, str]]:
    """Validate every key; return parsed values and their canonical text."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    values, texts = {}, {}
    for key, (parse, default) in SCHEMA.items():
        text = raw.get(key, default)
        try:
            values[key] = parse(text)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"{key} = {text!r}: {exc}") from None
        texts[key] = text
    if int(values["run.k"]) < 2:
        raise ConfigurationError("run.k must be >= 2")
    if values["data.iota"] not in (1, -1) or values["ode.direction"] not in (1, -1):
        raise ConfigurationError("data.iota and ode.direction must be +1 or -1")
    for key in ("integrals.ks", "ode.ks"):
        if any(k < 2 for k in values[key]):
            raise ConfigurationError(f"{key} entries must be >= 2")
    return values, texts


# ---------------------------------------------------------------- run context
class Run:
    def __init__(self, sub: str, cfg: dict, texts: dict):
        self.sub, self.cfg, self.texts = sub, cfg, texts
        self.dir = Path(cfg["run.out"]) / (cfg["run.name"] or sub)
        self.outputs: list[str] = []
        self.info: dict = {}
        self.grid_checksum: str | None = None
        self.halt_reason: str | None = None
        self.explicit: set[str] = set()

    def prepare(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.dir / name, list(header), rows)
        self.outputs.append(name)

    def checksum(self, grid) -> None:
        self.grid_checksum = hashlib.sha256(grid.to_text().encode()).hexdigest()

    def manifest(self, status: str, code: int, error: str | None, seconds: float) -> None:
        write_manifest(self.dir / "manifest.json", {
            "tool": "wavemaps", "version": __version__, "subcommand": self.sub, "status": status,
            "exit_code": code, "error": error, "halt_reason": self.halt_reason,
            "grid_sha256": self.grid_checksum, "config": self.texts, "outputs": self.outputs,
            "results": self.info, "seconds": round(seconds, 3),
        })


def _input_dir(cfg: dict, key: str) -> Path:
    path = cfg[key]
    if not path:
        raise ConfigurationError(f"{key} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"{key}: {p} does not exist")
    return p


# --------------------------------------------------------------- subcommands
def cmd_simulate(run: Run) -> int:
    from .batteries import smooth_compact
    from .evolve import evolution_grid, evolve, init_state, two_bubble_state
    from .functionals import bubble_distance
    from .statics import Q

    c = run.cfg
    k, T = int(c["run.k"]), float(c["evolve.T"])
    grid = evolution_grid(c["grid.r_max"], c["grid.h"])
    if c["data.kind"] == "two_bubble":
        state = two_bubble_state(k, c["data.lam"], c["data.mu"], grid, c["data.iota"], cfl=c["evolve.cfl"],
                                 horizon=T)
    else:
        r = grid.nodes
        psi0 = Q(r, k, c["data.lam"]) if c["data.kind"] == "bubble" else smooth_compact(r, k, c["data.amp"])
        psi1 = smooth_compact(r, k, c["data.vel_amp"], 1.2) if c["data.vel_amp"] else None
        state = init_state(psi0, psi1, k, grid, c["evolve.cfl"], horizon=T)
    run.checksum(grid)
    run.prepare()
    traj = evolve(state, T, snapshot_every=c["evolve.snapshot_every"], diag_every=c["evolve.diag_every"],
                  max_drift=c["evolve.max_drift"])
    traj.params.update({"data": c["data.kind"], "lam": c["data.lam"], "mu": c["data.mu"]})
    d_values = {}
    if c["evolve.proximity"] and c["data.kind"] != "bubble":
        for t, fp in zip(traj.times, traj.snapshots):
            d_values[t] = bubble_distance(fp, n_starts=c["fit.n_starts"], scan=min(c["fit.scan"], 16)).d
    traj.write(run.dir, d_values)
    run.outputs += ["trajectory.json", "grid.txt", "diagnostics.csv"] + [f"snapshot_{i:04d}.txt"
                                                                        for i in range(len(traj.times))]
    run.halt_reason = traj.halt_reason
    run.info = {"snapshots": len(traj.times), "final_t": traj.final.t, "energy_drift": traj.energy_drift}
    return 2 if traj.halt_reason else 0


def _snapshot_for_fit(path: Path, k_default: int):
    from .evolve import load_trajectory

    if path.is_dir():
        times, snaps, _ = load_trajectory(path)
        return times[-1], snaps[-1]
    directory = path.parent
    times, snaps, manifest = load_trajectory(directory)
    for entry, t, fp in zip(manifest["snapshots"], times, snaps):
        if entry["file"] == path.name:
            return t, fp
    raise ConfigurationError(f"{path.name} is not listed in {directory / 'trajectory.json'}")


def cmd_fit(run: Run) -> int:
    from .functionals import bubble_distance

    c = run.cfg
    t, fp = _snapshot_for_fit(_input_dir(c, "fit.input"), int(c["run.k"]))
    run.checksum(fp.grid)
    run.prepare()
    signs = {"both": (1, -1), "+": (1,), "-": (-1,)}[c["fit.sign"]]
    rows = []
    for s in signs:
        f = bubble_distance(fp, sign=s, n_starts=c["fit.n_starts"], scan=c["fit.scan"])
        rows.append([t, s, f.lam, f.mu, f.d, f.g_H, f.kinetic, f.ratio_term, int(f.converged)])
    run.csv("fit.csv", ("t", "iota", "lambda", "mu", "d", "g_H", "kinetic", "ratio_term", "converged"), rows)
    best = min(rows, key=lambda row: row[4])
    run.info = {"t": t, "d": best[4], "iota": best[1], "lambda": best[2], "mu": best[3]}
    return 0


def cmd_modulate(run: Run) -> int:
    from .errors import FitError
    from .evolve import load_trajectory
    from .modulation import ModulationRow, modulate
    from .statics import CutoffZ, VirialProfile

    c = run.cfg
    times, snaps, _ = load_trajectory(_input_dir(c, "modulate.input"))
    run.checksum(snaps[0].grid)
    profile = VirialProfile(c["modulate.profile_c"], c["modulate.profile_R"])
    run.prepare()
    Z = CutoffZ(snaps[0].k)
    rows, seed = [], None
    for t, fp in zip(times, snaps):
        try:
            row = modulate(fp, t, profile, Z, seed=seed, eta0=c["modulate.eta0"], check_gate=seed is None)
        except (FitError, DomainError, ResolutionError) as exc:
            if seed is None:
                raise
            run.halt_reason = f"modulation stopped at t={t:.6g}: {exc}"
            break
        rows.append(row.as_row())
        seed = (row.lam, row.mu)
    run.csv("modulation.csv", ModulationRow.HEADER, rows)
    run.info = {"rows": len(rows)}
    return 0


def cmd_virial(run: Run) -> int:
    from .evolve import load_trajectory
    from .virial import VirialSeries, integrated_bound, integrated_gap, virial_residual

    c = run.cfg
    times, snaps, _ = load_trajectory(_input_dir(c, "virial.input"))
    run.checksum(snaps[0].grid)
    run.prepare()
    summary = []
    for R in c["virial.R"]:
        series = virial_residual(snaps, R, times)
        name = f"virial_R{R:g}.csv"
        run.csv(name, VirialSeries.HEADER, series.rows())
        lhs, rhs = integrated_bound(series)
        summary.append([R, series.max_residual, lhs, rhs, integrated_gap(series)])
    run.csv("virial_summary.csv", ("R", "max_residual", "kinetic_integral", "bound", "identity_gap"), summary)
    run.info = {"max_residual": max(row[1] for row in summary)}
    return 0


def _report_cell(args):
    from .asymptotics import interaction_report

    k, sigma = args
    return [row.as_row() for row in interaction_report(k, sigma)]


def _fan_out(fn, cells, workers: int):
    if workers <= 1:
        return [fn(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def cmd_integrals(run: Run) -> int:
    from .asymptotics import SummaryRow, loglog_slope

    c = run.cfg
    ladder = c["integrals.sigma_ladder"]
    if any(not 1e-4 <= s <= 0.2 for s in ladder):
        raise DomainError("sigma ladder must lie in [1e-4, 0.2]")
    ks = c["integrals.ks"] or [int(c["run.k"])]
    if "run.k" in run.explicit:
        ks = [int(c["run.k"])]
    run.prepare()
    cells = [(k, s) for k in ks for s in ladder]
    results = _fan_out(_report_cell, cells, c["run.workers"])
    rows, seen = [], set()
    for block in results:
        for row in block:
            key = (row[0], row[1])
            if key in seen:  # sigma-independent quantities appear once per k
                continue
            seen.add(key)
            rows.append(row)
    slopes = []
    for k in ks:
        by_q = {"interaction": [], "bprime_pairing": []}
        for row in rows:
            if row[0] == k:
                for q in by_q:
                    if row[1].startswith(q + "("):
                        by_q[q].append(row[2])
        slopes.append([k, "slope_interaction", loglog_slope(ladder, by_q["interaction"]), float(k),
                       abs(loglog_slope(ladder, by_q["interaction"]) - k) / k])
        s = loglog_slope(ladder, by_q["bprime_pairing"])
        slopes.append([k, "slope_bprime_pairing", s, float(k - 1), abs(s - (k - 1)) / (k - 1)])
    run.csv("summary.csv", SummaryRow.HEADER, rows + slopes)
    run.info = {"rows": len(rows) + len(slopes), "ks": ks, "ladder": ladder}
    return 0


def _ode_cell(args):
    from . import asymptotics as asy

    k, zeta0, b0_text, direction, horizon, mu = args
    b0 = asy.separatrix_b(k, zeta0, mu) if b0_text == "separatrix" else float(b0_text)
    tr = asy.integrate_ode(k, zeta0, b0, mu, direction, horizon)
    model = "exponential" if k == 2 else "power"
    fit = asy.rate_fit(tr, model)
    pred = asy.rate_prediction(k, mu) if k == 2 else asy.exponent_prediction(k)
    series = [[k, float(t), float(z), float(b), float(x)] for t, z, b, x in zip(tr.t, tr.zeta, tr.b, tr.xi)]
    return series, [k, model, fit.rate, pred, abs(fit.rate / pred - 1.0), fit.prefactor, fit.residual,
                    tr.xi_monotone(), tr.stop_reason]


def cmd_ode(run: Run) -> int:
    c = run.cfg
    ks = c["ode.ks"] or [int(c["run.k"])]
    if "run.k" in run.explicit:
        ks = [int(c["run.k"])]
    if c["ode.b0"] != "separatrix":
        try:
            float(c["ode.b0"])
        except ValueError:
            raise ConfigurationError("ode.b0 must be 'separatrix' or a number") from None
    run.prepare()
    cells = []
    for k in ks:
        # k = 2 grows from a small start; k > 2 follows the concentrating branch
        zeta0 = 1e-3 if (k == 2 and c["ode.b0"] == "separatrix") else c["ode.zeta0"]
        b0 = "0" if (k == 2 and c["ode.b0"] == "separatrix") else c["ode.b0"]
        direction = 1 if k == 2 else c["ode.direction"]
        cells.append((k, zeta0, b0, direction, c["ode.horizon"], c["ode.mu"]))
    results = _fan_out(_ode_cell, cells, c["run.workers"])
    series = [row for block, _ in results for row in block]
    fits = [fit for _, fit in results]
    run.csv("ode_series.csv", ("k", "t", "zeta", "b", "xi"), series)
    run.csv("ode_rates.csv", ("k", "model", "fitted", "predicted", "rel_dev", "prefactor", "fit_residual",
                              "xi_monotone", "stop_reason"), fits)
    run.info = {"max_rel_dev": max(f[4] for f in fits)}
    return 0


def cmd_selftest(run: Run) -> int:
    from . import acceptance

    run.prepare()
    selected = run.cfg["selftest.criteria"] or None
    checks = acceptance.run(selected, report=print)
    rows = [[c.number, c.name, int(c.passed), c.seconds, json.dumps(acceptance_detail(c.detail))] for c in checks]
    run.csv("selftest.csv", ("criterion", "name", "passed", "seconds", "detail"), rows)
    failed = [c.number for c in checks if not c.passed]
    run.info = {"passed": len(checks) - len(failed), "failed": failed}
    return 3 if failed else 0


def acceptance_detail(detail: dict) -> dict:
    def conv(v):
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, (np.floating, np.integer, np.bool_)):
            return v.item()
        return v
    return {k: conv(v) for k, v in detail.items()}


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "modulate": cmd_modulate, "virial": cmd_virial,
            "integrals": cmd_integrals, "ode": cmd_ode, "selftest": cmd_selftest}


# ----------------------------------------------------------------- dispatch
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavemaps", description="Equivariant wave maps laboratory.")
    p.add_argument("--version", action="version", version=f"wavemaps {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="flat key = value configuration file")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration key (repeatable)")
        s.add_argument("--k", help="equivariance class (run.k)")
        s.add_argument("--out", help="output root (run.out)")
        s.add_argument("--name", help="run directory name (run.name)")
        s.add_argument("--seed", help="random seed (run.seed)")
        s.add_argument("--workers", help="parallel workers for sweeps (run.workers)")
        if name == "integrals":
            s.add_argument("--sigma-ladder", dest="sigma_ladder", help="lo:hi:n or comma list")
        if name == "simulate":
            s.add_argument("--lam", help="inner scale (data.lam)")
            s.add_argument("--mu", help="outer scale (data.mu)")
            s.add_argument("--T", help="signed time horizon (evolve.T)")
        if name in ("fit", "modulate", "virial"):
            s.add_argument("--input", help="trajectory directory or snapshot file")
        if name == "virial":
            s.add_argument("--R", help="comma list of cutoff radii (virial.R)")
        if name == "selftest":
            s.add_argument("--criteria", help="comma list of criterion numbers, or 'all'")
    return p


def gather(args: argparse.Namespace) -> tuple[dict[str, str], set[str]]:
    raw: dict[str, str] = {}
    if os.environ.get(ENV_OUT):
        raw["run.out"] = os.environ[ENV_OUT]
    if args.config is not None:
        if not args.config.exists():
            raise ConfigurationError(f"config file {args.config} does not exist")
        raw.update(read_config(args.config))
    explicit = set()
    for flag, key in SHORTCUTS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        key = key or f"{args.command}.input"
        raw[key] = value
        explicit.add(key)
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
        explicit.add(key.strip())
    return raw, explicit


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    run, raw = None, {}
    try:
        raw, explicit = gather(args)
        cfg, texts = resolve(raw)
        run = Run(args.command, cfg, texts)
        run.explicit = explicit
        code = COMMANDS[args.command](run)
        status, error = ("ok" if code == 0 else "failed"), (run.halt_reason if code == 2 else None)
    except (ConfigurationError, DomainError, ResolutionError, ValueError) as exc:
        code, status, error = 1, "invalid", f"{type(exc).__name__}: {exc}"
    except (WaveMapError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code, status, error = 2, "numerical-error", f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # unexpected: still leave a manifest behind
        code, status, error = 2, "crashed", "".join(traceback.format_exception_only(type(exc), exc)).strip()
    if error:
        print(f"wavemaps {args.command}: {error}", file=sys.stderr)
    if run is None:
        # validation failed before the run existed; honour whatever output keys were given
        out = raw.get("run.out") or args.out or os.environ.get(ENV_OUT) or SCHEMA["run.out"][1]
        name = raw.get("run.name") or args.name or args.command
        run = Run(args.command, {"run.out": out, "run.name": name}, dict(raw))
    try:
        run.prepare()
        run.manifest(status, code, error, time.perf_counter() - t0)
    except OSError as exc:
        print(f"wavemaps: could not write manifest: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
