"""``semiflow`` command line: run, lift, verify, presets."""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .config import ConfigError, RunConfig, parse_config
from .density import density_geodesic
from .dynamics import State, Termination, Trajectory, simulate
from .grid import GridError
from .inertia import IndefiniteOperatorError, apply_A
from .polynomial import InertiaError
from .presets import PRESET_NAMES

log = logging.getLogger("semiflow")

EXIT_OK, EXIT_INPUT, EXIT_TERMINATED = 0, 1, 2


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def versions() -> dict:
    return {
        "semiflow": _version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def fmt(x: float) -> str:
    """Shortest round-trip decimal form of a finite float."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("refusing to write a non-finite value")
    return repr(x)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_outputs(out_dir: Path, cfg: RunConfig, traj: Trajectory, command: str) -> None:
    model, grid = cfg.model.spec, cfg.grid
    lifted = command == "lift"
    header = ["t", "energy", "mass", "min_rho", "max_abs_u"] + (["horizontality"] if lifted else [])
    rows = []
    for d in traj.diagnostics:
        row = [d.time, d.energy, d.mass, d.min_rho, d.max_abs_u]
        if lifted:
            row.append(d.horizontality_defect)
        rows.append(row)
    write_atomic(out_dir / "diagnostics.csv", csv_text(header, rows))

    if cfg.output.write_fields:
        width = len(str(len(traj.states) - 1))
        for i, s in enumerate(traj.states):
            m = apply_A(model, grid, s.rho, s.u)
            text = csv_text(["x", "rho", "u", "m"], zip(grid.nodes, s.rho, s.u, m))
            write_atomic(out_dir / f"fields_{i:0{width}d}.csv", text)

    meta = {
        "command": command,
        "config": cfg.to_dict(),
        "termination": traj.termination.value,
        "detail": traj.detail,
        "final_time": traj.states[-1].time,
        "snapshots": len(traj.states),
        "versions": versions(),
    }
    write_atomic(out_dir / "metadata.json", json.dumps(meta, indent=2, allow_nan=False) + "\n")


def _load(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)


def _out_dir(cfg: RunConfig, env) -> Path:
    return Path(env.get("SEMIFLOW_OUT") or cfg.output.directory)


def cmd_run(cfg: RunConfig, env) -> int:
    if cfg.u is None:
        raise ConfigError("initial: 'run' needs an initial velocity 'u' (use 'lift' for rho_dot)")
    grid = cfg.grid
    state0 = State(0.0, cfg.rho.evaluate(grid), cfg.u.evaluate(grid), grid)
    traj = simulate(cfg.model.spec, state0, cfg.time.t_end, cfg.time.dt, cfg.time.form,
                    cfg.time.snapshot_every)
    return _finish(cfg, traj, "run", env)


def cmd_lift(cfg: RunConfig, env) -> int:
    if cfg.rho_dot is None:
        raise ConfigError("initial: 'lift' needs an initial density velocity 'rho_dot'")
    grid = cfg.grid
    path = density_geodesic(cfg.model.spec, grid, cfg.rho.evaluate(grid), cfg.rho_dot.evaluate(grid),
                            cfg.time.t_end, cfg.time.dt, form=cfg.time.form,
                            snapshot_every=cfg.time.snapshot_every)
    return _finish(cfg, path.trajectory, "lift", env)


def _finish(cfg: RunConfig, traj: Trajectory, command: str, env) -> int:
    out = _out_dir(cfg, env)
    write_outputs(out, cfg, traj, command)
    print(f"{command}: {traj.termination.value} at t={traj.states[-1].time!r}; outputs in {out}")
    if traj.termination is Termination.COMPLETED:
        return EXIT_OK
    print(f"  {traj.detail}", file=sys.stderr)
    return EXIT_TERMINATED


def cmd_verify(suite: str) -> int:
    from .verify import run_suite

    failed = 0
    for check in run_suite(suite):
        print(check.line(), flush=True)
        failed += not check.passed
    print(f"{suite}: {'all checks passed' if not failed else f'{failed} check(s) failed'}")
    return EXIT_OK if not failed else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    ap = argparse.ArgumentParser(prog="semiflow", description="Geodesic flows of semi-invariant metrics on the circle")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="integrate from an initial density and velocity")
    p.add_argument("config", help="JSON run configuration")
    p = sub.add_parser("lift", help="density geodesic through its horizontal lift")
    p.add_argument("config", help="JSON run configuration with initial.rho_dot")
    p = sub.add_parser("verify", help="run acceptance checks")
    p.add_argument("suite", choices=SUITES)
    sub.add_parser("presets", help="list preset model names")
    return ap


def main(argv=None, env=None) -> int:
    args = build_parser().parse_args(argv)
    env = os.environ if env is None else env
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        print("\n".join(PRESET_NAMES))
        return EXIT_OK
    if args.command == "verify":
        return cmd_verify(args.suite)
    try:
        cfg = _load(args.config)
        return (cmd_run if args.command == "run" else cmd_lift)(cfg, env)
    except (ConfigError, GridError, InertiaError, IndefiniteOperatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
