"""Acceptance checks shared by ``semiflow verify`` and the test-suite.

Every check returns ``Check`` records (name, measured value, threshold,
verdict).  Random inputs come from fixed seeds so reports are repeatable.
"""
from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .density import (
    apply_Abar_inv,
    density_geodesic,
    horizontal_lift,
    induced_metric,
    solve_Abar,
)
from .dynamics import State, Termination, pushforward_density, reconstruct_flow, simulate
from .grid import Grid, make_grid
from .inertia import (
    CoefficientSet,
    ModelSpec,
    apply_A,
    apply_Aprime,
    aprime_star,
    assemble_A,
)
from .polynomial import Polynomial
from .presets import (
    PRESET_NAMES,
    burgers_characteristics,
    displacement_density,
    linearized_matrix,
    make_preset,
    mode_frequencies,
)

SUITES = ("adjoint", "conservation", "burgers", "dispersion", "density", "all")


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name}: {self.value:.3e} {self.relation} {self.threshold:.3e}"


def at_most(name: str, value: float, threshold: float) -> Check:
    value = float(value)
    return Check(name, value, threshold, bool(math.isfinite(value) and value <= threshold))


def at_least(name: str, value: float, threshold: float) -> Check:
    value = float(value)
    return Check(name, value, threshold, bool(math.isfinite(value) and value >= threshold), ">=")


def within(name: str, value: float, lo: float, hi: float) -> Check:
    value = float(value)
    ok = bool(math.isfinite(value) and lo <= value <= hi)
    return Check(f"{name} in [{lo:g}, {hi:g}]", value, hi, ok, "~")


def sup(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# -- random inputs ------------------------------------------------------------

def smooth_field(rng: np.random.Generator, grid: Grid, modes: int = 6, scale: float = 1.0) -> np.ndarray:
    """Random trigonometric polynomial with decaying mode amplitudes."""
    x = 2.0 * np.pi * grid.nodes / grid.length
    out = np.zeros(grid.n_points)
    for j in range(modes + 1):
        a, b = rng.normal(size=2) * scale / (1.0 + j) ** 2
        out += a * np.cos(j * x) + b * np.sin(j * x)
    return out


def random_density(rng, grid: Grid, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    f = smooth_field(rng, grid)
    f = (f - f.min()) / (np.ptp(f) + 1e-300)
    return low + (high - low) * f


def random_model(rng, k: int) -> ModelSpec:
    # every coefficient gets a rho-dependent term so A' is exercised at every order
    polys = []
    for i in range(k + 1):
        powers = {int(rng.integers(1, 4))} | {int(p) for p in rng.choice(4, size=rng.integers(0, 3), replace=False)}
        polys.append(Polynomial(tuple((float(rng.uniform(0.1, 1.0)), int(p)) for p in sorted(powers))))
    return ModelSpec(CoefficientSet(tuple(polys)), label=f"random_k{k}")


# -- criterion groups -----------------------------------------------------------

def check_adjoint(samples: int = 100, n: int = 64, seed: int = 0) -> list[Check]:
    """``<A'(u, s), v> = <s, A'*(u, v)>`` on random models and fields.

    The residual is normalized by the Cauchy-Schwarz bound of both pairings.
    """
    rng = np.random.default_rng(seed)
    grid = make_grid(n)
    worst = 0.0
    for j in range(samples):
        model = random_model(rng, j % 4)
        rho = random_density(rng, grid)
        u, v, s = (smooth_field(rng, grid) for _ in range(3))
        lhs_f = apply_Aprime(model, grid, rho, u, s)
        rhs_f = aprime_star(model, grid, rho, u, v)
        lhs, rhs = grid.inner(lhs_f, v), grid.inner(s, rhs_f)
        scale = grid.norm(lhs_f) * grid.norm(v) + grid.norm(s) * grid.norm(rhs_f)
        worst = max(worst, abs(lhs - rhs) / scale if scale > 0 else abs(lhs - rhs))
    return [at_most(f"adjoint identity, {samples} random samples k=0..3", worst, 1e-10)]


def check_operator(n: int = 64, seed: int = 1) -> list[Check]:
    rng = np.random.default_rng(seed)
    grid = make_grid(n)
    out = []
    for name in PRESET_NAMES:
        model = make_preset(name)
        rho = random_density(rng, grid)
        mat = assemble_A(model, grid, rho)
        asym = np.max(np.abs(mat - mat.T)) / np.linalg.norm(mat, 2)
        out.append(at_most(f"{name}: max|A - A^T| / ||A||", asym, 1e-10))
        out.append(Check(f"{name}: min eigenvalue of A", float(np.linalg.eigvalsh(mat)[0]), 0.0,
                         bool(np.linalg.eigvalsh(mat)[0] > 0), ">"))
    return out


def check_burgers(n: int = 128, dt: float = 1e-3) -> list[Check]:
    grid = make_grid(n)
    x = grid.nodes
    model = make_preset("burgers")
    t0 = time.perf_counter()
    traj = simulate(model, State(0.0, np.ones(n), 0.1 * np.sin(x), grid), 1.0, dt, snapshot_every=1000)
    elapsed = time.perf_counter() - t0
    err = sup(traj.final.u, burgers_characteristics(grid, 0.1 * np.sin(x), 1.0))
    return [
        at_most("burgers u0=0.1 sin x vs characteristics at t=1", err, 1e-6),
        at_most("burgers run time [s]", elapsed, 5.0),
    ]


def check_burgers_family(n: int = 128, dt: float = 1e-3) -> list[Check]:
    grid = make_grid(n)
    x = grid.nodes
    model = make_preset("burgers")
    out = []
    data = {
        "0.1 cos x": 0.1 * np.cos(x),
        "0.1 sin 2x": 0.1 * np.sin(2 * x),
        "0.05 sin x + 0.05 cos 3x": 0.05 * np.sin(x) + 0.05 * np.cos(3 * x),
        "0.1 exp(sin x) - mean": 0.1 * (np.exp(np.sin(x)) - np.mean(np.exp(np.sin(x)))),
        "0.2 + 0.1 sin x": 0.2 + 0.1 * np.sin(x),
    }
    for label, u0 in data.items():
        traj = simulate(model, State(0.0, np.ones(n), u0, grid), 1.0, dt, snapshot_every=1000)
        err = sup(traj.final.u, burgers_characteristics(grid, u0, 1.0))
        out.append(at_most(f"burgers u0={label} vs characteristics", err, 1e-6))
    return out


def check_breaking(n: int = 256, dt: float = 1e-3) -> list[Check]:
    """Burgers past breaking must stop as blow-up before t = 1.2 and write no NaN."""
    from .cli import main as cli_main

    cfg = {
        "grid": {"n": n},
        "model": {"preset": "burgers"},
        "initial": {"rho": 1.0, "u": [{"type": "sin", "amp": 1.0, "k": 1}]},
        "time": {"t_end": 2.0, "dt": dt, "snapshot_every": 50},
    }
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "breaking.json"
        cfg["output"] = {"directory": str(Path(tmp) / "out"), "write_fields": True}
        path.write_text(json.dumps(cfg))
        code = cli_main(["run", str(path)], env={})
        meta = json.loads((Path(tmp) / "out" / "metadata.json").read_text())
        t_last = float(meta["final_time"])
        bad = 0
        for f in sorted((Path(tmp) / "out").glob("*.csv")):
            values = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
            bad += int(np.sum(~np.isfinite(values)))
        json.loads((Path(tmp) / "out" / "metadata.json").read_text(),
                   parse_constant=lambda c: (_ for _ in ()).throw(ValueError(c)))
    return [
        Check("burgers u0=sin x terminates as blowup_detected", float(code), 2.0,
              meta["termination"] == "blowup_detected" and code == 2, "=="),
        Check("last recorded time before 1.2", t_last, 1.2, t_last < 1.2, "<"),
        Check("NaN/inf tokens in written outputs", float(bad), 0.0, bad == 0, "=="),
    ]


CONSERVATION_PRESETS = ("epdiff_h1", "shallow_water", "sgn")


def conservation_initial(grid: Grid):
    x = grid.nodes
    return np.ones(grid.n_points), 0.1 * np.sin(x)


def energy_runs(n: int = 256, t_end: float = 10.0, dt: float = 1e-3) -> dict:
    """Energy and mass drift of each conservation preset at ``dt`` and ``dt/2``."""
    grid = make_grid(n)
    rho0, u0 = conservation_initial(grid)
    runs = {"dt": dt, "presets": {}}
    t0 = time.perf_counter()
    for name in CONSERVATION_PRESETS:
        model = make_preset(name)
        rec = {"energy": [], "mass": []}
        for h in (dt, dt / 2):
            traj = simulate(model, State(0.0, rho0, u0, grid), t_end, h, snapshot_every=int(round(0.1 / h)))
            ok = traj.termination is Termination.COMPLETED
            rec["energy"].append(traj.energy_drift() if ok else float("nan"))
            rec["mass"].append(traj.mass_drift() if ok else float("nan"))
        runs["presets"][name] = rec
    runs["elapsed"] = time.perf_counter() - t0
    return runs


def check_energy(runs: dict | None = None) -> list[Check]:
    runs = runs or energy_runs()
    dt = runs["dt"]
    out = []
    for name, rec in runs["presets"].items():
        d1, d2 = rec["energy"]
        out.append(at_most(f"{name}: relative energy drift, dt={dt:g}", d1, 1e-8))
        out.append(at_most(f"{name}: relative energy drift, dt={dt / 2:g}", d2, 1e-8))
        out.append(within(f"{name}: drift ratio dt vs dt/2", d1 / d2 if d2 > 0 else float("inf"), 12.0, 20.0))
    out.append(at_most("energy runs time [s]", runs["elapsed"], 120.0))
    return out


def check_mass(runs: dict | None = None) -> list[Check]:
    runs = runs or energy_runs()
    dt = runs["dt"]
    return [
        at_most(f"{name}: relative mass drift, dt={h:g}", m, 1e-12)
        for name, rec in runs["presets"].items()
        for h, m in zip((dt, dt / 2), rec["mass"])
    ]


def check_forms(n: int = 128, dt: float = 1e-3) -> list[Check]:
    grid = make_grid(n)
    x = grid.nodes
    rho0 = 1.0 + 0.1 * np.cos(x)
    u0 = 0.1 * np.sin(x) + 0.05 * np.cos(2 * x)
    out = []
    for name in ("epdiff_h1", "shallow_water"):
        model = make_preset(name)
        a = simulate(model, State(0.0, rho0, u0, grid), 1.0, dt, "momentum", snapshot_every=50)
        b = simulate(model, State(0.0, rho0, u0, grid), 1.0, dt, "velocity", snapshot_every=50)
        err = max(max(sup(p.rho, q.rho), sup(p.u, q.u)) for p, q in zip(a.states, b.states))
        ok = len(a.states) == len(b.states) == 21
        out.append(at_most(f"{name}: momentum vs velocity form over [0,1]", err if ok else float("nan"), 1e-8))
    return out


def check_shift(n: int = 128, dt: float = 1e-3, shift: int = 37) -> list[Check]:
    grid = make_grid(n)
    x = grid.nodes
    s0 = State(0.0, 1.0 + 0.1 * np.cos(x) + 0.05 * np.sin(3 * x), 0.1 * np.sin(x), grid)
    out = []
    for name in ("shallow_water", "sgn"):
        model = make_preset(name)
        a = simulate(model, s0, 1.0, dt, snapshot_every=250)
        b = simulate(model, s0.shifted(shift), 1.0, dt, snapshot_every=250)
        err = max(max(sup(p.shifted(shift).rho, q.rho), sup(p.shifted(shift).u, q.u))
                  for p, q in zip(a.states, b.states))
        out.append(at_most(f"{name}: lattice-shift equivariance, shift {shift}", err, 1e-10))
    return out


def measure_frequency(model: ModelSpec, grid: Grid, kappa: int, amp: float = 1e-4,
                      periods: float = 3.0, samples_per_period: int = 40, dt: float = 5e-3,
                      guess: float | None = None) -> float:
    """Angular frequency of a small standing wave ``rho = 1 + amp cos(kappa x)``."""
    x = grid.nodes
    guess = guess or float(kappa)
    t_end = periods * 2 * np.pi / guess
    steps = int(np.ceil(t_end / dt))
    every = max(1, steps // int(periods * samples_per_period))
    traj = simulate(model, State(0.0, 1.0 + amp * np.cos(kappa * x), np.zeros(grid.n_points), grid),
                    steps * dt, dt, snapshot_every=every)
    if traj.termination is not Termination.COMPLETED:
        raise RuntimeError(f"frequency run stopped early: {traj.detail}")
    t = traj.times
    basis = np.cos(kappa * x)
    signal = np.array([grid.inner(s.rho - 1.0, basis) for s in traj.states]) / grid.inner(basis, basis)

    def resid(q):
        a, b, w = q
        return a * np.cos(w * t) + b * np.sin(w * t) - signal

    # start from zero crossings so the fit does not inherit the oracle value
    idx = np.flatnonzero(np.sign(signal[:-1]) != np.sign(signal[1:]))
    if len(idx) < 2:
        raise ValueError("too few zero crossings to estimate a frequency")
    cross = t[idx] - signal[idx] * (t[idx + 1] - t[idx]) / (signal[idx + 1] - signal[idx])
    w0 = np.pi * (len(cross) - 1) / (cross[-1] - cross[0])
    fit = least_squares(resid, (signal[0], 0.0, w0), x_scale=(amp, amp, w0), xtol=1e-15, ftol=1e-15)
    return abs(float(fit.x[2]))


def check_dispersion(n: int = 32) -> list[Check]:
    grid = make_grid(n)
    out = []
    t0 = time.perf_counter()
    for name in ("shallow_water", "sgn"):
        model = make_preset(name)
        freqs = mode_frequencies(linearized_matrix(model, 1.0, grid), grid)
        for kappa in (1, 2, 3):
            omega_lin = float(np.max(np.abs(freqs[kappa].imag)))
            c2 = 1.0 if name == "shallow_water" else 1.0 / (1.0 + kappa ** 2 / 3.0)
            omega_theory = kappa * math.sqrt(c2)
            omega_sim = measure_frequency(model, grid, kappa, guess=omega_lin)
            out.append(at_most(f"{name} kappa={kappa}: simulated vs linearized frequency (rel)",
                               abs(omega_sim - omega_lin) / omega_lin, 1e-4))
            out.append(at_most(f"{name} kappa={kappa}: linearized vs closed-form frequency (rel)",
                               abs(omega_lin - omega_theory) / omega_theory, 1e-6))
    out.append(at_most("dispersion time [s]", time.perf_counter() - t0, 30.0))
    return out


def check_density(n: int = 64, seed: int = 2) -> list[Check]:
    grid = make_grid(n)
    x = grid.nodes
    one = np.ones(n)
    otto = make_preset("burgers")
    p = np.cos(x)
    out = [
        at_most("Otto: Abar^{-1} cos x = cos x", sup(apply_Abar_inv(otto, grid, one, p), p), 1e-10),
        at_most("Otto: solve_Abar(cos x) = cos x", sup(solve_Abar(otto, grid, one, p), p), 1e-10),
        at_most("Otto: metric(cos x, cos x) = pi", abs(induced_metric(otto, grid, one, p, p) - np.pi), 1e-10),
        at_most("Otto: lift of cos x = -sin x", sup(horizontal_lift(otto, grid, one, p), -np.sin(x)), 1e-10),
    ]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for j in range(20):
        model = random_model(rng, j % 2)
        rho = random_density(rng, grid)
        rho_dot = grid.deriv(smooth_field(rng, grid), 1)
        u = horizontal_lift(model, grid, rho, rho_dot)
        g_up = grid.inner(u, apply_A(model, grid, rho, u))
        g_down = induced_metric(model, grid, rho, rho_dot, rho_dot)
        worst = max(worst, abs(g_up - g_down) / abs(g_down))
    out.append(at_most("submersion G(lift, lift) = Gbar, random k=0,1 (rel)", worst, 1e-9))

    gridh = make_grid(128)
    xh = gridh.nodes
    rho0 = 1.0 + 0.2 * np.cos(xh)
    rho_dot0 = 0.1 * np.sin(xh) + 0.05 * np.cos(2 * xh)
    for name in ("burgers", "epdiff_h1", "shallow_water", "sgn"):
        path = density_geodesic(make_preset(name), gridh, rho0, rho_dot0, 1.0, 1e-3, snapshot_every=50)
        ok = path.trajectory.termination is Termination.COMPLETED
        out.append(at_most(f"{name}: max horizontality defect on lifted geodesic to t=1",
                           path.defects.max() if ok else float("nan"), 1e-8))

    p0 = 0.05 * np.cos(xh)
    rho_dot = apply_Abar_inv(otto, gridh, np.ones(128), p0)
    path = density_geodesic(otto, gridh, np.ones(128), rho_dot, 0.5, 1e-3, snapshot_every=50)
    err = max(sup(r, displacement_density(gridh, np.ones(128), gridh.deriv(p0, 1), t))
              for t, r in zip(path.times, path.rhos))
    out.append(at_most("Otto geodesic vs displacement oracle, t<=0.5", err, 1e-5))
    return out


def check_flow(n: int = 128, dt: float = 1e-3) -> list[Check]:
    grid = make_grid(n)
    x = grid.nodes
    rho0 = 1.0 + 0.1 * np.cos(x)
    traj = simulate(make_preset("shallow_water"), State(0.0, rho0, 0.1 * np.sin(x), grid),
                    1.0, dt, snapshot_every=10)
    flow = reconstruct_flow(traj)
    err = max(sup(pushforward_density(grid, rho0, flow.positions[i]), s.rho)
              for i, s in enumerate(traj.states))
    return [at_most("shallow_water: pushforward of rho0 vs rho(t), t<=1", err, 1e-6)]


def _energy_and_mass() -> list[Check]:
    runs = energy_runs()
    return check_energy(runs) + check_mass(runs)


def run_suite(suite: str) -> list[Check]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    groups = {
        "adjoint": (check_adjoint, check_operator),
        "conservation": (_energy_and_mass, check_forms, check_shift),
        "burgers": (check_burgers, check_burgers_family, check_breaking),
        "dispersion": (check_dispersion,),
        "density": (check_density, check_flow),
    }
    names = [s for s in SUITES[:-1]] if suite == "all" else [suite]
    out = []
    for name in names:
        for fn in groups[name]:
            out.extend(fn())
    return out
