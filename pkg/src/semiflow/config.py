"""JSON run configuration: parsing, validation, defaults and round trip.

Schema (every key optional unless marked)::

    {
      "grid":    {"n": 256, "length": 6.283185307179586},
      "model":   {"preset": "burgers"}                               # required, one of
                 {"preset": "compressible_euler", "internal_energy": [[c, p], ...]}
                 {"custom": {"k": 1, "terms": [[i, c, p], ...],
                             "potential": {"variant": "quadratic", "c": 1.0}}},
      "initial": {"rho": EXPR, "u": EXPR}                            # required, one of
                 {"rho": EXPR, "rho_dot": EXPR},
      "time":    {"t_end": 1.0, "dt": 0.001, "form": "momentum", "snapshot_every": 100},
      "output":  {"directory": "semiflow_out", "write_fields": true}
    }

An EXPR is a number or a list of terms, each one of::

    {"type": "const", "amp": a}                       a
    {"type": "sin", "amp": a, "k": k, "phase": f}     a sin(2 pi k x / L + f)
    {"type": "cos", "amp": a, "k": k, "phase": f}     a cos(2 pi k x / L + f)
    {"type": "exp_sin", "amp": a, "rate": r, "k": k} a exp(r sin(2 pi k x / L))
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import TWO_PI, Grid, GridError
from .inertia import CoefficientSet, ModelSpec
from .polynomial import InertiaError, Polynomial
from .potential import InternalEnergy, Quadratic, Zero
from .presets import PRESET_NAMES, make_preset


class ConfigError(ValueError):
    pass


TERM_KEYS = {
    "const": {"amp"},
    "sin": {"amp", "k", "phase"},
    "cos": {"amp", "k", "phase"},
    "exp_sin": {"amp", "rate", "k"},
}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}" if path else msg)


def _obj(value, path: str, allowed: set[str], required: tuple[str, ...] = ()) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    unknown = sorted(set(value) - allowed)
    if unknown:
        _fail(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")
    for key in required:
        if key not in value:
            _fail(f"{path}.{key}" if path else key, "missing required key")
    return value


def _num(value, path: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    value = float(value)
    if not math.isfinite(value):
        _fail(path, "must be finite")
    if positive and not value > 0:
        _fail(path, "must be positive")
    if nonneg and value < 0:
        _fail(path, "must be nonnegative")
    return value


def _int(value, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            _fail(path, "expected an integer")
    if minimum is not None and value < minimum:
        _fail(path, f"must be at least {minimum}")
    return int(value)


# -- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    kind: str
    amp: float
    k: float = 0.0
    phase: float = 0.0
    rate: float = 0.0

    def to_dict(self) -> dict:
        out = {"type": self.kind, "amp": self.amp}
        if self.kind in ("sin", "cos"):
            out.update(k=self.k, phase=self.phase)
        elif self.kind == "exp_sin":
            out.update(rate=self.rate, k=self.k)
        return out


@dataclass(frozen=True)
class Expression:
    terms: tuple[Term, ...]

    def evaluate(self, grid: Grid) -> np.ndarray:
        theta = TWO_PI * grid.nodes / grid.length
        out = np.zeros(grid.n_points)
        for t in self.terms:
            if t.kind == "const":
                out = out + t.amp
            elif t.kind == "sin":
                out = out + t.amp * np.sin(t.k * theta + t.phase)
            elif t.kind == "cos":
                out = out + t.amp * np.cos(t.k * theta + t.phase)
            else:
                out = out + t.amp * np.exp(t.rate * np.sin(t.k * theta))
        return out

    def to_list(self) -> list[dict]:
        return [t.to_dict() for t in self.terms]


def parse_expression(value, path: str) -> Expression:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Expression((Term("const", _num(value, path)),))
    if not isinstance(value, list):
        _fail(path, "expected a number or a list of terms")
    terms = []
    for j, item in enumerate(value):
        p = f"{path}[{j}]"
        if not isinstance(item, dict) or "type" not in item:
            _fail(p, "term needs a 'type'")
        kind = item["type"]
        if kind not in TERM_KEYS:
            _fail(f"{p}.type", f"unknown term type {kind!r}")
        keys = TERM_KEYS[kind]
        _obj(item, p, keys | {"type"}, ("amp",))
        # unused parameters stay at zero so equal expressions compare equal
        terms.append(Term(
            kind,
            _num(item["amp"], f"{p}.amp"),
            k=_num(item.get("k", 1.0), f"{p}.k") if "k" in keys else 0.0,
            phase=_num(item.get("phase", 0.0), f"{p}.phase") if "phase" in keys else 0.0,
            rate=_num(item.get("rate", 1.0), f"{p}.rate") if "rate" in keys else 0.0,
        ))
    return Expression(tuple(terms))


# -- model ------------------------------------------------------------------

def _poly_terms(value, path: str) -> list[tuple[float, int]]:
    if not isinstance(value, list):
        _fail(path, "expected a list of [c, power] pairs")
    out = []
    for j, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(f"{path}[{j}]", "expected [c, power]")
        out.append((_num(pair[0], f"{path}[{j}][0]", nonneg=True),
                    _int(pair[1], f"{path}[{j}][1]", minimum=0)))
    return out


def _parse_potential(value, path: str):
    if not isinstance(value, dict) or "variant" not in value:
        _fail(path, "potential needs a 'variant'")
    variant = value["variant"]
    if variant == "zero":
        _obj(value, path, {"variant"})
        return Zero()
    if variant == "quadratic":
        _obj(value, path, {"variant", "c"})
        return Quadratic(_num(value.get("c", 1.0), f"{path}.c", nonneg=True))
    if variant == "internal_energy":
        _obj(value, path, {"variant", "e"}, ("e",))
        return InternalEnergy(Polynomial(tuple(_poly_terms(value["e"], f"{path}.e"))))
    _fail(f"{path}.variant", f"unknown potential variant {variant!r}")


@dataclass(frozen=True)
class ModelConfig:
    spec: ModelSpec
    preset: str | None = None
    internal_energy: Polynomial | None = None

    def to_dict(self) -> dict:
        if self.preset is not None:
            out = {"preset": self.preset}
            if self.internal_energy is not None:
                out["internal_energy"] = self.internal_energy.to_list()
            return out
        return {"custom": {
            "k": self.spec.order,
            "terms": self.spec.coefficients.to_terms(),
            "potential": self.spec.potential.to_dict(),
        }}


def parse_model(value, path: str = "model") -> ModelConfig:
    _obj(value, path, {"preset", "internal_energy", "custom"})
    if ("preset" in value) == ("custom" in value):
        _fail(path, "give exactly one of 'preset' or 'custom'")
    if "preset" in value:
        name = value["preset"]
        if name not in PRESET_NAMES:
            _fail(f"{path}.preset", f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
        energy = None
        if "internal_energy" in value:
            if name != "compressible_euler":
                _fail(f"{path}.internal_energy", "only valid with preset compressible_euler")
            energy = Polynomial(tuple(_poly_terms(value["internal_energy"], f"{path}.internal_energy")))
        return ModelConfig(make_preset(name, energy), name, energy)
    if "internal_energy" in value:
        _fail(f"{path}.internal_energy", "only valid with preset compressible_euler")

    cpath = f"{path}.custom"
    custom = _obj(value["custom"], cpath, {"k", "terms", "potential"}, ("k", "terms"))
    k = _int(custom["k"], f"{cpath}.k", minimum=0)
    if not isinstance(custom["terms"], list):
        _fail(f"{cpath}.terms", "expected a list of [i, c, power] triples")
    triples = []
    for j, t in enumerate(custom["terms"]):
        p = f"{cpath}.terms[{j}]"
        if not isinstance(t, list) or len(t) != 3:
            _fail(p, "expected [i, c, power]")
        i = _int(t[0], f"{p}[0]", minimum=0)
        if i > k:
            _fail(f"{p}[0]", f"index {i} exceeds k = {k}")
        triples.append((i, _num(t[1], f"{p}[1]", nonneg=True), _int(t[2], f"{p}[2]", minimum=0)))
    if not any(i == 0 and c > 0 for i, c, _ in triples):
        _fail(f"{cpath}.terms", "a0 must be positive")
    potential = _parse_potential(custom.get("potential", {"variant": "zero"}), f"{cpath}.potential")
    try:
        coeffs = CoefficientSet.from_terms(k, triples)
    except InertiaError as exc:
        _fail(f"{cpath}.terms", str(exc))
    return ModelConfig(ModelSpec(coeffs, potential, "custom"))


# -- full run config --------------------------------------------------------

@dataclass(frozen=True)
class TimeConfig:
    t_end: float = 1.0
    dt: float = 1e-3
    form: str = "momentum"
    snapshot_every: int = 100


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "semiflow_out"
    write_fields: bool = True


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    model: ModelConfig
    rho: Expression
    u: Expression | None = None
    rho_dot: Expression | None = None
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        initial = {"rho": self.rho.to_list()}
        if self.u is not None:
            initial["u"] = self.u.to_list()
        if self.rho_dot is not None:
            initial["rho_dot"] = self.rho_dot.to_list()
        return {
            "grid": {"n": self.grid.n_points, "length": self.grid.length},
            "model": self.model.to_dict(),
            "initial": initial,
            "time": {
                "t_end": self.time.t_end, "dt": self.time.dt,
                "form": self.time.form, "snapshot_every": self.time.snapshot_every,
            },
            "output": {"directory": self.output.directory, "write_fields": self.output.write_fields},
        }


def config_from_dict(data) -> RunConfig:
    _obj(data, "", {"grid", "model", "initial", "time", "output"}, ("model", "initial"))

    g = _obj(data.get("grid", {}), "grid", {"n", "length"})
    try:
        grid = Grid(_int(g.get("n", 256), "grid.n"), _num(g.get("length", TWO_PI), "grid.length", positive=True))
    except GridError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    model = parse_model(data["model"])

    ini = _obj(data["initial"], "initial", {"rho", "u", "rho_dot"})
    if ("u" in ini) == ("rho_dot" in ini):
        _fail("initial", "give exactly one of 'u' or 'rho_dot'")
    rho = parse_expression(ini.get("rho", 1.0), "initial.rho")
    rho_vals = rho.evaluate(grid)
    if not np.all(np.isfinite(rho_vals)) or np.min(rho_vals) <= 0:
        _fail("initial.rho", "density must be strictly positive")
    u = parse_expression(ini["u"], "initial.u") if "u" in ini else None
    rho_dot = parse_expression(ini["rho_dot"], "initial.rho_dot") if "rho_dot" in ini else None

    t = _obj(data.get("time", {}), "time", {"t_end", "dt", "form", "snapshot_every"})
    form = t.get("form", "momentum")
    if form not in ("momentum", "velocity"):
        _fail("time.form", "must be 'momentum' or 'velocity'")
    time = TimeConfig(
        t_end=_num(t.get("t_end", 1.0), "time.t_end", positive=True),
        dt=_num(t.get("dt", 1e-3), "time.dt", positive=True),
        form=form,
        snapshot_every=_int(t.get("snapshot_every", 100), "time.snapshot_every", minimum=1),
    )

    o = _obj(data.get("output", {}), "output", {"directory", "write_fields"})
    directory = o.get("directory", "semiflow_out")
    if not isinstance(directory, str) or not directory:
        _fail("output.directory", "expected a non-empty string")
    write_fields = o.get("write_fields", True)
    if not isinstance(write_fields, bool):
        _fail("output.write_fields", "expected true or false")

    return RunConfig(grid, model, rho, u, rho_dot, time, OutputConfig(directory, write_fields))


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)
