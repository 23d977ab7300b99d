"""Scenario files: a flat, typed TOML schema and its writer.

Every setting lives under a dotted key such as ``grid.Nt`` or
``particle.a.velocity``; nested tables are flattened before validation, so
``[grid]`` tables and dotted keys are interchangeable. Validation collects
every problem instead of stopping at the first, and each problem carries a
code and the offending key path.
"""
from __future__ import annotations

import json
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from . import flow as fl
from . import hamiltonians as hm
from .spectral import DEFAULT_R, TorusGrid, SpectralState, dft_forward, FieldState

__all__ = [
    "E_SYNTAX",
    "E_UNKNOWN_KEY",
    "E_TYPE",
    "E_RANGE",
    "E_MISSING",
    "E_CONFLICT",
    "Violation",
    "ScenarioError",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "builtin_names",
]

E_SYNTAX = "E_SYNTAX"
E_UNKNOWN_KEY = "E_UNKNOWN_KEY"
E_TYPE = "E_TYPE"
E_RANGE = "E_RANGE"
E_MISSING = "E_MISSING"
E_CONFLICT = "E_CONFLICT"


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def _positive(x):
    return x > 0


def _even_positive(x):
    return x > 0 and x % 2 == 0


def _nonneg(x):
    return x >= 0


def _unit(x):
    return 0.0 <= x <= 1.0


def _u64(x):
    return 0 <= x < 2**64


def _one_of(*opts):
    return lambda x: x in opts


def _radius(x):
    return 0.0 < x < math.pi


def _speed(x):
    return abs(x) < 1.0


def _pair(x):
    return len(x) == 2


# key -> (type, default, range check, range description); default None means optional
_SCHEMA: dict[str, tuple[type, object, object, str]] = {
    "name": (str, None, None, ""),
    "description": (str, "", None, ""),
    "grid.R": (float, None, _positive, "R > 0"),
    "grid.T": (float, None, _positive, "T > 0"),
    "grid.Nt": (int, 64, _even_positive, "even and positive"),
    "grid.Nx": (int, 64, _even_positive, "even and positive"),
    "hamiltonian.kind": (str, "bridges_free", _one_of(*hm.KINDS), f"one of {hm.KINDS}"),
    "hamiltonian.components": (int, None, _one_of(3, 4), "3 or 4"),
    "hamiltonian.mass": (float, 0.0, None, ""),
    "initial.recipe": (str, "random_mean_zero", _one_of(*fl.RECIPES), f"one of {fl.RECIPES}"),
    "initial.seed": (int, 0, _u64, "an unsigned 64-bit integer"),
    "initial.amplitude": (float, 1.0, None, ""),
    "initial.band": (int, None, _positive, "positive"),
    "initial.wave_mode": (list, [1, 1], _pair, "a pair [m, k]"),
    "initial.file": (str, None, None, ""),
    "flow.ds": (float, 0.01, _positive, "ds > 0"),
    "flow.s_max": (float, 50.0, _nonneg, "s_max >= 0"),
    "flow.integrator": (str, "exact_linear", _one_of(*fl.INTEGRATORS), f"one of {fl.INTEGRATORS}"),
    "flow.epsilon": (float, 1.0, _unit, "0 <= epsilon <= 1"),
    "flow.stable_projection": (bool, True, None, ""),
    "flow.record_stride": (int, 10, _positive, "positive"),
    "flow.track_slowest": (bool, False, None, ""),
    "flow.limit": (str, "none", _one_of("none", "asymptotic"), "none or asymptotic"),
    "mollifier.radius": (float, math.pi / 4, _radius, "0 < r < pi"),
    "potential.mu": (float, 0.5, _nonneg, "mu >= 0"),
    "verify.N": (int, 64, _positive, "positive"),
    "verify.h": (float, 3.5, _positive, "positive"),
    "verify.admissibility_N": (int, 256, _positive, "positive"),
    "spectrum.N": (int, 8, _positive, "positive"),
    "outputs.formats": (list, ["csv", "jsonl"], lambda x: set(x) <= {"csv", "jsonl"}, "csv and/or jsonl"),
}

_PARTICLE_FIELDS: dict[str, tuple[type, object, object, str]] = {
    "rest": (float, 0.0, None, ""),
    "offset": (float, 0.0, None, ""),
    "rate": (float, 1.0, _positive, "rate > 0"),
    "amplitude": (float, 0.0, None, ""),
    "harmonic": (int, 1, _positive, "positive"),
    "velocity": (float, 0.0, _speed, "|v| < 1"),
    "windings": (int, 1, _positive, "positive"),
}

_PARTICLE_KEY = re.compile(r"^particle\.([A-Za-z0-9_]+)\.([A-Za-z_]+)$")


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        path = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, path + "."))
        else:
            out[path] = v
    return out


def _coerce(path: str, value, typ: type, problems: list[Violation]):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(Violation(E_TYPE, path, f"expected a number, got {type(value).__name__}"))
            return None
        value = float(value)
        if not math.isfinite(value):
            problems.append(Violation(E_RANGE, path, "must be finite"))
            return None
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(Violation(E_TYPE, path, f"expected an integer, got {type(value).__name__}"))
            return None
        return value
    if typ is list:
        if not isinstance(value, list):
            problems.append(Violation(E_TYPE, path, f"expected an array, got {type(value).__name__}"))
            return None
        return list(value)
    if not isinstance(value, typ):
        problems.append(Violation(E_TYPE, path, f"expected {typ.__name__}, got {type(value).__name__}"))
        return None
    return value


def _check(path, raw, entry, problems):
    typ, _, ok, desc = entry
    value = _coerce(path, raw, typ, problems)
    if value is None:
        return None
    if ok is not None and not ok(value):
        problems.append(Violation(E_RANGE, path, f"value {raw!r} out of range ({desc})"))
        return None
    return value


@dataclass
class Scenario:
    """A validated, fully defaulted experiment description."""

    values: dict = field(default_factory=dict)
    particles: dict[str, dict] = field(default_factory=dict)
    source: Path | None = None

    @property
    def name(self) -> str:
        return self.values["name"]

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Scenario)
            and self.values == other.values
            and self.particles == other.particles
        )

    # -- construction of numerical objects --

    @property
    def R(self) -> float:
        if self.values.get("grid.T") is not None:
            return 2.0 * math.pi / self.values["grid.T"]
        return self.values["grid.R"] if self.values.get("grid.R") is not None else DEFAULT_R

    def grid(self) -> TorusGrid:
        T = self.values.get("grid.T") or 2.0 * math.pi / self.R
        return TorusGrid(T, self["grid.Nt"], self["grid.Nx"])

    def spec(self) -> hm.HamiltonianSpec:
        g = self.grid()
        paths = tuple(hm.ParticlePath(**self.particles[k]) for k in sorted(self.particles))
        return hm.HamiltonianSpec(
            kind=self["hamiltonian.kind"],
            components=self.values.get("hamiltonian.components"),
            mass=self["hamiltonian.mass"],
            mollifier=hm.Mollifier(self["mollifier.radius"]),
            potential=hm.Potential(self["potential.mu"], g.T),
            particles=paths,
        )

    def config(self) -> fl.FlowConfig:
        return fl.FlowConfig(
            ds=self["flow.ds"],
            s_max=self["flow.s_max"],
            integrator=self["flow.integrator"],
            epsilon=self["flow.epsilon"],
            stable_projection=self["flow.stable_projection"],
            record_stride=self["flow.record_stride"],
        )

    def initial(self) -> SpectralState:
        spec = self.spec()
        file = self.values.get("initial.file")
        if file is not None and self.source is not None and not Path(file).is_absolute():
            file = str(self.source.parent / file)
        return fl.initial_data(
            self["initial.recipe"],
            self.grid(),
            spec.components,
            seed=self["initial.seed"],
            amplitude=self["initial.amplitude"],
            band=self.values.get("initial.band"),
            wave_mode=tuple(self["initial.wave_mode"]),
            mass=self["hamiltonian.mass"],
            path=file,
        )

    def limiting_source(self) -> SpectralState:
        g = self.grid()
        return dft_forward(FieldState(g, hm.source_field(self.spec(), g, math.inf)))

    def problem(self) -> fl.FlowProblem:
        g = self.grid()
        spec = self.spec()
        for name in sorted(self.particles):
            path = hm.ParticlePath(**self.particles[name])
            if not path.compatible(g.T):
                raise ScenarioError([
                    Violation(
                        E_RANGE,
                        f"particle.{name}.velocity",
                        "boost is not commensurate with the torus; "
                        f"seam jump {hm.periodicity_defect(hm.HamiltonianSpec('coupled', particles=(path,)), g):.3e}",
                    )
                ])
        initial = self.initial()
        cfg = self.config()
        limit = None
        if self["flow.limit"] == "asymptotic":
            limit = fl.asymptotic_limit(self.limiting_source(), spec)
        if self["flow.track_slowest"]:
            system = fl.ModeSystem(g, spec, cfg.epsilon)
            start = fl.stable_projection(initial, system) if cfg.stable_projection else initial
            mk, _ = fl.slowest_occupied_mode(start, system)
            cfg = fl.FlowConfig(**{**cfg.__dict__, "track_modes": (mk,)})
        return fl.FlowProblem(g, spec, initial, cfg, limit)

    # -- serialisation --

    def with_overrides(self, **flat) -> "Scenario":
        """Copy with dotted-key overrides, revalidated."""
        vals = {k: v for k, v in self.values.items() if v is not None}
        for name, fields in self.particles.items():
            for f, v in fields.items():
                vals[f"particle.{name}.{f}"] = v
        vals.update({k: v for k, v in flat.items() if v is not None})
        if "grid.T" in flat and flat["grid.T"] is not None:
            vals.pop("grid.R", None)
        sc = _validate(vals)
        sc.source = self.source
        return sc

    def to_toml(self) -> str:
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if v is None:
                continue
            lines.append(f"{key} = {_toml_value(v)}")
        for name in sorted(self.particles):
            for f in sorted(self.particles[name]):
                lines.append(f"particle.{name}.{f} = {_toml_value(self.particles[name][f])}")
        return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            raise ValueError("non-finite values are not representable")
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to a scenario file")


def _validate(flat: dict) -> Scenario:
    problems: list[Violation] = []
    values: dict = {}
    particles: dict[str, dict] = {}
    for path, raw in flat.items():
        m = _PARTICLE_KEY.match(path)
        if m:
            name, f = m.groups()
            entry = _PARTICLE_FIELDS.get(f)
            if entry is None:
                problems.append(Violation(E_UNKNOWN_KEY, path, f"unknown particle field {f!r}"))
                continue
            v = _check(path, raw, entry, problems)
            if v is not None:
                particles.setdefault(name, {})[f] = v
            continue
        entry = _SCHEMA.get(path)
        if entry is None:
            problems.append(Violation(E_UNKNOWN_KEY, path, "not part of the scenario schema"))
            continue
        v = _check(path, raw, entry, problems)
        if v is not None:
            values[path] = v
    for path, (typ, default, _, _) in _SCHEMA.items():
        if path not in values and not any(p.path == path for p in problems):
            values[path] = list(default) if isinstance(default, list) else default
    if values.get("name") is None and not any(p.path == "name" for p in problems):
        problems.append(Violation(E_MISSING, "name", "every scenario needs a name"))
    if values.get("grid.R") is not None and values.get("grid.T") is not None:
        problems.append(Violation(E_CONFLICT, "grid.T", "give either grid.R or grid.T, not both"))
    for name, fields in particles.items():
        for f, (_, default, _, _) in _PARTICLE_FIELDS.items():
            fields.setdefault(f, default)
        if fields["velocity"] != 0.0 and fields["amplitude"] != 0.0:
            problems.append(
                Violation(E_RANGE, f"particle.{name}.amplitude", "boosted particles must be at rest in their frame")
            )
    if particles and values.get("hamiltonian.kind") not in (None, "coupled"):
        problems.append(Violation(E_CONFLICT, "hamiltonian.kind", "particles need the coupled Hamiltonian"))
    if values.get("initial.recipe") == "custom" and values.get("initial.file") is None:
        problems.append(Violation(E_MISSING, "initial.file", "custom initial data needs a coefficient file"))
    if problems:
        raise ScenarioError(problems)
    return Scenario(values, particles)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; raises :class:`ScenarioError` listing every violation."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([Violation(E_SYNTAX, "<document>", str(exc))]) from None
    return _validate(_flatten(data))


def builtin_names() -> list[str]:
    root = resources.files("polyfloer") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a path, or a shipped one by bare name (e.g. ``counterexample``)."""
    path = Path(ref)
    if path.suffix != ".toml" and not path.exists():
        if str(ref) not in builtin_names():
            raise FileNotFoundError(f"no scenario file or built-in scenario named {ref!r}")
        text = (resources.files("polyfloer") / "scenarios" / f"{ref}.toml").read_text()
        return parse_scenario(text)
    sc = parse_scenario(path.read_text())
    sc.source = path
    return sc
