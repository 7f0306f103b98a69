"""Scenario description, JSON loading and validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .controller import CommGraph, ControllerParams
from .errors import ValidationError
from .machine import OMEGA_B_60HZ, GeneratorParams
from .network import Line, LoadAdmittance, build_admittance, generator_shunts

CONTROLLER_ACTIVATE = "controller_activate"
LOAD_ADD = "load_add"
LOAD_REMOVE = "load_remove"


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    bus: int = None
    P: float = 0.0
    Q: float = 0.0
    id: str = None
    ref: str = None


@dataclass(frozen=True)
class PowerSystem:
    n_bus: int
    lines: tuple
    loads: tuple
    gen_buses: tuple
    gen_params: tuple
    dispatch: tuple
    bus_names: tuple = ()

    @property
    def n_gen(self):
        return len(self.gen_buses)

    def admittance(self, loads=None, with_generator_shunts=False):
        loads = self.loads if loads is None else loads
        shunts = generator_shunts(self.gen_buses, self.gen_params) if with_generator_shunts else ()
        return build_admittance(self.lines, loads, shunts, n_bus=self.n_bus)


@dataclass(frozen=True)
class Scenario:
    system: PowerSystem
    controller: ControllerParams
    graph: CommGraph
    events: tuple = ()
    t_end: float = 900.0
    dt: float = 1e-3
    record_every: int = 100
    name: str = ""
    defaults_applied: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.t_end > 0:
            raise ValidationError("t_end must be positive")
        if self.record_every < 1:
            raise ValidationError("record_every must be at least 1")
        if self.controller.n != self.system.n_gen or self.graph.n != self.system.n_gen:
            raise ValidationError("controller, graph and generator counts differ")
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValidationError("events must be sorted by time")
        ids = set()
        for e in self.events:
            if not 0 <= e.time <= self.t_end:
                raise ValidationError(f"event at t={e.time} lies outside [0, t_end]")
            self.step_of(e.time)
            if e.kind == LOAD_ADD:
                if not 0 <= e.bus < self.system.n_bus:
                    raise ValidationError(f"load event refers to bus {e.bus} outside [0, {self.system.n_bus})")
                if e.id is not None:
                    ids.add(e.id)
            elif e.kind == LOAD_REMOVE:
                if e.ref not in ids:
                    raise ValidationError(f"load_remove refers to unknown load '{e.ref}'")
            elif e.kind != CONTROLLER_ACTIVATE:
                raise ValidationError(f"unknown event kind '{e.kind}'")
        self.step_of(self.t_end)

    def step_of(self, t):
        """Integer step index of time ``t``; ``dt`` must divide it."""
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"time {t} is not a multiple of dt={self.dt}")
        return k

    @property
    def n_steps(self):
        return self.step_of(self.t_end)


def schema():
    text = resources.files("bicsim").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def default_scenario_path():
    return resources.files("bicsim").joinpath("data/ten_bus_four_machine.json")


def _format_path(error):
    path = "/".join(str(p) for p in error.absolute_path)
    return path or "<root>"


def validate_document(doc):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_format_path(e)}: {e.message}" for e in errors]
        raise ValidationError("scenario does not match schema:\n  " + "\n  ".join(lines))


def _vector(doc, name, n):
    value = doc[name]
    if isinstance(value, (int, float)):
        return np.full(n, float(value))
    if len(value) != n:
        raise ValidationError(f"controller.{name} must have {n} entries, got {len(value)}")
    return np.array(value, dtype=float)


def scenario_from_dict(doc):
    """Build a validated :class:`Scenario` from a parsed JSON document."""
    validate_document(doc)
    defaults = []
    base = doc.get("base", {})
    omega_b = base.get("omega_b")
    if omega_b is None:
        omega_b = OMEGA_B_60HZ
        defaults.append(f"base.omega_b = {omega_b}")
    omega_s = base.get("omega_s")
    if omega_s is None:
        omega_s = 1.0
        defaults.append("base.omega_s = 1.0")

    buses = doc["buses"]
    n_bus = len(buses)
    lines = tuple(Line(ln["from"], ln["to"], ln["r"], ln["x"], ln.get("b", 0.0)) for ln in doc["lines"])
    loads = tuple(LoadAdmittance(ld["bus"], complex(ld["g"], ld["b"])) for ld in doc.get("loads", []))

    gen_buses, gen_params, dispatch = [], [], []
    for i, g in enumerate(doc["generators"]):
        try:
            gen_params.append(GeneratorParams(
                H=g["H"], D=g["D"], T_d0_prime=g["T_d0_prime"], X_d=g["X_d"],
                X_d_prime=g["X_d_prime"], X_q_prime=g["X_q_prime"], r_a=g["r_a"],
                omega_b=omega_b, omega_s=omega_s))
        except ValidationError as exc:
            raise ValidationError(f"generators/{i}: {exc}") from None
        gen_buses.append(g["bus"])
        dispatch.append({"type": g["dispatch"]["type"], "V": g["dispatch"]["V"],
                         "P": g["dispatch"].get("P", 0.0)})
    if len(set(gen_buses)) != len(gen_buses):
        raise ValidationError("at most one generator per bus")
    if [d["type"] for d in dispatch].count("slack") != 1:
        raise ValidationError("exactly one generator must have dispatch type 'slack'")
    for b in [ln.from_bus for ln in lines] + [ln.to_bus for ln in lines] + \
            [ld.bus for ld in loads] + gen_buses:
        if not 0 <= b < n_bus:
            raise ValidationError(f"bus index {b} outside [0, {n_bus})")

    system = PowerSystem(n_bus, lines, loads, tuple(gen_buses), tuple(gen_params),
                         tuple(dispatch), tuple(b.get("name", str(i)) for i, b in enumerate(buses)))

    c = doc["controller"]
    n = len(gen_buses)
    vectors = {}
    for name in ("n_gains", "m_gains", "dT_max", "dT_min", "dE_max", "dE_min"):
        vectors[name] = _vector(c, name, n)
        bad = np.flatnonzero(~(vectors[name] > 0))
        if bad.size:
            raise ValidationError(
                f"controller.{name}[{bad[0]}] = {vectors[name][bad[0]]}: limit offsets and sharing "
                "gains must be strictly positive")
    params = ControllerParams(k_T=c["k_T"], k_P=c["k_P"], k_E=c["k_E"], k=c["k"],
                              omega_s=omega_s, **vectors)
    graph = CommGraph(np.array(c["adjacency"], dtype=float))

    events = tuple(Event(time=e["time"], kind=e["kind"], bus=e.get("bus"), P=e.get("P", 0.0),
                         Q=e.get("Q", 0.0), id=e.get("id"), ref=e.get("ref"))
                   for e in doc.get("events", []))
    sim = doc["simulation"]
    for key, value in (("dt", 1e-3), ("record_every", 100)):
        if key not in sim:
            defaults.append(f"simulation.{key} = {value}")
    return Scenario(system=system, controller=params, graph=graph, events=events,
                    t_end=sim["t_end"], dt=sim.get("dt", 1e-3),
                    record_every=sim.get("record_every", 100), name=doc.get("name", ""),
                    defaults_applied=tuple(defaults))


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    return scenario_from_dict(doc)


def load_default_scenario():
    with resources.as_file(default_scenario_path()) as p:
        return load_scenario(p)
