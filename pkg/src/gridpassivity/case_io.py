"""Case and run-config files.

Both use the same line-oriented grammar (documented in ``docs/case_format.md``)::

    # comment
    [section]          anonymous section (may repeat where allowed)
    [section id]       section keyed by an integer bus id
    key = value        value is a number, true/false, or a bare word

Unknown keys, missing required keys, duplicate sections and bad values are
collected with their line numbers and raised together as ``SchemaError``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .bus_models import ControllerParams, ExciterParams, GeneratorParams, GovernorParams, PssParams
from .errors import DanglingReference, GridPassivityError, SchemaError
from .network import BranchSpec

BUS_KINDS = ("slack", "pv", "pq")

_REQ = object()


@dataclass(frozen=True)
class BusRecord:
    id: int
    kind: str
    v_set: float = 1.0
    angle_deg: float = 0.0
    p_gen: float = 0.0


@dataclass(frozen=True)
class LoadRecord:
    bus: int
    p: float
    q: float


@dataclass(frozen=True)
class MachineRecord:
    bus: int
    params: GeneratorParams
    controllers: ControllerParams = field(default_factory=ControllerParams)
    order: int = 4


@dataclass(frozen=True)
class CaseFile:
    name: str
    base_mva: float
    base_frequency: float
    buses: tuple
    branches: tuple
    machines: tuple
    loads: tuple = ()

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.base_frequency

    @property
    def bus_ids(self) -> list:
        return [b.id for b in self.buses]

    @property
    def bus_index(self) -> dict:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def machine_buses(self) -> list:
        return [m.bus for m in self.machines]

    def machine(self, bus: int) -> MachineRecord:
        for m in self.machines:
            if m.bus == bus:
                return m
        raise KeyError(bus)

    def with_machine(self, record: MachineRecord) -> "CaseFile":
        machines = tuple(record if m.bus == record.bus else m for m in self.machines)
        return replace(self, machines=machines)


@dataclass(frozen=True)
class EventSpec:
    time: float
    bus: int
    delta_p: float
    delta_q: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    grid_lo: float = 1e-2
    grid_hi: float = 1e3
    grid_n: int = 400
    include_dc: bool = True
    eps: float = 1e-9
    pf_tol: float = 1e-8
    pf_max_iter: int = 50
    eq_tol: float = 1e-8
    fd_step: float = 1e-6
    margin: float = 3.0
    max_tb: float = 100.0
    n_tc: int = 20
    bump_factor: float = 0.15
    dt: float = 0.005
    horizon: float = 10.0
    events: tuple = ()

    def __post_init__(self):
        for name in ("eps", "pf_tol", "eq_tol", "fd_step", "dt", "horizon"):
            if not getattr(self, name) > 0:
                raise SchemaError(f"{name} must be positive")
        if not 0 < self.grid_lo < self.grid_hi or self.grid_n < 2:
            raise SchemaError("frequency grid needs 0 < lo < hi and n >= 2")
        if not self.margin > 1 or not self.max_tb > 0:
            raise SchemaError("tuner needs margin > 1 and max_tb > 0")


# -- schemas -----------------------------------------------------------------
# key -> (converter, default or _REQ)

def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _int(text: str) -> int:
    return int(text)


def _word(text: str) -> str:
    if not text or any(c.isspace() for c in text):
        raise ValueError(f"expected a single word, got {text!r}")
    return text


_CASE = {"name": (_word, _REQ), "base_mva": (float, _REQ), "base_frequency": (float, _REQ)}
_BUS = {"type": (str.lower, _REQ), "v": (float, 1.0), "angle": (float, 0.0), "p_gen": (float, 0.0)}
_BRANCH = {"from": (_int, _REQ), "to": (_int, _REQ), "r": (float, _REQ), "x": (float, _REQ),
           "b": (float, 0.0), "tap": (float, 1.0)}
_LOAD = {"p": (float, _REQ), "q": (float, 0.0)}
_MACHINE = {"m": (float, None), "h": (float, None), "d": (float, 0.0),
            "xd": (float, _REQ), "xq": (float, _REQ), "xd_t": (float, _REQ), "xq_t": (float, _REQ),
            "td0_t": (float, _REQ), "tq0_t": (float, _REQ), "r_s": (float, 0.0),
            "p_ref": (float, 0.0), "e_fd": (float, 1.0), "order": (_int, 4)}
_GOVERNOR = {"t_g": (float, _REQ), "droop_r": (float, _REQ), "enabled": (_bool, True)}
_EXCITER = {"k_a": (float, _REQ), "t_a": (float, _REQ), "t_b": (float, 0.0), "t_c": (float, 0.0),
            "v_ref": (float, 1.0), "enabled": (_bool, True)}
_PSS = {"k_w": (float, _REQ), "t_w": (float, _REQ), "t_1": (float, _REQ), "t_2": (float, _REQ),
        "t_3": (float, _REQ), "t_4": (float, _REQ), "enabled": (_bool, True)}

_CASE_SECTIONS = {
    # name: (schema, keyed, repeatable)
    "case": (_CASE, False, False),
    "bus": (_BUS, True, False),
    "branch": (_BRANCH, False, True),
    "load": (_LOAD, True, False),
    "machine": (_MACHINE, True, False),
    "governor": (_GOVERNOR, True, False),
    "exciter": (_EXCITER, True, False),
    "pss": (_PSS, True, False),
}

_CONFIG_SECTIONS = {
    "analysis": ({"grid_lo": (float, 1e-2), "grid_hi": (float, 1e3), "grid_n": (_int, 400),
                  "include_dc": (_bool, True), "eps": (float, 1e-9), "fd_step": (float, 1e-6)},
                 False, False),
    "powerflow": ({"tol": (float, 1e-8), "max_iter": (_int, 50), "eq_tol": (float, 1e-8)},
                  False, False),
    "tuner": ({"margin": (float, 3.0), "max_tb": (float, 100.0), "n_tc": (_int, 20),
               "bump_factor": (float, 0.15)}, False, False),
    "simulation": ({"dt": (float, 0.005), "horizon": (float, 10.0)}, False, False),
    "event": ({"time": (float, _REQ), "bus": (_int, _REQ), "delta_p": (float, 0.0),
               "delta_q": (float, 0.0)}, False, True),
}


@dataclass
class _Section:
    kind: str
    key: Optional[int]
    line: int
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)


def _tokenize(text: str, spec: dict, problems: list) -> list:
    sections: list[_Section] = []
    current = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                problems.append((lineno, f"malformed section header {raw.strip()!r}"))
                current = None
                continue
            parts = line[1:-1].split()
            if not parts or len(parts) > 2:
                problems.append((lineno, f"malformed section header {raw.strip()!r}"))
                current = None
                continue
            kind = parts[0].lower()
            if kind not in spec:
                problems.append((lineno, f"unknown section [{kind}]"))
                current = None
                continue
            _, keyed, repeatable = spec[kind]
            key = None
            if keyed:
                if len(parts) != 2:
                    problems.append((lineno, f"section [{kind}] needs a bus id"))
                    current = None
                    continue
                try:
                    key = int(parts[1])
                except ValueError:
                    problems.append((lineno, f"bus id {parts[1]!r} is not an integer"))
                    current = None
                    continue
            elif len(parts) == 2:
                problems.append((lineno, f"section [{kind}] takes no id"))
                current = None
                continue
            if not repeatable:
                if (kind, key) in seen:
                    label = kind if key is None else f"{kind} {key}"
                    problems.append((lineno, f"duplicate section [{label}]"))
                seen.add((kind, key))
            current = _Section(kind, key, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            problems.append((lineno, f"expected 'key = value', got {raw.strip()!r}"))
            continue
        if current is None:
            problems.append((lineno, "entry outside of any section"))
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        schema = spec[current.kind][0]
        if k not in schema:
            problems.append((lineno, f"unknown key {k!r} in [{current.kind}]"))
            continue
        if k in current.values:
            problems.append((lineno, f"duplicate key {k!r}"))
            continue
        try:
            current.values[k] = schema[k][0](v)
        except ValueError as exc:
            problems.append((lineno, f"bad value for {k!r}: {exc}"))
            continue
        if isinstance(current.values[k], float) and not math.isfinite(current.values[k]):
            problems.append((lineno, f"{k!r} must be finite"))
        current.lines[k] = lineno
    for sec in sections:
        schema = spec[sec.kind][0]
        for k, (_, default) in schema.items():
            if k not in sec.values:
                if default is _REQ:
                    problems.append((sec.line, f"[{sec.kind}] is missing required key {k!r}"))
                else:
                    sec.values[k] = default
    return sections


def parse_case_text(text: str) -> CaseFile:
    problems: list = []
    sections = _tokenize(text, _CASE_SECTIONS, problems)
    if not sections:
        raise SchemaError([(None, "case file is empty")])
    heads = [s for s in sections if s.kind == "case"]
    if not heads:
        problems.append((None, "missing [case] section"))
    if problems:
        raise SchemaError(problems)
    head = heads[0].values
    omega_s = 2.0 * math.pi * head["base_frequency"]

    buses = []
    for s in sections:
        if s.kind != "bus":
            continue
        v = s.values
        if v["type"] not in BUS_KINDS:
            problems.append((s.lines.get("type", s.line), f"bus type must be one of {BUS_KINDS}"))
            continue
        buses.append(BusRecord(s.key, v["type"], v["v"], v["angle"], v["p_gen"]))
    if not buses:
        problems.append((None, "case has no buses"))
    n_slack = sum(b.kind == "slack" for b in buses)
    if buses and n_slack != 1:
        problems.append((None, f"exactly one slack bus required, found {n_slack}"))
    ids = {b.id for b in buses}

    def check_ref(kind, bus, line):
        if bus not in ids:
            raise DanglingReference(kind, bus, line)

    branches = []
    for s in sections:
        if s.kind != "branch":
            continue
        v = s.values
        check_ref("branch", v["from"], s.lines.get("from", s.line))
        check_ref("branch", v["to"], s.lines.get("to", s.line))
        try:
            br = BranchSpec(v["from"], v["to"], v["r"], v["x"], v["b"], v["tap"])
            br.series_admittance
        except (ValueError, GridPassivityError) as exc:
            problems.append((s.line, str(exc)))
            continue
        branches.append(br)

    loads = []
    for s in sections:
        if s.kind == "load":
            check_ref("load", s.key, s.line)
            loads.append(LoadRecord(s.key, s.values["p"], s.values["q"]))

    controllers = {}
    for kind, cls in (("governor", GovernorParams), ("exciter", ExciterParams), ("pss", PssParams)):
        for s in sections:
            if s.kind == kind:
                try:
                    controllers.setdefault(s.key, {})[kind] = cls(**s.values)
                except (ValueError, GridPassivityError) as exc:
                    problems.append((s.line, f"[{kind} {s.key}]: {exc}"))

    machines = []
    for s in sections:
        if s.kind != "machine":
            continue
        check_ref("machine", s.key, s.line)
        v = dict(s.values)
        m, h = v.pop("m"), v.pop("h")
        order = v.pop("order")
        if (m is None) == (h is None):
            problems.append((s.line, f"[machine {s.key}] needs exactly one of 'm' or 'h'"))
            continue
        if m is None:
            m = 2.0 * h / omega_s
        try:
            params = GeneratorParams(m=m, **v)
            ctrl = ControllerParams(**controllers.pop(s.key, {}))
        except (ValueError, GridPassivityError) as exc:
            problems.append((s.line, f"[machine {s.key}]: {exc}"))
            continue
        machines.append(MachineRecord(s.key, params, ctrl, order))
    machine_ids = {m.bus for m in machines}
    for bus, ctrl in controllers.items():
        if bus not in machine_ids:
            kind = next(iter(ctrl))
            line = next(s.line for s in sections if s.kind == kind and s.key == bus)
            raise DanglingReference(kind, bus, line)
    if problems:
        raise SchemaError(problems)
    return CaseFile(head["name"], head["base_mva"], head["base_frequency"],
                    tuple(buses), tuple(branches), tuple(machines), tuple(loads))


def parse_case(path) -> CaseFile:
    return parse_case_text(Path(path).read_text())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit_section(out: list, header: str, items):
    out.append(f"[{header}]")
    for k, v in items:
        out.append(f"{k} = {_fmt(v)}")
    out.append("")


def emit_case(case: CaseFile) -> str:
    out = [f"# case {case.name}", ""]
    _emit_section(out, "case", [("name", case.name), ("base_mva", float(case.base_mva)),
                                ("base_frequency", float(case.base_frequency))])
    for b in case.buses:
        _emit_section(out, f"bus {b.id}", [("type", b.kind), ("v", float(b.v_set)),
                                           ("angle", float(b.angle_deg)), ("p_gen", float(b.p_gen))])
    for br in case.branches:
        _emit_section(out, "branch", [("from", br.from_bus), ("to", br.to_bus), ("r", float(br.r)),
                                      ("x", float(br.x)), ("b", float(br.b)), ("tap", float(br.tap))])
    for ld in case.loads:
        _emit_section(out, f"load {ld.bus}", [("p", float(ld.p)), ("q", float(ld.q))])
    for mr in case.machines:
        p = mr.params
        items = [(f.name, float(getattr(p, f.name))) for f in fields(p)]
        _emit_section(out, f"machine {mr.bus}", items + [("order", mr.order)])
        for kind in ("governor", "exciter", "pss"):
            obj = getattr(mr.controllers, kind)
            items = [(f.name, getattr(obj, f.name) if f.name == "enabled" else float(getattr(obj, f.name)))
                     for f in fields(obj)]
            _emit_section(out, f"{kind} {mr.bus}", items)
    return "\n".join(out)


def write_case(case: CaseFile, path) -> None:
    Path(path).write_text(emit_case(case))


def parse_config_text(text: str) -> RunConfig:
    problems: list = []
    sections = _tokenize(text, _CONFIG_SECTIONS, problems)
    if problems:
        raise SchemaError(problems)
    kw: dict[str, Any] = {}
    events = []
    rename = {"tol": "pf_tol", "max_iter": "pf_max_iter"}
    for s in sections:
        if s.kind == "event":
            events.append(EventSpec(**s.values))
        else:
            for k, v in s.values.items():
                kw[rename.get(k, k)] = v
    events.sort(key=lambda e: e.time)
    return RunConfig(events=tuple(events), **kw)


def parse_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text())


def shipped_case_path(name: str = "kundur2area") -> Path:
    return Path(__file__).with_name("data") / f"{name}.case"


def load_shipped_case(name: str = "kundur2area") -> CaseFile:
    return parse_case(shipped_case_path(name))
