"""Feeder data model and the line-oriented ``.feeder`` text format.

A feeder file is a sequence of records, one per line::

    # comment
    bus  id=b1 phases=1,2,3 wmin=1.0 wmax=1.0 root=true
    gen  id=g1 bus=b1 phases=1,2,3 pmin=-10 pmax=10 qmin=-10 qmax=10
    line id=l1 from=b1 to=b2 phases=1,2,3 r=<9 values> x=<9 values>
    load id=d1 bus=b2 phases=1,2,3 conn=wye alpha=1 beta=1 a=0.1 b=0.05

Fields are ``key=value`` pairs separated by whitespace. Per-phase fields take
either a comma list with one entry per declared phase or a single scalar that
is broadcast to all phases. Impedance blocks ``r`` and ``x`` are ``k*k``
row-major comma lists over the line's ``k`` phases (in ascending phase order).
All quantities are per unit; voltage bounds are on the squared magnitude.

Record keys (``*`` = required):

``bus``
    id*, phases*, wmin (0.81), wmax (1.21), gsh (0), bsh (0), root (false)
``gen``
    id*, bus*, phases*, pmin*, pmax*, qmin*, qmax*
``line``
    id*, from*, to*, phases*, r*, x*, gs (0), bs (0), gs_to (=gs),
    bs_to (=bs), tap (1), pmin (-1e6), pmax (1e6), qmin (-1e6), qmax (1e6),
    kind (line | transformer)
``load``
    id*, bus*, phases*, conn* (wye | delta), alpha (0), beta (0), a*, b*

``inf`` and ``-inf`` are accepted wherever a float is. Unknown record types,
unknown keys and repeated keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FeederParseError, FeederValidationError

PHASES = (1, 2, 3)
FLOW_BOUND = 1e6

Phases = tuple[int, ...]
PerPhase = tuple[float, ...]


@dataclass(frozen=True)
class Bus:
    id: str
    phases: Phases
    wmin: PerPhase
    wmax: PerPhase
    gsh: PerPhase
    bsh: PerPhase
    root: bool = False


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    phases: Phases
    pmin: PerPhase
    pmax: PerPhase
    qmin: PerPhase
    qmax: PerPhase


@dataclass(frozen=True, eq=False)
class Line:
    """Branch or transformer. ``r``/``x`` are ``k x k`` over ``phases``."""

    id: str
    from_bus: str
    to_bus: str
    phases: Phases
    r: np.ndarray
    x: np.ndarray
    gs: PerPhase
    bs: PerPhase
    gs_to: PerPhase
    bs_to: PerPhase
    tap: PerPhase
    pmin: PerPhase
    pmax: PerPhase
    qmin: PerPhase
    qmax: PerPhase
    kind: str = "line"


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    phases: Phases
    conn: str
    alpha: PerPhase
    beta: PerPhase
    a: PerPhase
    b: PerPhase


@dataclass(frozen=True, eq=False)
class FeederModel:
    buses: tuple[Bus, ...] = ()
    generators: tuple[Generator, ...] = ()
    lines: tuple[Line, ...] = ()
    loads: tuple[Load, ...] = ()
    name: str = ""
    _bus_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._bus_index.update({b.id: b for b in self.buses})

    def bus(self, bus_id: str) -> Bus:
        return self._bus_index[bus_id]

    @property
    def root(self) -> str | None:
        """Substation bus: flagged root, else first bus with a generator, else first bus."""
        for b in self.buses:
            if b.root:
                return b.id
        if self.generators:
            return self.generators[0].bus
        return self.buses[0].id if self.buses else None

    def loads_at(self, bus_id: str) -> list[Load]:
        return [ld for ld in self.loads if ld.bus == bus_id]

    def generators_at(self, bus_id: str) -> list[Generator]:
        return [g for g in self.generators if g.bus == bus_id]

    @property
    def wye_loads(self) -> list[Load]:
        return [ld for ld in self.loads if ld.conn == "wye"]

    @property
    def delta_loads(self) -> list[Load]:
        return [ld for ld in self.loads if ld.conn == "delta"]


# --------------------------------------------------------------------------- parsing

_RECORDS = {
    "bus": {
        "required": ("id", "phases"),
        "optional": ("wmin", "wmax", "gsh", "bsh", "root"),
    },
    "gen": {
        "required": ("id", "bus", "phases", "pmin", "pmax", "qmin", "qmax"),
        "optional": (),
    },
    "line": {
        "required": ("id", "from", "to", "phases", "r", "x"),
        "optional": ("gs", "bs", "gs_to", "bs_to", "tap", "pmin", "pmax", "qmin", "qmax", "kind"),
    },
    "load": {
        "required": ("id", "bus", "phases", "conn", "a", "b"),
        "optional": ("alpha", "beta"),
    },
}


class _Record:
    def __init__(self, kind, fields, lineno):
        self.kind = kind
        self.fields = fields
        self.lineno = lineno

    def err(self, msg, key=None):
        return FeederParseError(msg, line=self.lineno, field=key)

    def text(self, key, default=None):
        if key in self.fields:
            return self.fields[key]
        if default is None:
            raise self.err(f"missing required field in {self.kind} record", key)
        return default

    def phases(self) -> Phases:
        raw = self.text("phases")
        try:
            ph = tuple(int(p) for p in raw.split(","))
        except ValueError:
            raise self.err(f"phases must be integers, got {raw!r}", "phases") from None
        if not ph or any(p not in PHASES for p in ph) or len(set(ph)) != len(ph):
            raise self.err(f"phases must be distinct values from {{1,2,3}}, got {raw!r}", "phases")
        return tuple(sorted(ph))

    def floats(self, key) -> list[float]:
        raw = self.fields[key]
        try:
            return [float(v) for v in raw.split(",")]
        except ValueError:
            raise self.err(f"expected comma-separated numbers, got {raw!r}", key) from None

    def per_phase(self, key, nphase, default=None) -> PerPhase:
        if key not in self.fields:
            if default is None:
                raise self.err(f"missing required field in {self.kind} record", key)
            return (float(default),) * nphase
        vals = self.floats(key)
        if len(vals) == 1:
            vals = vals * nphase
        if len(vals) != nphase:
            raise self.err(f"expected 1 or {nphase} values, got {len(vals)}", key)
        if any(math.isnan(v) for v in vals):
            raise self.err("NaN is not allowed", key)
        return tuple(vals)

    def block(self, key, nphase) -> np.ndarray:
        vals = self.floats(key)
        if len(vals) != nphase * nphase:
            raise self.err(f"impedance block needs {nphase * nphase} values, got {len(vals)}", key)
        return np.array(vals, dtype=float).reshape(nphase, nphase)


def _tokenize(text: str) -> list[_Record]:
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *tokens = line.split()
        if kind not in _RECORDS:
            raise FeederParseError(f"unknown record type {kind!r}", line=lineno)
        allowed = set(_RECORDS[kind]["required"]) | set(_RECORDS[kind]["optional"])
        fields = {}
        for tok in tokens:
            key, sep, value = tok.partition("=")
            if not sep or not key or not value:
                raise FeederParseError(f"expected key=value, got {tok!r}", line=lineno)
            if key not in allowed:
                raise FeederParseError(f"unknown key for {kind} record", line=lineno, field=key)
            if key in fields:
                raise FeederParseError("repeated key", line=lineno, field=key)
            fields[key] = value
        records.append(_Record(kind, fields, lineno))
    return records


def _parse_bool(rec: _Record, key: str) -> bool:
    v = rec.text(key, "false").lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no"):
        return False
    raise rec.err(f"expected a boolean, got {v!r}", key)


def parse_feeder(text: str, name: str = "") -> FeederModel:
    """Parse feeder text and validate the resulting model."""
    buses, gens, lines, loads = [], [], [], []
    seen: dict[tuple[str, str], int] = {}
    for rec in _tokenize(text):
        rid = rec.text("id")
        if (rec.kind, rid) in seen:
            raise rec.err(f"duplicate {rec.kind} id {rid!r} (first at line {seen[rec.kind, rid]})", "id")
        seen[rec.kind, rid] = rec.lineno
        ph = rec.phases()
        k = len(ph)
        if rec.kind == "bus":
            buses.append(Bus(
                id=rid, phases=ph,
                wmin=rec.per_phase("wmin", k, 0.81), wmax=rec.per_phase("wmax", k, 1.21),
                gsh=rec.per_phase("gsh", k, 0.0), bsh=rec.per_phase("bsh", k, 0.0),
                root=_parse_bool(rec, "root"),
            ))
        elif rec.kind == "gen":
            gens.append(Generator(
                id=rid, bus=rec.text("bus"), phases=ph,
                pmin=rec.per_phase("pmin", k), pmax=rec.per_phase("pmax", k),
                qmin=rec.per_phase("qmin", k), qmax=rec.per_phase("qmax", k),
            ))
        elif rec.kind == "line":
            gs = rec.per_phase("gs", k, 0.0)
            bs = rec.per_phase("bs", k, 0.0)
            kind = rec.text("kind", "line")
            if kind not in ("line", "transformer"):
                raise rec.err(f"kind must be line or transformer, got {kind!r}", "kind")
            lines.append(Line(
                id=rid, from_bus=rec.text("from"), to_bus=rec.text("to"), phases=ph,
                r=rec.block("r", k), x=rec.block("x", k),
                gs=gs, bs=bs,
                gs_to=rec.per_phase("gs_to", k) if "gs_to" in rec.fields else gs,
                bs_to=rec.per_phase("bs_to", k) if "bs_to" in rec.fields else bs,
                tap=rec.per_phase("tap", k, 1.0),
                pmin=rec.per_phase("pmin", k, -FLOW_BOUND), pmax=rec.per_phase("pmax", k, FLOW_BOUND),
                qmin=rec.per_phase("qmin", k, -FLOW_BOUND), qmax=rec.per_phase("qmax", k, FLOW_BOUND),
                kind=kind,
            ))
        else:
            conn = rec.text("conn")
            if conn not in ("wye", "delta"):
                raise rec.err(f"conn must be wye or delta, got {conn!r}", "conn")
            loads.append(Load(
                id=rid, bus=rec.text("bus"), phases=ph, conn=conn,
                alpha=rec.per_phase("alpha", k, 0.0), beta=rec.per_phase("beta", k, 0.0),
                a=rec.per_phase("a", k), b=rec.per_phase("b", k),
            ))
    model = FeederModel(tuple(buses), tuple(gens), tuple(lines), tuple(loads), name=name)
    validate(model)
    return model


def load_feeder(path) -> FeederModel:
    """Read and validate a ``.feeder`` file."""
    path = Path(path)
    return parse_feeder(path.read_text(), name=path.stem)


# --------------------------------------------------------------------------- validation

def _check_bounds(kind, cid, label, lo, hi):
    for lo_v, hi_v in zip(lo, hi):
        if lo_v > hi_v:
            raise FeederValidationError(
                f"{kind} {cid!r}: bound {label} lower {lo_v} > upper {hi_v} (bounds must satisfy lower <= upper)"
            )


def validate(model: FeederModel) -> None:
    """Raise :class:`FeederValidationError` naming the first violated invariant."""
    bus_ids = {b.id for b in model.buses}
    roots = [b.id for b in model.buses if b.root]
    if len(roots) > 1:
        raise FeederValidationError(f"at most one root bus allowed, got {roots}")

    def host(kind, cid, bus_id, phases):
        if bus_id not in bus_ids:
            raise FeederValidationError(f"{kind} {cid!r} references nonexistent bus {bus_id!r}")
        missing = set(phases) - set(model.bus(bus_id).phases)
        if missing:
            raise FeederValidationError(
                f"{kind} {cid!r}: phases {sorted(missing)} not present at bus {bus_id!r} "
                "(phase set must be a subset of the host bus phase set)"
            )

    for b in model.buses:
        _check_bounds("bus", b.id, "w", b.wmin, b.wmax)
    for g in model.generators:
        host("generator", g.id, g.bus, g.phases)
        _check_bounds("generator", g.id, "p", g.pmin, g.pmax)
        _check_bounds("generator", g.id, "q", g.qmin, g.qmax)
    for e in model.lines:
        if e.from_bus == e.to_bus:
            raise FeederValidationError(f"line {e.id!r} connects bus {e.from_bus!r} to itself")
        host("line", e.id, e.from_bus, e.phases)
        host("line", e.id, e.to_bus, e.phases)
        if any(t <= 0 for t in e.tap):
            raise FeederValidationError(f"line {e.id!r}: tap ratio must be > 0, got {e.tap}")
        _check_bounds("line", e.id, "p", e.pmin, e.pmax)
        _check_bounds("line", e.id, "q", e.qmin, e.qmax)
        if not (np.all(np.isfinite(e.r)) and np.all(np.isfinite(e.x))):
            raise FeederValidationError(f"line {e.id!r}: impedance entries must be finite")
    for ld in model.loads:
        host("load", ld.id, ld.bus, ld.phases)
        if any(v < 0 for v in ld.alpha + ld.beta):
            raise FeederValidationError(f"load {ld.id!r}: alpha and beta must be >= 0")
        if ld.conn == "delta" and ld.phases != PHASES:
            raise FeederValidationError(
                f"load {ld.id!r}: delta loads must declare all three phases, got {ld.phases}"
            )
