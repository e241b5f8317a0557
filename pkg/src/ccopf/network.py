"""Power network domain types, case-file ingestion and Y-bus construction.

All quantities are stored per-unit on ``base_mva``.  Generator cost
coefficients are per-unit too: ``c2`` in $/pu^2, ``c1`` in $/pu, so that the
cost of a per-unit dispatch equals the dollar cost of the MW dispatch.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import re
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (InconsistentDimension, InvalidNetwork, MalformedRow, MissingTable,
                     MultipleRefBuses, NoRefBus, SchemaViolation, SingularBranch,
                     UnsupportedCostModel)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# MATPOWER uses rateA = 0 for "unlimited"; keep a finite stand-in so every
# line carries an apparent-power row.
UNLIMITED_MVA = 9900.0


class BusKind(str, enum.Enum):
    PQ = "PQ"
    PV = "PV"
    REF = "REF"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    v_min: float
    v_max: float
    p_d: float = 0.0
    q_d: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BusKind(self.kind))
        if not (0 < self.v_min <= self.v_max):
            raise InvalidNetwork(f"bus {self.id}: need 0 < v_min <= v_max")
        if not (math.isfinite(self.p_d) and math.isfinite(self.q_d)):
            raise InvalidNetwork(f"bus {self.id}: demand must be finite")


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float = 0.0
    s_max: float = UNLIMITED_MVA / 100.0

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise InvalidNetwork(f"line {self.from_bus}-{self.to_bus} connects a bus to itself")
        if not self.s_max > 0:
            raise InvalidNetwork(f"line {self.from_bus}-{self.to_bus}: s_max must be positive")

    @property
    def series_admittance(self):
        z = complex(self.r, self.x)
        if z == 0:
            raise SingularBranch(f"line {self.from_bus}-{self.to_bus} has r = x = 0")
        return 1.0 / z


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    c2: float
    c1: float = 0.0
    c0: float = 0.0
    v_set: float = 1.0

    def __post_init__(self):
        if self.p_min > self.p_max or self.q_min > self.q_max:
            raise InvalidNetwork(f"generator at bus {self.bus}: inverted limits")
        if not self.c2 > 0:
            raise InvalidNetwork(f"generator at bus {self.bus}: c2 must be > 0")

    # c2 = 1/(2b), c1 = a/b
    @property
    def b(self):
        return 1.0 / (2.0 * self.c2)

    @property
    def a(self):
        return self.c1 * self.b

    def cost(self, p):
        return self.c2 * p * p + self.c1 * p + self.c0

    def marginal_cost(self, p):
        return (p + self.a) / self.b


@dataclass(frozen=True)
class WindUnit:
    bus: int
    p_u: float
    cos_phi: float = 1.0

    def __post_init__(self):
        if not (0 < self.cos_phi <= 1):
            raise InvalidNetwork(f"wind unit at bus {self.bus}: cos_phi must lie in (0, 1]")
        if self.p_u < 0:
            raise InvalidNetwork(f"wind unit at bus {self.bus}: p_u must be >= 0")

    @property
    def gamma(self):
        return math.sqrt(1.0 - self.cos_phi ** 2) / self.cos_phi

    @property
    def q_u(self):
        return self.gamma * self.p_u


@dataclass(frozen=True, eq=False)
class Network:
    """Validated network.  ``sigma`` is the optional embedded forecast-error
    covariance (per-unit^2, wind-unit order)."""

    base_mva: float
    buses: tuple
    lines: tuple
    generators: tuple = ()
    wind: tuple = ()
    sigma: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        for attr in ("buses", "lines", "generators", "wind"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if self.sigma is not None:
            sig = np.array(self.sigma, dtype=float)
            sig.setflags(write=False)
            object.__setattr__(self, "sigma", sig)
        self._validate()

    # --- indexing -------------------------------------------------------
    @cached_property
    def index(self):
        """bus id -> position."""
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def n_bus(self):
        return len(self.buses)

    @property
    def n_line(self):
        return len(self.lines)

    @property
    def n_gen(self):
        return len(self.generators)

    @property
    def n_wind(self):
        return len(self.wind)

    @cached_property
    def ref(self):
        return next(k for k, b in enumerate(self.buses) if b.kind == BusKind.REF)

    @cached_property
    def kinds(self):
        return [b.kind for b in self.buses]

    @cached_property
    def gen_bus(self):
        return np.array([self.index[g.bus] for g in self.generators], dtype=int)

    @cached_property
    def wind_bus(self):
        return np.array([self.index[w.bus] for w in self.wind], dtype=int)

    @cached_property
    def line_ends(self):
        f = np.array([self.index[l.from_bus] for l in self.lines], dtype=int)
        t = np.array([self.index[l.to_bus] for l in self.lines], dtype=int)
        return f, t

    @cached_property
    def gamma(self):
        return np.array([w.gamma for w in self.wind])

    @cached_property
    def p_d(self):
        return np.array([b.p_d for b in self.buses])

    @cached_property
    def q_d(self):
        return np.array([b.q_d for b in self.buses])

    @cached_property
    def p_u(self):
        """Forecast wind injection per bus."""
        out = np.zeros(self.n_bus)
        np.add.at(out, self.wind_bus, [w.p_u for w in self.wind])
        return out

    @cached_property
    def q_u(self):
        out = np.zeros(self.n_bus)
        np.add.at(out, self.wind_bus, [w.q_u for w in self.wind])
        return out

    @cached_property
    def admittance(self):
        return build_admittance(self)

    def gen_at(self, bus_pos):
        """Generator position at a bus position, or None."""
        hits = np.flatnonzero(self.gen_bus == bus_pos)
        return int(hits[0]) if len(hits) else None

    # --- validation -----------------------------------------------------
    def _validate(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise InvalidNetwork("duplicate bus ids")
        refs = [b for b in self.buses if b.kind == BusKind.REF]
        if not refs:
            raise NoRefBus("network has no reference (theta-V) bus")
        if len(refs) > 1:
            raise MultipleRefBuses(f"network has {len(refs)} reference buses")
        idset = set(ids)
        pairs = set()
        for l in self.lines:
            if l.from_bus not in idset or l.to_bus not in idset:
                raise InvalidNetwork(f"line {l.from_bus}-{l.to_bus} references an unknown bus")
            key = frozenset((l.from_bus, l.to_bus))
            if key in pairs:
                raise InvalidNetwork(f"more than one line between {l.from_bus} and {l.to_bus}")
            pairs.add(key)
        for kind, devs in (("generator", self.generators), ("wind unit", self.wind)):
            seen = set()
            for d in devs:
                if d.bus not in idset:
                    raise InvalidNetwork(f"{kind} references unknown bus {d.bus}")
                if d.bus in seen:
                    raise InvalidNetwork(f"more than one {kind} at bus {d.bus}; aggregate first")
                seen.add(d.bus)
        if self.sigma is not None and self.sigma.shape != (self.n_wind, self.n_wind):
            raise InconsistentDimension(
                f"sigma has shape {self.sigma.shape}, expected {(self.n_wind, self.n_wind)}")
        if self.n_bus > 1:
            f = [self.index[l.from_bus] for l in self.lines]
            t = [self.index[l.to_bus] for l in self.lines]
            adj = coo_matrix((np.ones(len(f)), (f, t)), shape=(self.n_bus, self.n_bus))
            ncomp, _ = connected_components(adj, directed=False)
            if ncomp != 1:
                raise InvalidNetwork(f"network is not connected ({ncomp} islands)")

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        same = (self.base_mva == other.base_mva and self.buses == other.buses
                and self.lines == other.lines and self.generators == other.generators
                and self.wind == other.wind)
        if not same:
            return False
        if (self.sigma is None) != (other.sigma is None):
            return False
        return self.sigma is None or np.array_equal(self.sigma, other.sigma)

    __hash__ = None

    def replace(self, **changes):
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# aggregation


def aggregate_generators(gens):
    """Merge generators sharing a bus into one equivalent unit.

    Limits add up.  The quadratic costs combine through their infimal
    convolution, which for interior dispatches is again quadratic with
    ``b = sum b_k`` and ``a = sum a_k``; the constant term keeps the sum of
    the offsets ``c0_k - a_k^2/(2 b_k)``.
    """
    by_bus = {}
    for g in gens:
        by_bus.setdefault(g.bus, []).append(g)
    out = []
    for bus, group in by_bus.items():
        if len(group) == 1:
            out.append(group[0])
            continue
        log.info("aggregating %d generators at bus %s", len(group), bus)
        b = sum(g.b for g in group)
        a = sum(g.a for g in group)
        offset = sum(g.c0 - g.a ** 2 / (2 * g.b) for g in group)
        out.append(Generator(bus=bus, p_min=sum(g.p_min for g in group),
                             p_max=sum(g.p_max for g in group),
                             q_min=sum(g.q_min for g in group),
                             q_max=sum(g.q_max for g in group),
                             c2=1.0 / (2 * b), c1=a / b, c0=a * a / (2 * b) + offset,
                             v_set=group[0].v_set))
    return out


def aggregate_wind(wind, sigma=None):
    """Merge wind units sharing a bus; returns (units, sigma).

    The merged reactive ratio keeps ``q_u = gamma * p_u`` of the group and
    the covariance is summed over the merged rows and columns.
    """
    buses = []
    for w in wind:
        if w.bus not in buses:
            buses.append(w.bus)
    if len(buses) == len(wind):
        return list(wind), sigma
    M = np.zeros((len(buses), len(wind)))
    out = []
    for k, bus in enumerate(buses):
        group = [j for j, w in enumerate(wind) if w.bus == bus]
        M[k, group] = 1.0
        p = sum(wind[j].p_u for j in group)
        q = sum(wind[j].q_u for j in group)
        if p > 0:
            gam = q / p
        else:
            gam = wind[group[0]].gamma
        out.append(WindUnit(bus=bus, p_u=p, cos_phi=1.0 / math.sqrt(1.0 + gam * gam)))
    if sigma is not None:
        sigma = M @ np.asarray(sigma) @ M.T
    return out, sigma


# ---------------------------------------------------------------------------
# Y-bus


def branch_admittances(net):
    """Per-line (y_ff, y_ft, y_tf, y_tt) for the pi model without taps."""
    ys = np.array([l.series_admittance for l in net.lines], dtype=complex)
    bc = np.array([l.b_charge for l in net.lines])
    yff = ys + 0.5j * bc
    return yff, -ys, -ys, yff.copy()


def build_admittance(net: Network) -> np.ndarray:
    """Dense complex bus admittance matrix including bus shunts."""
    n = net.n_bus
    f, t = net.line_ends
    yff, yft, ytf, ytt = branch_admittances(net)
    Y = np.zeros((n, n), dtype=complex)
    np.add.at(Y, (f, f), yff)
    np.add.at(Y, (f, t), yft)
    np.add.at(Y, (t, f), ytf)
    np.add.at(Y, (t, t), ytt)
    ysh = np.array([complex(b.shunt_g, b.shunt_b) for b in net.buses])
    Y[np.diag_indices(n)] += ysh
    Y.setflags(write=False)
    return Y


# ---------------------------------------------------------------------------
# MATPOWER ingestion

_TABLES = ("bus", "gen", "branch", "gencost")


def _matpower_tables(text):
    base = re.search(r"mpc\.baseMVA\s*=\s*([-+0-9.eE]+)", text)
    if not base:
        raise MissingTable("baseMVA")
    tables = {}
    for name in _TABLES:
        m = re.search(r"mpc\." + name + r"\s*=\s*\[", text)
        if not m:
            if name == "gencost":
                continue
            raise MissingTable(name)
        end = text.find("]", m.end())
        if end < 0:
            raise MalformedRow(text.count("\n", 0, m.start()) + 1, f"unterminated {name} table")
        rows = []
        body_start = m.end()
        line_no = text.count("\n", 0, body_start) + 1
        for raw in text[body_start:end].split("\n"):
            content = raw.split("%")[0]
            for chunk in content.split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                try:
                    rows.append((line_no, [float(v) for v in chunk.replace(",", " ").split()]))
                except ValueError as exc:
                    raise MalformedRow(line_no, f"non-numeric entry in {name}: {chunk!r}") from exc
            line_no += 1
        tables[name] = rows
    if "gencost" not in tables:
        raise MissingTable("gencost")
    return float(base.group(1)), tables


def _need(row, width, line_no, name):
    if len(row) < width:
        raise MalformedRow(line_no, f"{name} row has {len(row)} columns, need {width}")


def parse_matpower(text: str, name: str = "") -> Network:
    """Parse MATPOWER case text into a per-unit ``Network``.

    Out-of-service branches and generators are dropped, co-located
    generators are aggregated and parallel lines merged.  Transformer taps
    and phase shifts are not modeled; they are ignored with a warning.
    """
    base, tb = _matpower_tables(text)
    kinds = {1: BusKind.PQ, 2: BusKind.PV, 3: BusKind.REF}
    bus_rows = []
    for line_no, r in tb["bus"]:
        _need(r, 13, line_no, "bus")
        code = int(r[1])
        if code == 4:
            continue
        if code not in kinds:
            raise MalformedRow(line_no, f"unknown bus type {code}")
        bus_rows.append((line_no, r))
    n_ref = sum(1 for _, r in bus_rows if int(r[1]) == 3)
    if n_ref == 0:
        raise NoRefBus("no bus of type 3")
    if n_ref > 1:
        raise MultipleRefBuses(f"{n_ref} buses of type 3")
    live = {int(r[0]) for _, r in bus_rows}

    gens = []
    if len(tb["gencost"]) < len(tb["gen"]):
        raise MalformedRow(tb["gencost"][-1][0] if tb["gencost"] else 0,
                           "gencost has fewer rows than gen")
    for (line_no, r), (cl, cr) in zip(tb["gen"], tb["gencost"]):
        _need(r, 10, line_no, "gen")
        _need(cr, 4, cl, "gencost")
        if int(r[7]) <= 0 or int(r[0]) not in live:
            continue
        model, ncoef = int(cr[0]), int(cr[3])
        if model != 2:
            raise UnsupportedCostModel(f"gencost line {cl}: only polynomial (model 2) costs")
        coefs = cr[4:4 + ncoef]
        if len(coefs) != ncoef:
            raise MalformedRow(cl, "gencost has fewer coefficients than declared")
        if ncoef > 3:
            raise UnsupportedCostModel(f"gencost line {cl}: degree {ncoef - 1} > 2")
        c2, c1, c0 = ([0.0] * (3 - ncoef) + list(coefs))
        gens.append(Generator(bus=int(r[0]), p_min=r[9] / base, p_max=r[8] / base,
                              q_min=r[4] / base, q_max=r[3] / base,
                              c2=c2 * base * base, c1=c1 * base, c0=c0, v_set=r[5]))
    gens = aggregate_generators(gens)
    gen_buses = {g.bus for g in gens}

    buses = []
    for line_no, r in bus_rows:
        kind = kinds[int(r[1])]
        if kind == BusKind.PV and int(r[0]) not in gen_buses:
            log.warning("bus %d is PV without an in-service generator; treating as PQ", int(r[0]))
            kind = BusKind.PQ
        buses.append(Bus(id=int(r[0]), kind=kind, v_min=r[12], v_max=r[11],
                         p_d=r[2] / base, q_d=r[3] / base,
                         shunt_g=r[4] / base, shunt_b=r[5] / base))

    lines = {}
    for line_no, r in tb["branch"]:
        _need(r, 11, line_no, "branch")
        if int(r[10]) <= 0:
            continue
        f, t = int(r[0]), int(r[1])
        if f not in live or t not in live:
            continue
        if (r[8] not in (0.0, 1.0)) or r[9] != 0.0:
            log.warning("branch %d-%d: tap/phase shift ignored", f, t)
        rate = r[5] if r[5] > 0 else UNLIMITED_MVA
        line = Line(from_bus=f, to_bus=t, r=r[2], x=r[3], b_charge=r[4], s_max=rate / base)
        key = frozenset((f, t))
        if key in lines:
            log.warning("merging parallel lines between %d and %d", f, t)
            line = _parallel(lines[key], line)
        lines[key] = line
    return Network(base_mva=base, buses=buses, lines=list(lines.values()), generators=gens,
                   name=name)


def _parallel(l1, l2):
    y = l1.series_admittance + l2.series_admittance
    z = 1.0 / y
    return Line(from_bus=l1.from_bus, to_bus=l1.to_bus, r=z.real, x=z.imag,
                b_charge=l1.b_charge + l2.b_charge, s_max=l1.s_max + l2.s_max)


# ---------------------------------------------------------------------------
# native JSON

_BUS_KEYS = ("id", "kind", "v_min", "v_max", "p_d", "q_d", "shunt_g", "shunt_b")
_LINE_KEYS = ("from", "to", "r", "x", "b_charge", "s_max")
_GEN_KEYS = ("bus", "p_min", "p_max", "q_min", "q_max", "c2", "c1", "c0")
_WIND_KEYS = ("bus", "p_u", "cos_phi")


def _records(doc, key, required, path, optional=()):
    rows = doc.get(key, [])
    if not isinstance(rows, list):
        raise SchemaViolation(f"{path}.{key}", "expected a list")
    for k, row in enumerate(rows):
        if not isinstance(row, dict):
            raise SchemaViolation(f"{path}.{key}[{k}]", "expected an object")
        for f in required:
            if f not in row:
                raise SchemaViolation(f"{path}.{key}[{k}].{f}", "missing field")
        for f, v in row.items():
            if f == "kind":
                continue
            if f not in required and f not in optional:
                raise SchemaViolation(f"{path}.{key}[{k}].{f}", "unknown field")
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SchemaViolation(f"{path}.{key}[{k}].{f}", "expected a number")
        yield row


def network_from_dict(doc) -> Network:
    if not isinstance(doc, dict):
        raise SchemaViolation("$", "expected an object")
    if "base_mva" not in doc or not isinstance(doc["base_mva"], (int, float)):
        raise SchemaViolation("$.base_mva", "missing or not a number")
    if "buses" not in doc or "lines" not in doc:
        raise SchemaViolation("$", "buses and lines are required")
    units = doc.get("units", "per_unit")
    if units not in ("per_unit", "physical"):
        raise SchemaViolation("$.units", "expected 'per_unit' or 'physical'")
    base = float(doc["base_mva"])
    k = base if units == "physical" else 1.0
    buses = []
    for row in _records(doc, "buses", _BUS_KEYS, "$"):
        if row["kind"] not in ("PQ", "PV", "REF"):
            raise SchemaViolation("$.buses.kind", f"unknown kind {row['kind']!r}")
        buses.append(Bus(id=int(row["id"]), kind=BusKind(row["kind"]), v_min=row["v_min"],
                         v_max=row["v_max"], p_d=row["p_d"] / k, q_d=row["q_d"] / k,
                         shunt_g=row["shunt_g"] / k, shunt_b=row["shunt_b"] / k))
    lines = [Line(from_bus=int(r["from"]), to_bus=int(r["to"]), r=r["r"], x=r["x"],
                  b_charge=r["b_charge"], s_max=r["s_max"] / k)
             for r in _records(doc, "lines", _LINE_KEYS, "$")]
    gens = [Generator(bus=int(r["bus"]), p_min=r["p_min"] / k, p_max=r["p_max"] / k,
                      q_min=r["q_min"] / k, q_max=r["q_max"] / k, c2=r["c2"] * k * k,
                      c1=r["c1"] * k, c0=r["c0"], v_set=r.get("v_set", 1.0))
            for r in _records(doc, "generators", _GEN_KEYS, "$", optional=("v_set",))]
    wind = [WindUnit(bus=int(r["bus"]), p_u=r["p_u"] / k, cos_phi=r["cos_phi"])
            for r in _records(doc, "wind", _WIND_KEYS, "$")]
    sigma = None
    unc = doc.get("uncertainty")
    if unc is not None:
        if not isinstance(unc, dict) or "sigma" not in unc:
            raise SchemaViolation("$.uncertainty.sigma", "missing")
        try:
            sigma = np.array(unc["sigma"], dtype=float) / (k * k)
        except (TypeError, ValueError) as exc:
            raise SchemaViolation("$.uncertainty.sigma", "not a numeric matrix") from exc
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise InconsistentDimension("uncertainty.sigma must be a square matrix")
        if sigma.shape[0] != len(wind):
            raise InconsistentDimension(
                f"uncertainty.sigma is {sigma.shape[0]}x{sigma.shape[0]} for {len(wind)} wind units")
        order = unc.get("ordering")
        if order is not None:
            if sorted(order) != sorted(w.bus for w in wind):
                raise InconsistentDimension("uncertainty.ordering does not match the wind units")
            pos = {bus: j for j, bus in enumerate(order)}
            perm = [pos[w.bus] for w in wind]
            sigma = sigma[np.ix_(perm, perm)]
    gens = aggregate_generators(gens)
    wind, sigma = aggregate_wind(wind, sigma)
    return Network(base_mva=base, buses=buses, lines=lines, generators=gens, wind=wind,
                   sigma=sigma, name=doc.get("name", ""))


def parse_network_json(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc}") from exc
    return network_from_dict(doc)


def network_to_dict(net: Network, physical: bool = False) -> dict:
    k = net.base_mva if physical else 1.0
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": net.name,
        "units": "physical" if physical else "per_unit",
        "base_mva": net.base_mva,
        "buses": [{"id": b.id, "kind": b.kind.value, "v_min": b.v_min, "v_max": b.v_max,
                   "p_d": b.p_d * k, "q_d": b.q_d * k, "shunt_g": b.shunt_g * k,
                   "shunt_b": b.shunt_b * k} for b in net.buses],
        "lines": [{"from": l.from_bus, "to": l.to_bus, "r": l.r, "x": l.x,
                   "b_charge": l.b_charge, "s_max": l.s_max * k} for l in net.lines],
        "generators": [{"bus": g.bus, "p_min": g.p_min * k, "p_max": g.p_max * k,
                        "q_min": g.q_min * k, "q_max": g.q_max * k, "c2": g.c2 / (k * k),
                        "c1": g.c1 / k, "c0": g.c0, "v_set": g.v_set}
                       for g in net.generators],
        "wind": [{"bus": w.bus, "p_u": w.p_u * k, "cos_phi": w.cos_phi} for w in net.wind],
    }
    if net.sigma is not None:
        doc["uncertainty"] = {"sigma": (net.sigma * k * k).tolist(),
                              "ordering": [w.bus for w in net.wind]}
    return doc


def emit_network_json(net: Network, physical: bool = False) -> str:
    return json.dumps(network_to_dict(net, physical), indent=1)


def load_network(path) -> Network:
    """Read a ``.m`` (MATPOWER) or ``.json`` (native) case file."""
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        return parse_network_json(text)
    return parse_matpower(text, name=path.rsplit("/", 1)[-1].rsplit(".", 1)[0])


def with_wind(net: Network, wind, sigma=None) -> Network:
    """Copy of ``net`` with wind units (and covariance) attached."""
    wind, sigma = aggregate_wind(list(wind), sigma)
    return net.replace(wind=tuple(wind), sigma=sigma)


__all__ = ["Bus", "BusKind", "Line", "Generator", "WindUnit", "Network", "parse_matpower",
           "parse_network_json", "emit_network_json", "network_to_dict", "network_from_dict",
           "build_admittance", "branch_admittances", "aggregate_generators", "aggregate_wind",
           "load_network", "with_wind"]
