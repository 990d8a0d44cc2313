"""Network case data: buses, branches, admittance matrix, sensor index map."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

DEFAULT_CASE = Path(__file__).resolve().parent.parent / "data" / "ieee14.case"


class CaseError(ValueError):
    """Malformed or invalid case file."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str  # "slack" | "generator" | "load"
    voltage_setpoint: float | None
    load_active: float
    load_reactive: float


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    line_charging: float
    flow_limit: float


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_power: float

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def slack_bus(self) -> int:
        return next(b.id for b in self.buses if b.kind == "slack")

    @property
    def generator_buses(self) -> list[int]:
        return [b.id for b in self.buses if b.kind == "generator"]

    @property
    def load_buses(self) -> list[int]:
        return [b.id for b in self.buses if b.kind == "load"]

    def bus(self, bus_id: int) -> Bus:
        return self.buses[bus_id - 1]

    def branches_at(self, bus_id: int) -> list[int]:
        """Indices of branches incident to a bus."""
        return [i for i, br in enumerate(self.branches)
                if bus_id in (br.from_bus, br.to_bus)]


def load_case(path: str | Path = DEFAULT_CASE) -> GridCase:
    """Parse a plain-text case file (see data/ieee14.case for the schema)."""
    path = Path(path)
    if not path.exists():
        raise CaseError(f"case file not found: {path}")
    base_mva = None
    buses: list[Bus] = []
    branches: list[Branch] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "base_mva":
                base_mva = float(tok[1])
            elif tok[0] == "bus":
                vset = None if tok[3] == "-" else float(tok[3])
                buses.append(Bus(int(tok[1]), tok[2], vset,
                                 float(tok[4]), float(tok[5])))
            elif tok[0] == "branch":
                branches.append(Branch(int(tok[1]), int(tok[2]), float(tok[3]),
                                       float(tok[4]), float(tok[5]), float(tok[6])))
            else:
                raise CaseError(f"{path}:{lineno}: unknown record '{tok[0]}'")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, CaseError):
                raise
            raise CaseError(f"{path}:{lineno}: cannot parse '{raw}'") from exc
    if base_mva is None:
        raise CaseError(f"{path}: missing base_mva record")
    case = GridCase(tuple(buses), tuple(branches), base_mva)
    validate_case(case)
    return case


def validate_case(case: GridCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseError("duplicate bus ids")
    if ids != list(range(1, len(ids) + 1)):
        raise CaseError("bus ids must be consecutive starting at 1")
    if len(case.buses) != 14:
        raise CaseError(f"expected 14 buses, got {len(case.buses)}")
    if len(case.branches) != 20:
        raise CaseError(f"expected 20 branches, got {len(case.branches)}")
    slacks = [b.id for b in case.buses if b.kind == "slack"]
    if slacks != [1]:
        raise CaseError(f"expected exactly one slack bus (id 1), got {slacks}")
    if case.generator_buses != [2, 3, 6, 8]:
        raise CaseError(f"generator buses must be [2, 3, 6, 8], got {case.generator_buses}")
    for b in case.buses:
        if b.kind in ("slack", "generator"):
            if b.voltage_setpoint is None or b.voltage_setpoint <= 0:
                raise CaseError(f"bus {b.id}: missing or non-positive voltage setpoint")
    for br in case.branches:
        if br.reactance == 0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus}: zero reactance")
        if br.from_bus == br.to_bus:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus}: self loop")
        for end in (br.from_bus, br.to_bus):
            if not 1 <= end <= len(case.buses):
                raise CaseError(f"branch references unknown bus {end}")
    # connectivity
    adj = {b.id: set() for b in case.buses}
    for br in case.branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    seen, stack = set(), [1]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(adj[u] - seen)
    if len(seen) != len(case.buses):
        raise CaseError("network graph is disconnected")


@lru_cache(maxsize=32)
def build_admittance(case: GridCase) -> np.ndarray:
    """Bus admittance matrix from the branch pi-model (taps = 1, no bus shunts)."""
    n = case.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        f, t = br.from_bus - 1, br.to_bus - 1
        ys = 1.0 / complex(br.resistance, br.reactance)
        ysh = 0.5j * br.line_charging
        Y[f, f] += ys + ysh
        Y[t, t] += ys + ysh
        Y[f, t] -= ys
        Y[t, f] -= ys
    Y.setflags(write=False)
    return Y


@lru_cache(maxsize=32)
def branch_admittances(case: GridCase) -> tuple[np.ndarray, np.ndarray]:
    """(Yf, Yt) such that sending/receiving branch currents are Yf@V, Yt@V."""
    nb, n = len(case.branches), case.n_bus
    Yf = np.zeros((nb, n), dtype=complex)
    Yt = np.zeros((nb, n), dtype=complex)
    for i, br in enumerate(case.branches):
        f, t = br.from_bus - 1, br.to_bus - 1
        ys = 1.0 / complex(br.resistance, br.reactance)
        ysh = 0.5j * br.line_charging
        Yf[i, f] = ys + ysh
        Yf[i, t] = -ys
        Yt[i, t] = ys + ysh
        Yt[i, f] = -ys
    Yf.setflags(write=False)
    Yt.setflags(write=False)
    return Yf, Yt


# ---------------------------------------------------------------------------
# Sensor index map: 39 sensors in fixed order
#   0..19  active power flow at the sending end of each branch (case order)
#   20..24 active generation of [slack, gen 2, gen 3, gen 6, gen 8]
#   25..38 voltage magnitude of buses 1..14

N_SENSORS = 39
FLOW_OFFSET = 0
GEN_OFFSET = 20
VOLT_OFFSET = 25


def sensor_map(case: GridCase) -> list[tuple[int, str, str]]:
    """Rows (index, kind, element) describing every sensor."""
    rows = []
    for i, br in enumerate(case.branches):
        rows.append((FLOW_OFFSET + i, "flow", f"{br.from_bus}-{br.to_bus}"))
    gen_order = [case.slack_bus] + case.generator_buses
    for j, bus in enumerate(gen_order):
        rows.append((GEN_OFFSET + j, "generation", str(bus)))
    for b in case.buses:
        rows.append((VOLT_OFFSET + b.id - 1, "voltage", str(b.id)))
    return rows


def sensor_map_csv(case: GridCase) -> str:
    lines = ["index,kind,element"]
    lines += [f"{i},{k},{e}" for i, k, e in sensor_map(case)]
    return "\n".join(lines) + "\n"


def sensor_map_hash(case: GridCase) -> str:
    return hashlib.sha256(sensor_map_csv(case).encode()).hexdigest()[:16]


def generation_sensor_index(case: GridCase, bus_id: int) -> int:
    gen_order = [case.slack_bus] + case.generator_buses
    return GEN_OFFSET + gen_order.index(bus_id)


def voltage_sensor_index(case: GridCase, bus_id: int) -> int:
    return VOLT_OFFSET + bus_id - 1
