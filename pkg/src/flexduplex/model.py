"""Network, service and resource-grid types.

Indices are 0-based throughout: BS ``n`` is ``bs_positions[n]``, UE ``k`` is
``ue_positions[k]`` and service ``s`` is ``services[s]``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

SCENARIO_SCHEMA_VERSION = 1


class InvalidInputError(ValueError):
    """Raised when a scenario, allocation or config violates its contract."""


class Direction(str, enum.Enum):
    UL = "UL"
    DL = "DL"


@dataclass(frozen=True)
class MruGrid:
    """Time-frequency resource plane of ``w_t * w_f`` minimum resource units."""

    delta_t: float = 0.5e-3  # s
    delta_f: float = 15e3  # Hz
    w_t: int = 20
    w_f: int = 300

    def __post_init__(self):
        if not (self.delta_t > 0 and self.delta_f > 0):
            raise InvalidInputError("MRU duration and bandwidth must be positive")
        if self.w_t < 1 or self.w_f < 1:
            raise InvalidInputError("MRU grid needs at least one unit per axis")

    @property
    def n_units(self) -> int:
        return self.w_t * self.w_f

    @property
    def bits_per_unit_rate(self) -> float:
        """``delta_t * delta_f * W``: bits delivered over the plane per bit/s/Hz."""
        return self.delta_t * self.delta_f * self.n_units


@dataclass(frozen=True)
class Service:
    ue: int
    bs: int
    direction: Direction
    demand_bits: float
    tx_power_watt: float

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))


@dataclass(frozen=True)
class Associations:
    """Indicator matrices linking UEs and BSs to services."""

    A: np.ndarray  # K x S
    B: np.ndarray  # N x S
    B_ul: np.ndarray
    B_dl: np.ndarray


@dataclass(frozen=True)
class Scenario:
    bs_positions: np.ndarray
    ue_positions: np.ndarray
    services: tuple[Service, ...]
    grid: MruGrid = field(default_factory=MruGrid)

    def __post_init__(self):
        bs = np.asarray(self.bs_positions, dtype=float).reshape(-1, 2)
        ue = np.asarray(self.ue_positions, dtype=float).reshape(-1, 2)
        bs.flags.writeable = False
        ue.flags.writeable = False
        object.__setattr__(self, "bs_positions", bs)
        object.__setattr__(self, "ue_positions", ue)
        object.__setattr__(self, "services", tuple(self.services))

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_ue(self) -> int:
        return len(self.ue_positions)

    @property
    def n_services(self) -> int:
        return len(self.services)

    @cached_property
    def serving_bs(self) -> np.ndarray:
        return np.array([s.bs for s in self.services], dtype=np.int64)

    @cached_property
    def is_dl(self) -> np.ndarray:
        return np.array([s.direction is Direction.DL for s in self.services], dtype=bool)

    @cached_property
    def demands(self) -> np.ndarray:
        return np.array([s.demand_bits for s in self.services], dtype=float)

    @cached_property
    def tx_powers(self) -> np.ndarray:
        return np.array([s.tx_power_watt for s in self.services], dtype=float)

    @cached_property
    def associations(self) -> Associations:
        N, K, S = self.n_bs, self.n_ue, self.n_services
        A = np.zeros((K, S))
        B = np.zeros((N, S))
        for s, svc in enumerate(self.services):
            if 0 <= svc.ue < K:
                A[svc.ue, s] = 1.0
            if 0 <= svc.bs < N:
                B[svc.bs, s] = 1.0
        B_dl = B * self.is_dl
        B_ul = B - B_dl
        return Associations(A, B, B_ul, B_dl)

    def services_of(self, n: int) -> list[int]:
        """Indices of the services served by BS ``n``."""
        return [s for s, svc in enumerate(self.services) if svc.bs == n]

    def without_zero_demand(self) -> "Scenario":
        """Drop zero-demand services and the UEs left without any service."""
        kept = [svc for svc in self.services if svc.demand_bits != 0]
        used = sorted({svc.ue for svc in kept})
        remap = {old: new for new, old in enumerate(used)}
        services = [
            Service(remap[svc.ue], svc.bs, svc.direction, svc.demand_bits, svc.tx_power_watt)
            for svc in kept
        ]
        return Scenario(self.bs_positions, self.ue_positions[used], services, self.grid)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "grid": {
                "delta_t": self.grid.delta_t,
                "delta_f": self.grid.delta_f,
                "w_t": self.grid.w_t,
                "w_f": self.grid.w_f,
            },
            "bs_positions_m": self.bs_positions.tolist(),
            "ue_positions_m": self.ue_positions.tolist(),
            "services": [
                {
                    "ue": svc.ue,
                    "bs": svc.bs,
                    "direction": svc.direction.value,
                    "demand_bits": svc.demand_bits,
                    "tx_power_watt": svc.tx_power_watt,
                }
                for svc in self.services
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        version = data.get("schema_version", SCENARIO_SCHEMA_VERSION)
        if version != SCENARIO_SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported scenario schema version {version}")
        try:
            grid = MruGrid(**data["grid"])
            services = [Service(**svc) for svc in data["services"]]
            return cls(data["bs_positions_m"], data["ue_positions_m"], services, grid)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed scenario document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def as_allocation(scn: Scenario, w: Sequence[float] | np.ndarray) -> np.ndarray:
    """Check an allocation vector against ``scn`` and return it as a float array."""
    w = np.asarray(w, dtype=float)
    if w.shape != (scn.n_services,):
        raise InvalidInputError(
            f"allocation has shape {w.shape}, scenario has {scn.n_services} services"
        )
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("allocation entries must be finite and nonnegative")
    return w


def cell_loads(scn: Scenario, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Total, UL and DL load of every cell for allocation ``w``."""
    w = as_allocation(scn, w)
    assoc = scn.associations
    nu_ul = assoc.B_ul @ w
    nu_dl = assoc.B_dl @ w
    return nu_ul + nu_dl, nu_ul, nu_dl


def traffic_fractions(scn: Scenario) -> np.ndarray:
    """N x 2 array of (UL, DL) demand of each cell as a fraction of the total."""
    d = scn.demands
    total = d.sum()
    if not total > 0:
        raise InvalidInputError("traffic distance needs a positive total demand")
    assoc = scn.associations
    return np.column_stack([assoc.B_ul @ d, assoc.B_dl @ d]) / total


def traffic_distance(scn: Scenario, ord: float = 2) -> float:
    """Distance between the cells' (UL, DL) traffic-fraction vectors.

    With more than two cells the largest pairwise distance is returned.
    ``ord`` selects the vector norm (Euclidean by default).
    """
    theta = traffic_fractions(scn)
    if len(theta) < 2:
        raise InvalidInputError("traffic distance needs at least two cells")
    return max(
        float(np.linalg.norm(theta[n] - theta[m], ord=ord))
        for m, n in combinations(range(len(theta)), 2)
    )


def validate(scn: Scenario, assoc: Associations | None = None) -> list[str]:
    """Return every violated scenario invariant; an empty list means valid.

    ``assoc`` defaults to the matrices derived from ``scn.services``.
    """
    errors = []
    if not (np.all(np.isfinite(scn.bs_positions)) and np.all(np.isfinite(scn.ue_positions))):
        errors.append("non-finite geometry")
    if scn.n_bs == 0:
        errors.append("no base stations")
    for s, svc in enumerate(scn.services):
        if not svc.demand_bits > 0:
            errors.append(f"service {s}: nonpositive demand")
        if not svc.tx_power_watt > 0:
            errors.append(f"service {s}: nonpositive tx power")
    assoc = scn.associations if assoc is None else assoc
    for name, mat in (("A", assoc.A), ("B", assoc.B)):
        sums = mat.sum(axis=0)
        for s in np.flatnonzero(sums > 1):
            errors.append(f"service {s}: multi-associated service in {name}")
        for s in np.flatnonzero(sums < 1):
            errors.append(f"service {s}: unassociated service in {name}")
    if not np.array_equal(assoc.B, assoc.B_ul + assoc.B_dl):
        errors.append("B differs from B_ul + B_dl")
    if np.any((assoc.B_ul > 0) & (assoc.B_dl > 0)):
        errors.append("B_ul and B_dl overlap")
    return errors


def require_valid(scn: Scenario) -> None:
    errors = validate(scn)
    if errors:
        raise InvalidInputError("; ".join(errors))
