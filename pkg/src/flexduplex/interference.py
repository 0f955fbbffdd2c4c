"""Load-dependent interference: reuse coupling, SINR models, throughput and QoS.

Services are placed on the resource plane in a fixed priority order for UL
and in the reverse order for DL, so two loads ``a`` and ``b`` of opposite
direction overlap on ``max(0, a + b - 1)`` of the plane while two loads of
the same direction overlap on ``min(a, b)``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .channel import LinkCoupling
from .model import MruGrid, Scenario, as_allocation, cell_loads


def service_loads(scn: Scenario, w) -> np.ndarray:
    """Load of the (serving cell, direction) pair of each service."""
    _, nu_ul, nu_dl = cell_loads(scn, w)
    cell = scn.serving_bs
    return np.where(scn.is_dl, nu_dl[cell], nu_ul[cell])


def reuse_coupling(scn: Scenario, w) -> np.ndarray:
    """S x S matrix ``C(w)``: share of victim ``s``'s resource overlapped by ``l``.

    Columns of victims with zero load are 0.
    """
    load = service_loads(scn, w)
    interferer, victim = load[:, None], load[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cross = np.maximum(interferer + victim - 1.0, 0.0) / victim
        same = np.minimum(1.0, interferer / victim)
    dl = scn.is_dl
    c = np.where(dl[:, None] != dl[None, :], cross, same)
    c[:, load == 0] = 0.0
    return c


def interference_terms(coupling: LinkCoupling, reuse: np.ndarray | None, w, p) -> np.ndarray:
    """Normalized interference ``sum_l c[l,s] v~[l,s] p_l w_l`` at each receiver."""
    vt = coupling.v_tilde if reuse is None else reuse * coupling.v_tilde
    return vt.T @ (np.asarray(p) * np.asarray(w))


def sinr_legacy(coupling: LinkCoupling, w, p) -> np.ndarray:
    """SINR when every interferer hits with probability equal to its share ``w_l``."""
    p = np.asarray(p, dtype=float)
    return p / (interference_terms(coupling, None, w, p) + coupling.sigma_tilde)


def sinr_flex(coupling: LinkCoupling, reuse: np.ndarray, w, p) -> np.ndarray:
    """SINR under priority/reverse-order placement, weighted by ``reuse``."""
    p = np.asarray(p, dtype=float)
    return p / (interference_terms(coupling, reuse, w, p) + coupling.sigma_tilde)


def throughput(grid: MruGrid, w, sinr) -> np.ndarray:
    """Bits deliverable to each service over the whole plane."""
    return grid.bits_per_unit_rate * np.asarray(w) * np.log2(1.0 + np.asarray(sinr))


def qos(grid: MruGrid, w, sinr, demands) -> tuple[np.ndarray, float]:
    """Per-service satisfaction ``eta_s / d_s`` and its minimum."""
    rho_s = throughput(grid, w, sinr) / np.asarray(demands)
    return rho_s, float(rho_s.min())


def evaluate_flex(scn: Scenario, coupling: LinkCoupling, w, p) -> tuple[np.ndarray, float]:
    """QoS of allocation ``w`` under the flexible-duplex SINR with ``C(w)``."""
    w = as_allocation(scn, w)
    sinr = sinr_flex(coupling, reuse_coupling(scn, w), w, p)
    return qos(scn.grid, w, sinr, scn.demands)


def interferer_score(coupling: LinkCoupling, reuse: np.ndarray, w, p, s: int) -> float:
    """Total normalized interference service ``s`` inflicts on all others."""
    return float((reuse[s] * coupling.v_tilde[s]).sum() * p[s] * w[s])


def cell_impact(scn: Scenario, coupling: LinkCoupling, reuse: np.ndarray, w, p, s: int) -> np.ndarray:
    """Interference from service ``s`` into each cell, grouped by victim cell."""
    row = reuse[s] * coupling.v_tilde[s]
    return scn.associations.B @ row * p[s] * w[s]


def muting_set(impacts, own_cell: int, alpha: float) -> frozenset[int]:
    """Cells other than ``own_cell`` receiving at least ``alpha`` from the service."""
    return frozenset(
        m for m, j in enumerate(np.asarray(impacts)) if m != own_cell and j >= alpha
    )


def dump_debug_csv(path: str | Path, reuse: np.ndarray, sinr: np.ndarray) -> None:
    """Write ``C`` followed by one SINR row, for offline inspection."""
    np.savetxt(path, np.vstack([reuse, np.asarray(sinr)[None, :]]), delimiter=",", fmt="%.17g")
