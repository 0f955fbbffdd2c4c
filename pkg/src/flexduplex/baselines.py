"""Reference protocols: fixed UL/DL split (FIX) and per-cell dynamic TDD (dTDD)."""
from __future__ import annotations

import numpy as np

from .channel import LinkCoupling, effective_powers
from .interference import qos, reuse_coupling, sinr_flex
from .model import Scenario, require_valid
from .solvers import SolveOutcome


def fix_allocation(scn: Scenario) -> np.ndarray:
    """Half the plane per direction, split by demand among a cell's services of that direction."""
    assoc = scn.associations
    d = scn.demands
    w = np.zeros(scn.n_services)
    for Bx in (assoc.B_ul, assoc.B_dl):
        per_cell = Bx @ d
        owner = Bx.argmax(axis=0)
        mine = Bx.sum(axis=0) > 0
        w[mine] = 0.5 * d[mine] / per_cell[owner[mine]]
    return w


def dtdd_allocation(scn: Scenario) -> np.ndarray:
    """Whole plane of every cell, split by demand among its services."""
    B = scn.associations.B
    return scn.demands / (B @ scn.demands)[scn.serving_bs]


def solve_fix(scn: Scenario, coupling: LinkCoupling) -> SolveOutcome:
    require_valid(scn)
    w = fix_allocation(scn)
    reuse = reuse_coupling(scn, w)
    # UL and DL live in disjoint halves of every cell
    reuse[scn.is_dl[:, None] != scn.is_dl[None, :]] = 0.0
    sinr = sinr_flex(coupling, reuse, w, effective_powers(scn))
    rho_s, rho = qos(scn.grid, w, sinr, scn.demands)
    return SolveOutcome("fix", w, rho, rho_s)


def solve_dtdd(scn: Scenario, coupling: LinkCoupling) -> SolveOutcome:
    require_valid(scn)
    w = dtdd_allocation(scn)
    sinr = sinr_flex(coupling, reuse_coupling(scn, w), w, effective_powers(scn))
    rho_s, rho = qos(scn.grid, w, sinr, scn.demands)
    return SolveOutcome("dtdd", w, rho, rho_s)
