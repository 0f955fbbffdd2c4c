"""Max-min QoS resource partitioning: FP, SAFP and RMDI.

All three solve ``max rho  s.t.  w >= rho * f(w),  g(w) <= 1`` where
``f_s(w) = d_s / (delta_t delta_f W log2(1 + SINR_s(w)))``. FP iterates on the
load-proportional interference model, SAFP alternates between freezing the
reuse matrix ``C(w')`` and solving the resulting standard-interference
subproblem, and RMDI adds resource muting on top of SAFP.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from numba import typed, types

from . import _kernels
from .channel import LinkCoupling, effective_powers, mute_coupling
from .interference import (
    cell_impact,
    evaluate_flex,
    interferer_score,
    muting_set,
    reuse_coupling,
    sinr_flex,
)
from .model import InvalidInputError, MruGrid, Scenario, require_valid

_TRACE_ROW = types.Tuple((types.int64, types.int64, types.float64, types.float64))


@dataclass(frozen=True)
class SolverConfig:
    n_max: int = 30
    n_iter: int = 1000
    epsilon: float = 1e-4
    alpha: float | None = None  # None: median positive cell impact at the SAFP solution
    seed: int = 0
    inner_iter_cap: int = 10000
    trace: bool = False
    mute_interference: bool = True
    relaxation: float = 0.5  # weight on the new image in each inner update; 1 = plain iteration

    def __post_init__(self):
        if self.n_max < 1 or self.n_iter < 1 or self.inner_iter_cap < 1:
            raise InvalidInputError("n_max, n_iter and inner_iter_cap must be >= 1")
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        if self.alpha is not None and self.alpha < 0:
            raise InvalidInputError("alpha must be nonnegative")
        if not 0 < self.relaxation <= 1:
            raise InvalidInputError("relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class TraceRecord:
    restart: int
    outer: int
    rho: float
    delta: float  # NaN on the entry point of each inner loop


@dataclass
class SolveOutcome:
    protocol: str
    w_star: np.ndarray
    rho_star: float
    rho_per_service: np.ndarray
    muted: dict[int, frozenset[int]] = field(default_factory=dict)
    trace: list[TraceRecord] = field(default_factory=list)
    converged: bool = True
    restarts_used: int = 0

    def to_dict(self, include_trace: bool = True) -> dict:
        out = {
            "protocol": self.protocol,
            "w_star": self.w_star.tolist(),
            "rho_star": self.rho_star,
            "rho_per_service": self.rho_per_service.tolist(),
            "muted": {str(s): sorted(cells) for s, cells in self.muted.items()},
            "converged": self.converged,
            "restarts_used": self.restarts_used,
        }
        if include_trace:
            out["trace"] = [
                {**asdict(r), "delta": None if math.isnan(r.delta) else r.delta}
                for r in self.trace
            ]
        return out

    def to_json(self, include_trace: bool = True) -> str:
        return json.dumps(self.to_dict(include_trace), indent=2)


def f_map(coupling: LinkCoupling, reuse_fixed, grid: MruGrid, demands, p, w) -> np.ndarray:
    """``f`` with the reuse matrix frozen (all-ones gives the legacy model)."""
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    sinr = sinr_flex(coupling, np.asarray(reuse_fixed), w, p)
    if np.any(sinr <= 0):
        raise InvalidInputError("f is undefined for a service with zero SINR")
    return np.asarray(demands) / (grid.bits_per_unit_rate * np.log2(1.0 + sinr))


def g_norm(scn: Scenario, w) -> float:
    """Largest cell load."""
    return float(np.max(scn.associations.B @ np.asarray(w, dtype=float)))


def muted_load_matrix(scn: Scenario, muted: dict[int, frozenset[int]]) -> np.ndarray:
    """``G`` with ``g'(w) = max_m (G w)_m``: own load plus resource muted for others."""
    G = scn.associations.B.copy()
    for s, cells in muted.items():
        for m in cells:
            G[m, s] += 1.0
    return G


def g_muted(scn: Scenario, w, muted: dict[int, frozenset[int]]) -> float:
    for s in muted:
        if not 0 <= s < scn.n_services:
            raise InvalidInputError(f"muted service {s} does not exist")
    return float(np.max(muted_load_matrix(scn, muted) @ np.asarray(w, dtype=float)))


def fixed_point_solve(
    f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], float],
    epsilon: float,
    inner_iter_cap: int,
    w_init,
    relaxation: float = 1.0,
) -> tuple[np.ndarray, float, list[tuple[float, float]], bool]:
    """Normalized fixed-point iteration for ``w = T(w) = f(w) / g(f(w))``.

    Each update is ``w <- N((1 - relaxation) w + relaxation T(w))`` with
    ``N(x) = x / g(x)``, so ``relaxation = 1`` is the plain iteration ``w <- T(w)``.
    Every relaxation in (0, 1] has the same fixed points; smaller values damp
    the oscillating modes that make the plain iteration crawl when
    interference dominates. Iteration stops once ``|T(w) - w|_inf < epsilon``
    and returns that ``w``.

    Returns ``(w, rho, trace, converged)`` with ``rho = min_s w_s / f_s(w)``;
    ``trace`` holds ``(rho, step)`` after every update.
    """
    w = np.asarray(w_init, dtype=float)
    fw = f(w)
    trace = []
    for _ in range(inner_iter_cap + 1):
        image = fw / g(fw)
        if np.max(np.abs(image - w)) < epsilon:
            return w, float(np.min(w / fw)), trace, True
        if len(trace) == inner_iter_cap:
            break
        x = (1.0 - relaxation) * w + relaxation * image
        w_new = x / g(x)
        step = float(np.max(np.abs(w_new - w)))
        w, fw = w_new, f(w_new)
        trace.append((float(np.min(w / fw)), step))
    return w, float(np.min(w / fw)), trace, False


@dataclass(frozen=True)
class _Problem:
    """Flat arrays the compiled kernels work on."""

    vt: np.ndarray
    sigma: np.ndarray
    p: np.ndarray
    dscale: np.ndarray
    G: np.ndarray
    cell: np.ndarray
    is_dl: np.ndarray
    n_cells: int

    @classmethod
    def build(cls, scn: Scenario, coupling: LinkCoupling, G: np.ndarray | None = None) -> "_Problem":
        return cls(
            vt=np.ascontiguousarray(coupling.v_tilde, dtype=float),
            sigma=np.ascontiguousarray(coupling.sigma_tilde, dtype=float),
            p=effective_powers(scn),
            dscale=scn.demands / scn.grid.bits_per_unit_rate,
            G=np.ascontiguousarray(scn.associations.B if G is None else G, dtype=float),
            cell=scn.serving_bs,
            is_dl=scn.is_dl,
            n_cells=scn.n_bs,
        )


def _new_trace(record: bool):
    return typed.List.empty_list(_TRACE_ROW) if record else _NO_TRACE


_NO_TRACE = typed.List.empty_list(_TRACE_ROW)


def _records(trace) -> list[TraceRecord]:
    return [TraceRecord(*row) for row in trace]


def _outcome(protocol, scn, coupling, w, **kw) -> SolveOutcome:
    rho_s, rho = evaluate_flex(scn, coupling, w, effective_powers(scn))
    return SolveOutcome(protocol, w, rho, rho_s, **kw)


def _check_inputs(scn: Scenario, coupling: LinkCoupling) -> None:
    require_valid(scn)
    S = scn.n_services
    if coupling.v_tilde.shape != (S, S) or coupling.sigma_tilde.shape != (S,):
        raise InvalidInputError("coupling does not match the scenario's service count")


def random_starts(scn: Scenario, G: np.ndarray, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. uniform starting points, each scaled onto ``max(G w) = 1``.

    Row ``i`` depends only on ``(seed, i)``.
    """
    starts = np.random.default_rng(seed).uniform(size=(n, scn.n_services))
    return starts / (starts @ G.T).max(axis=1, keepdims=True)


def solve_fp(scn: Scenario, coupling: LinkCoupling, config: SolverConfig = SolverConfig()) -> SolveOutcome:
    """Fixed point of the load-proportional model, reported under the flexible model."""
    _check_inputs(scn, coupling)
    prob = _Problem.build(scn, coupling)
    a = prob.vt * prob.p[:, None]
    w = np.ones(scn.n_services)
    w /= _kernels.g_of(w, prob.G)
    trace = _new_trace(config.trace)
    _, ok = _kernels.fixed_point(
        a, prob.sigma, prob.p, prob.dscale, prob.G, w,
        config.epsilon, config.inner_iter_cap, config.relaxation, config.trace, 0, 0, trace,
    )
    return _outcome("fp", scn, coupling, w, trace=_records(trace), converged=ok, restarts_used=1)


def _safp_core(scn, prob: _Problem, config: SolverConfig, seed):
    starts = random_starts(scn, prob.G, config.n_max, seed)
    trace = _new_trace(config.trace)
    w, rho, _, ok = _kernels.safp(
        prob.vt, prob.sigma, prob.p, prob.dscale, prob.G, prob.cell, prob.is_dl,
        prob.n_cells, starts, config.epsilon, config.n_iter, config.inner_iter_cap,
        config.relaxation, config.trace, trace,
    )
    return w, rho, ok, _records(trace)


def solve_safp(scn: Scenario, coupling: LinkCoupling, config: SolverConfig = SolverConfig()) -> SolveOutcome:
    """Successive approximation of the fixed point, best of ``n_max`` random starts."""
    _check_inputs(scn, coupling)
    w, _, ok, trace = _safp_core(scn, _Problem.build(scn, coupling), config, config.seed)
    return _outcome("safp", scn, coupling, w, trace=trace, converged=ok, restarts_used=config.n_max)


def default_alpha(scn: Scenario, coupling: LinkCoupling, w) -> float:
    """Median of the positive cross-cell impacts at ``w``; ``inf`` if there are none."""
    p = effective_powers(scn)
    reuse = reuse_coupling(scn, w)
    impacts = []
    for s in range(scn.n_services):
        J = cell_impact(scn, coupling, reuse, w, p, s)
        J[scn.serving_bs[s]] = 0.0
        impacts.extend(J[J > 0])
    return float(np.median(impacts)) if impacts else math.inf


def rank_interferers(scn: Scenario, coupling: LinkCoupling, w) -> list[int]:
    """Services by descending interferer score; ties go to the lower index."""
    p = effective_powers(scn)
    reuse = reuse_coupling(scn, w)
    scores = [interferer_score(coupling, reuse, w, p, s) for s in range(scn.n_services)]
    return sorted(range(scn.n_services), key=lambda s: (-scores[s], s))


def solve_rmdi(
    scn: Scenario,
    coupling: LinkCoupling,
    config: SolverConfig = SolverConfig(),
    safp_outcome: SolveOutcome | None = None,
) -> SolveOutcome:
    """Resource muting for the dominant interferers, on top of SAFP.

    ``safp_outcome`` may pass in an already computed ``solve_safp`` result for
    the same inputs and config to skip the first solve.
    """
    _check_inputs(scn, coupling)
    base = safp_outcome if safp_outcome is not None else solve_safp(scn, coupling, config)
    p = effective_powers(scn)
    order = rank_interferers(scn, coupling, base.w_star)
    alpha = config.alpha if config.alpha is not None else default_alpha(scn, coupling, base.w_star)

    best = replace(base, protocol="rmdi", muted={})
    trace = list(base.trace)
    prev_key = None
    for k in range(1, scn.n_services + 1):
        w_prev = best.w_star
        reuse = reuse_coupling(scn, w_prev)
        muted = {}
        for s in order[:k]:
            cells = muting_set(cell_impact(scn, coupling, reuse, w_prev, p, s), scn.serving_bs[s], alpha)
            if cells:
                muted[s] = cells
        key = tuple(sorted(muted.items(), key=lambda kv: kv[0]))
        if key == prev_key or (not muted and prev_key is None):
            # same subproblem as the incumbent: same deterministic result
            prev_key = key
            continue
        prev_key = key
        effective = mute_coupling(scn, coupling, muted) if config.mute_interference else coupling
        prob = _Problem.build(scn, effective, muted_load_matrix(scn, muted))
        w, _, ok, sub_trace = _safp_core(scn, prob, config, config.seed)
        trace.extend(sub_trace)
        rho_s, rho = evaluate_flex(scn, effective, w, p)
        if not rho >= best.rho_star:
            break
        best = SolveOutcome("rmdi", w, rho, rho_s, muted, [], ok, config.n_max)
    best.trace = trace
    return best
