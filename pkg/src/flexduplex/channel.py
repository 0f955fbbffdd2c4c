"""Average channel gains and the normalized link-gain coupling matrix.

The pathloss model is parametric, ``PL(d) = intercept + slope * log10(d / 1 km)``
per link class, plus reciprocal lognormal shadowing and a minimum coupling
loss. Powers and noise are expressed per minimum resource unit: a transmitter
spreads its power uniformly over the ``w_f`` frequency units and the noise of
a receiver is ``N0 * delta_f * NF``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .model import Direction, InvalidInputError, Scenario


@dataclass(frozen=True)
class LinkClass:
    intercept_db: float
    slope_db: float  # per decade of distance in km
    shadow_std_db: float

    def __post_init__(self):
        if not self.slope_db > 0:
            raise InvalidInputError("pathloss slope must be positive")
        if self.shadow_std_db < 0:
            raise InvalidInputError("shadowing stddev must be nonnegative")

    def pathloss_db(self, d_m):
        return self.intercept_db + self.slope_db * np.log10(np.asarray(d_m) / 1000.0)


@dataclass(frozen=True)
class ChannelParams:
    """Pathloss, shadowing and noise parameters.

    ``bs_ue`` covers both link directions between a BS and a UE (gains are
    reciprocal).
    """

    bs_ue: LinkClass = LinkClass(128.1, 37.6, 8.0)
    bs_bs: LinkClass = LinkClass(98.4, 40.0, 8.0)
    ue_ue: LinkClass = LinkClass(147.4, 43.3, 10.0)
    noise_psd_dbm_hz: float = -174.0
    noise_figure_bs_db: float = 5.0
    noise_figure_ue_db: float = 9.0
    min_coupling_loss_db: float = 70.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelParams":
        data = dict(data)
        try:
            for key in ("bs_ue", "bs_bs", "ue_ue"):
                if key in data:
                    data[key] = LinkClass(**data[key])
            return cls(**data)
        except TypeError as exc:
            raise InvalidInputError(f"malformed channel params: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ChannelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ChannelMatrix:
    """Linear average gains between all nodes; BSs first, then UEs."""

    h: np.ndarray
    n_bs: int

    def bs(self, n: int) -> int:
        return n

    def ue(self, k: int) -> int:
        return self.n_bs + k

    def to_csv(self, path: str | Path) -> None:
        np.savetxt(path, self.h, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class InterferenceFlags:
    """Interference conditions folded into the coupling matrix."""

    self_cancellation: bool = True
    zero_intra_cell: bool = True


@dataclass(frozen=True)
class LinkCoupling:
    v_tilde: np.ndarray  # S x S, [l, s] = interference gain l -> s over serving gain of s
    sigma_tilde: np.ndarray  # S, noise power over serving gain


def _db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db) / 10.0)


def build_channel(scn: Scenario, params: ChannelParams = ChannelParams(), seed=None) -> ChannelMatrix:
    """Draw the (N+K) x (N+K) average gain matrix.

    ``seed`` overrides ``params.seed``; anything accepted by
    ``numpy.random.default_rng`` works.
    """
    pos = np.vstack([scn.bs_positions, scn.ue_positions])
    n_nodes = len(pos)
    is_bs = np.arange(n_nodes) < scn.n_bs
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    dist = np.maximum(dist, 1.0)

    both_bs = is_bs[:, None] & is_bs[None, :]
    both_ue = ~is_bs[:, None] & ~is_bs[None, :]
    classes = [(params.bs_bs, both_bs), (params.ue_ue, both_ue), (params.bs_ue, ~both_bs & ~both_ue)]

    rng = np.random.default_rng(params.seed if seed is None else seed)
    normal = rng.standard_normal((n_nodes, n_nodes))
    normal = np.triu(normal, 1)
    normal = normal + normal.T

    loss = np.empty((n_nodes, n_nodes))
    for link, mask in classes:
        loss[mask] = link.pathloss_db(dist[mask]) + link.shadow_std_db * normal[mask]
    loss = np.maximum(loss, params.min_coupling_loss_db)
    return ChannelMatrix(h=_db_to_lin(-loss), n_bs=scn.n_bs)


def link_endpoints(scn: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Channel-matrix node indices of every service's transmitter and receiver."""
    tx = np.empty(scn.n_services, dtype=np.int64)
    rx = np.empty(scn.n_services, dtype=np.int64)
    for s, svc in enumerate(scn.services):
        ue_node = scn.n_bs + svc.ue
        if svc.direction is Direction.UL:
            tx[s], rx[s] = ue_node, svc.bs
        else:
            tx[s], rx[s] = svc.bs, ue_node
    return tx, rx


def effective_powers(scn: Scenario) -> np.ndarray:
    """Transmit power per frequency unit, the ``p`` entering every SINR."""
    return scn.tx_powers / scn.grid.w_f


def noise_powers(scn: Scenario, params: ChannelParams = ChannelParams()) -> np.ndarray:
    """Receiver noise power per MRU of every service, in watts."""
    psd_w = _db_to_lin(params.noise_psd_dbm_hz - 30.0)
    nf = np.where(
        scn.is_dl, _db_to_lin(params.noise_figure_ue_db), _db_to_lin(params.noise_figure_bs_db)
    )
    return psd_w * scn.grid.delta_f * nf


def build_coupling(
    scn: Scenario,
    chan: ChannelMatrix,
    params: ChannelParams = ChannelParams(),
    flags: InterferenceFlags = InterferenceFlags(),
) -> LinkCoupling:
    tx, rx = link_endpoints(scn)
    v = chan.h[np.ix_(tx, rx)]
    serving = np.diag(v).copy()
    v_tilde = v / serving[None, :]
    if flags.zero_intra_cell:
        cell = scn.serving_bs
        same_cell = cell[:, None] == cell[None, :]
        np.fill_diagonal(same_cell, False)
        v_tilde[same_cell] = 0.0
    if flags.self_cancellation:
        np.fill_diagonal(v_tilde, 0.0)
    sigma_tilde = noise_powers(scn, params) / serving
    return LinkCoupling(v_tilde=v_tilde, sigma_tilde=sigma_tilde)


def mute_coupling(scn: Scenario, coupling: LinkCoupling, muted: dict[int, frozenset]) -> LinkCoupling:
    """Remove interference between each reserved service and the cells muting it.

    A cell ``m`` in ``muted[s]`` leaves the resource of ``s`` blank, so no
    service of ``m`` overlaps ``s`` in either direction.
    """
    if not muted:
        return coupling
    v_tilde = coupling.v_tilde.copy()
    cell = scn.serving_bs
    for s, cells in muted.items():
        if not cells:
            continue
        victims = np.isin(cell, list(cells))
        v_tilde[s, victims] = 0.0
        v_tilde[victims, s] = 0.0
    return replace(coupling, v_tilde=v_tilde)
