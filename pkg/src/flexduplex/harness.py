"""Two-cell Monte-Carlo sweeps over inter- and intra-cell traffic asymmetry.

Records CSV columns (schema version 1)::

    protocol, inter, intra1, intra2, run, D, rho, converged

``inter`` is the share (in tenths) of the total demand carried by cell 1,
``intra1`` / ``intra2`` the UL share (in tenths) of each cell's demand.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import solve_dtdd, solve_fix
from .channel import ChannelParams, InterferenceFlags, build_channel, build_coupling
from .model import Direction, InvalidInputError, MruGrid, Scenario, Service, traffic_distance
from .solvers import SolverConfig, solve_fp, solve_rmdi, solve_safp

log = logging.getLogger(__name__)

RECORDS_SCHEMA_VERSION = 1
AGGREGATES_SCHEMA_VERSION = 1
RECORD_COLUMNS = ("protocol", "inter", "intra1", "intra2", "run", "D", "rho", "converged")
PROTOCOLS = ("fix", "dtdd", "fp", "safp", "rmdi")
DEFAULT_BIN_EDGES = (0.0, 0.16, 0.32, 0.48, 0.64, 0.80, 1.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SweepConfig:
    runs: int = 50
    inter_ratios: tuple[int, ...] = tuple(range(1, 11))  # cell-1 share in tenths
    intra_ratios: tuple[int, ...] = tuple(range(1, 10))  # UL share in tenths
    total_demand_bits: float = 50e3
    bs_spacing_m: float = 2000.0
    ue_radius_m: float = 2000.0
    bs_power_dbm: float = 43.0
    ue_power_dbm: float = 22.0
    grid: MruGrid = MruGrid()
    channel: ChannelParams = ChannelParams()
    flags: InterferenceFlags = InterferenceFlags()
    solver: SolverConfig = SolverConfig()
    protocols: tuple[str, ...] = PROTOCOLS
    bin_edges: tuple[float, ...] = DEFAULT_BIN_EDGES
    low_high_split: float = 0.5
    out_dir: str = "sweep_out"
    seed: int = 0

    def __post_init__(self):
        if self.runs < 1:
            raise InvalidInputError("runs must be >= 1")
        if not self.total_demand_bits > 0:
            raise InvalidInputError("total demand must be positive")
        unknown = set(self.protocols) - set(PROTOCOLS)
        if unknown:
            raise InvalidInputError(f"unknown protocols {sorted(unknown)}")
        edges = self.bin_edges
        if edges[0] > 0 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidInputError("bin edges must increase from 0")
        for r in self.inter_ratios:
            if not 0 <= r <= 10:
                raise InvalidInputError(f"inter ratio {r} outside 0..10")
        for r in self.intra_ratios:
            if not 0 <= r <= 10:
                raise InvalidInputError(f"intra ratio {r} outside 0..10")

    def combos(self) -> list[tuple[int, int, int]]:
        return list(itertools.product(self.inter_ratios, self.intra_ratios, self.intra_ratios))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        nested = {"grid": MruGrid, "flags": InterferenceFlags, "solver": SolverConfig}
        kwargs = {}
        try:
            for key, value in data.items():
                if key in nested:
                    kwargs[key] = nested[key](**value)
                elif key == "channel":
                    kwargs[key] = ChannelParams.from_dict(value)
                elif isinstance(value, list):
                    kwargs[key] = tuple(value)
                else:
                    kwargs[key] = value
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidInputError(f"malformed sweep config: {exc}") from exc


@dataclass(frozen=True)
class Record:
    protocol: str
    inter: int
    intra1: int
    intra2: int
    run: int
    D: float
    rho: float
    converged: bool


def run_seed(master: int, combo_index: int, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, combo_index, run_index])


def sample_lens(rng: np.random.Generator, centers: np.ndarray, radius: float, n: int) -> np.ndarray:
    """``n`` points uniform in the intersection of the disks around ``centers``."""
    lo = centers.max(axis=0) - radius
    hi = centers.min(axis=0) + radius
    out = np.empty((0, 2))
    while len(out) < n:
        cand = rng.uniform(lo, hi, size=(2 * n, 2))
        inside = np.all(np.linalg.norm(cand[:, None, :] - centers[None], axis=-1) <= radius, axis=1)
        out = np.vstack([out, cand[inside]])
    return out[:n]


def generate_scenario(config: SweepConfig, inter: int, intra: Sequence[int], seed) -> Scenario:
    """Two cells with one UL and one DL service each; zero-demand services dropped.

    Cell 1 carries ``inter / 10`` of the total demand, and cell ``n`` gives
    ``intra[n] / 10`` of its demand to UL.
    """
    rng = np.random.default_rng(seed)
    bs = np.array([[0.0, 0.0], [config.bs_spacing_m, 0.0]])
    ues = sample_lens(rng, bs, config.ue_radius_m, 4)
    cell_share = (inter / 10.0, 1.0 - inter / 10.0)
    services = []
    for n in range(2):
        cell_demand = config.total_demand_bits * cell_share[n]
        ul = cell_demand * intra[n] / 10.0
        for direction, demand in ((Direction.UL, ul), (Direction.DL, cell_demand - ul)):
            power = config.ue_power_dbm if direction is Direction.UL else config.bs_power_dbm
            services.append(Service(len(services), n, direction, demand, dbm_to_watt(power)))
    scn = Scenario(bs, ues, services, config.grid)
    return scn.without_zero_demand()


def solve_all(config: SweepConfig, scn: Scenario, seed) -> dict[str, tuple[float, bool]]:
    """Solve one scenario with every configured protocol; returns ``{protocol: (rho, converged)}``."""
    chan_seed, solver_seed = seed.spawn(2)
    chan = build_channel(scn, config.channel, seed=chan_seed)
    coupling = build_coupling(scn, chan, config.channel, config.flags)
    solver = replace(config.solver, seed=int(solver_seed.generate_state(1)[0]), trace=False)
    out = {}
    safp = None
    for proto in config.protocols:
        if proto == "fix":
            res = solve_fix(scn, coupling)
        elif proto == "dtdd":
            res = solve_dtdd(scn, coupling)
        elif proto == "fp":
            res = solve_fp(scn, coupling, solver)
        elif proto == "safp":
            res = safp = solve_safp(scn, coupling, solver)
        else:
            res = solve_rmdi(scn, coupling, solver, safp_outcome=safp)
        out[proto] = (res.rho_star, res.converged)
    return out


def _run_one(args) -> list[Record]:
    config, combo_index, (inter, intra1, intra2), run = args
    seed = run_seed(config.seed, combo_index, run)
    scn_seed, solve_seed = seed.spawn(2)
    scn = generate_scenario(config, inter, (intra1, intra2), scn_seed)
    D = traffic_distance(scn)
    results = solve_all(config, scn, solve_seed)
    return [
        Record(proto, inter, intra1, intra2, run, D, rho, conv)
        for proto, (rho, conv) in results.items()
    ]


def run_sweep(config: SweepConfig, jobs: int = 1, progress: bool = False) -> list[Record]:
    """Every (inter, intra1, intra2) combination times ``config.runs`` runs.

    Record order is fixed (combo, run, protocol) regardless of ``jobs``.
    """
    tasks = [
        (config, ci, combo, run)
        for ci, combo in enumerate(config.combos())
        for run in range(config.runs)
    ]
    if jobs > 1:
        from multiprocessing import Pool

        with Pool(jobs) as pool:
            chunks = pool.imap(_run_one, tasks, chunksize=max(1, len(tasks) // (16 * jobs)))
            batches = list(_progress(chunks, len(tasks), progress))
    else:
        batches = list(_progress(map(_run_one, tasks), len(tasks), progress))
    return [rec for batch in batches for rec in batch]


def _progress(it: Iterable, total: int, enabled: bool):
    if not enabled:
        yield from it
        return
    step = max(1, total // 100)
    for i, item in enumerate(it, 1):
        if i % step == 0 or i == total:
            log.info("%d/%d runs", i, total)
        yield item


def _bin_index(D: float, edges: Sequence[float]) -> int:
    # values beyond the last edge fold into the last bin
    for i in range(len(edges) - 2, -1, -1):
        if D >= edges[i]:
            return i
    return 0


def empirical_cdf(samples: Sequence[float], x: float) -> float:
    s = np.sort(np.asarray(samples, dtype=float))
    return float(np.searchsorted(s, x, side="right") / len(s)) if len(s) else math.nan


def aggregate(records: Sequence[Record], bin_edges=DEFAULT_BIN_EDGES, split: float = 0.5) -> dict:
    """CDF samples, outage ``Pr[rho < 1]`` and per-bin mean utility for every protocol.

    Empty bins or classes are reported as ``None``.
    """
    if not records:
        raise InvalidInputError("cannot aggregate an empty record set")
    bin_edges = tuple(bin_edges)
    protocols = sorted({r.protocol for r in records}, key=lambda p: (PROTOCOLS + (p,)).index(p))
    out = {
        "schema_version": AGGREGATES_SCHEMA_VERSION,
        "bin_edges": list(bin_edges),
        "low_high_split": split,
        "protocols": {},
    }
    for proto in protocols:
        mine = [r for r in records if r.protocol == proto]
        rho = np.array([r.rho for r in mine])
        D = np.array([r.D for r in mine])
        low = np.sort(rho[D <= split])
        high = np.sort(rho[D > split])
        bins = np.array([_bin_index(d, bin_edges) for d in D], dtype=int)
        n_bins = len(bin_edges) - 1

        def _outage(x):
            return float(np.mean(x < 1.0)) if len(x) else None

        def _mean(x):
            return float(np.mean(np.sort(x))) if len(x) else None

        out["protocols"][proto] = {
            "count": len(mine),
            "outage": _outage(rho),
            "outage_low": _outage(low),
            "outage_high": _outage(high),
            "mean_rho": _mean(rho),
            "cdf_low": low.tolist(),
            "cdf_high": high.tolist(),
            "bin_mean_rho": [_mean(rho[bins == b]) for b in range(n_bins)],
            "bin_count": [int(np.sum(bins == b)) for b in range(n_bins)],
            "non_converged": int(sum(not r.converged for r in mine)),
        }
    return out


def write_records(records: Sequence[Record], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [r.protocol, r.inter, r.intra1, r.intra2, r.run, repr(r.D), repr(r.rho), int(r.converged)]
            )


def read_records(path: str | Path) -> list[Record]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise InvalidInputError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            Record(
                row["protocol"], int(row["inter"]), int(row["intra1"]), int(row["intra2"]),
                int(row["run"]), float(row["D"]), float(row["rho"]), bool(int(row["converged"])),
            )
            for row in reader
        ]


def write_aggregates(agg: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(agg, indent=2))


def format_table(agg: dict) -> str:
    """Plain-text summary: outage and per-bin mean utility per protocol."""
    edges = agg["bin_edges"]
    labels = [f"[{a:.2f},{b:.2f})" for a, b in zip(edges, edges[1:])]
    header = f"{'protocol':<8} {'outage':>7} {'out_lo':>7} {'out_hi':>7} " + " ".join(
        f"{lab:>12}" for lab in labels
    )
    lines = [header]
    for proto, st in agg["protocols"].items():
        cells = " ".join(f"{'-' if v is None else f'{v:.3f}':>12}" for v in st["bin_mean_rho"])
        fmt = lambda v: "-" if v is None else f"{v:.3f}"
        lines.append(
            f"{proto:<8} {fmt(st['outage']):>7} {fmt(st['outage_low']):>7} {fmt(st['outage_high']):>7} {cells}"
        )
    return "\n".join(lines)
