"""Parameter sweeps over received power (cable set-up) and UE transmit power."""

from __future__ import annotations

import logging

from .engine import run_point
from .results import ResultTable
from .scenario import Scenario

log = logging.getLogger(__name__)

FIG8_BANDWIDTHS = (5e6, 75e6)
# frames per point so that both bandwidths pool a comparable number of data
# resource elements (20 vs 312 active subcarriers per data symbol)
_FRAMES_FOR_BANDWIDTH = {5e6: 24, 75e6: 2}


def sweep_received_power(levels, s: Scenario, bandwidths=FIG8_BANDWIDTHS,
                         n_frames: dict | None = None,
                         workers: int | None = None) -> dict[float, ResultTable]:
    """EVM against antenna-port power for a single cabled UE/RRH pair.

    Returns one table per signal bandwidth; ``sweep_value`` is the level in dBm.
    """
    s = s.with_(cable=True)
    frames = dict(_FRAMES_FOR_BANDWIDTH, **(n_frames or {}))
    out = {}
    for bw in bandwidths:
        sb = s.with_(bandwidth_hz=bw, n_frames=frames.get(bw, s.n_frames))
        table = ResultTable(s.n_rrh)
        for idx, level in enumerate(levels):
            rep = run_point(sb.with_(ue_power_dbm=float(level)), sweep_idx=idx, workers=workers)
            log.info("bw %.3g Hz level %.1f dBm: EVM %s %%", bw, level, rep.per_ue_evm)
            table.add(level, rep)
        out[bw] = table
    return out


def sweep_ue_power(powers, s: Scenario, fixed_ue: int | None = None,
                   fixed_power_dbm: float = 10.0, workers: int | None = None) -> ResultTable:
    """Sweep the transmit power of every UE except ``fixed_ue`` (default: the last
    UE), which keeps ``fixed_power_dbm``."""
    fixed_ue = s.n_ue - 1 if fixed_ue is None else fixed_ue
    table = ResultTable(s.n_rrh)
    for idx, p in enumerate(powers):
        ue_power = [float(p)] * s.n_ue
        ue_power[fixed_ue] = fixed_power_dbm
        rep = run_point(s.with_(ue_power_dbm=tuple(ue_power)), sweep_idx=idx, workers=workers)
        log.info("UE power %.1f dBm: EVM %s %%", p, rep.per_ue_evm)
        table.add(p, rep)
    return table
