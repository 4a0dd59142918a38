"""``sim`` command line.

    sim run --scenario FILE --seed N --out results.csv [--scale D]
    sim sweep --preset fig8|fig9|fig10 --seed N --out results.csv [--scale D]
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..errors import SimulationError
from .engine import run_point
from .results import ResultTable, emit_csv
from .scenario import load_scenario, preset
from .sweeps import FIG8_BANDWIDTHS, sweep_received_power, sweep_ue_power

FIG8_LEVELS = tuple(range(-75, 10, 5))
FIG10_POWERS = tuple(range(10, -31, -1))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="1-bit fronthaul D-MIMO simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario file")
    run.add_argument("--scenario", required=True, help="INI scenario file")
    run.add_argument("--seed", type=int, help="master seed (overrides the file)")
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--scale", type=float, help="frequency scale factor D >= 1")
    run.add_argument("--frames", type=int, help="frames pooled per EVM value")
    run.add_argument("--workers", type=int, help="threads for the radio-head chains")

    sw = sub.add_parser("sweep", help="run one of the preset experiments")
    sw.add_argument("--preset", required=True, choices=("fig8", "fig9", "fig10"))
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--out", required=True, help="CSV output path")
    sw.add_argument("--scale", type=float, default=1.0, help="frequency scale factor D >= 1")
    sw.add_argument("--bandwidth-hz", type=float,
                    help="fig8 only: simulate just this bandwidth (default 5 and 75 MHz)")
    sw.add_argument("--workers", type=int, help="threads for the radio-head chains")
    return p


def _run(args) -> ResultTable:
    s = load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.scale is not None:
        changes["scale"] = args.scale
    if args.frames is not None:
        changes["n_frames"] = args.frames
    s = s.with_(**changes)
    table = ResultTable(s.n_rrh)
    table.add(s.ue_power_dbm[0], run_point(s, workers=args.workers))
    return table


def _sweep(args) -> ResultTable:
    s = preset(args.preset, seed=args.seed, scale=args.scale)
    if args.preset == "fig8":
        bws = (args.bandwidth_hz,) if args.bandwidth_hz else FIG8_BANDWIDTHS
        tables = sweep_received_power(FIG8_LEVELS, s, bandwidths=bws, workers=args.workers)
        if len(tables) == 1:
            return next(iter(tables.values()))
        # both bandwidths in one file: UE id 0 is 5 MHz, 1 is 75 MHz
        merged = ResultTable(s.n_rrh)
        for ue_id, bw in enumerate(bws):
            for r in tables[bw].rows:
                merged.rows.append(type(r)(r.sweep_value, ue_id, r.evm_percent, r.mode,
                                           r.rx_power_dbm))
        return merged
    if args.preset == "fig9":
        table = ResultTable(s.n_rrh)
        for mode in ("one_bit", "inf_bit"):
            sm = s.with_(mode=mode)
            table.add(float(np.mean(sm.ue_power_dbm)), run_point(sm, workers=args.workers))
        return table
    return sweep_ue_power(FIG10_POWERS, s, workers=args.workers)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        table = _run(args) if args.command == "run" else _sweep(args)
        emit_csv(table, args.out)
    except (SimulationError, OSError) as exc:
        print(f"sim: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
