"""Result tables and their CSV form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SimulationError


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    ue_id: int
    evm_percent: float
    mode: str
    rx_power_dbm: tuple


@dataclass
class ResultTable:
    """Rows of (sweep value, UE, EVM, mode, per-RRH received power)."""

    n_rrh: int
    rows: list = field(default_factory=list)

    def add(self, sweep_value, report) -> None:
        """Append one row per UE of an :class:`~onebit_dmimo.waveform.EvmReport`."""
        powers = tuple(float(p) for p in report.per_rrh_rx_power)
        for ue, evm in enumerate(report.per_ue_evm):
            self.rows.append(ResultRow(float(sweep_value), ue, float(evm), report.mode, powers))

    def column(self, ue_id: int, mode: str | None = None) -> tuple[list, list]:
        """(sweep values, EVMs) of one UE, in row order."""
        sel = [r for r in self.rows if r.ue_id == ue_id and (mode is None or r.mode == mode)]
        return [r.sweep_value for r in sel], [r.evm_percent for r in sel]

    def header(self) -> str:
        cols = ["sweep_value", "ue_id", "evm_percent", "mode"]
        cols += [f"rx_power_dbm_rrh_{i}" for i in range(self.n_rrh)]
        return ",".join(cols)


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return f"{v:.6g}"


def emit_csv(table: ResultTable, path) -> Path:
    """Write ``table`` as UTF-8 CSV with LF line endings and 6 significant digits."""
    lines = [table.header()]
    for r in table.rows:
        if len(r.rx_power_dbm) != table.n_rrh:
            raise SimulationError(f"row for UE {r.ue_id} has {len(r.rx_power_dbm)} RRH powers, "
                                  f"table has {table.n_rrh}")
        fields = [_fmt(r.sweep_value), str(r.ue_id), _fmt(r.evm_percent), r.mode]
        fields += [_fmt(p) for p in r.rx_power_dbm]
        lines.append(",".join(fields))
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc
    return path
