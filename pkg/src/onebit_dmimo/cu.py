"""Central-unit processing on resource grids.

Channel matrices are stored per active subcarrier as ``H[s, rrh, ue]``. Uplink
pilots are time-orthogonal: every UE owns its own block of pilot symbols and
all UEs send their data symbols simultaneously afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputShapeError, SingularityError
from .waveform import ResourceGrid

CONDITION_LIMIT = 1e12


@dataclass
class ChannelEstimate:
    H: np.ndarray
    active: np.ndarray
    n_fft: int

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=np.complex128)
        if self.H.ndim != 3:
            raise InputShapeError("channel estimate must be shaped (subcarrier, rrh, ue)")
        if self.H.shape[0] != len(self.active):
            raise InputShapeError("channel estimate does not cover the active subcarriers")
        if not np.all(np.isfinite(self.H)):
            raise ConfigurationError("channel estimate contains non-finite entries")

    @property
    def n_rrh(self) -> int:
        return self.H.shape[1]

    @property
    def n_ue(self) -> int:
        return self.H.shape[2]


@dataclass
class CombinerWeights:
    W: np.ndarray
    kind: str


def pilot_schedule(n_ue: int, n_pilots: int = 4) -> list[np.ndarray]:
    """Symbol indices of each UE's pilots: UE 0 first, then UE 1, ..."""
    return [np.arange(k * n_pilots, (k + 1) * n_pilots) for k in range(n_ue)]


def _stack(grids: list[ResourceGrid]) -> np.ndarray:
    """Active-subcarrier data as an array shaped (subcarrier, grid, symbol)."""
    if not grids:
        raise InputShapeError("no resource grids given")
    active = grids[0].active
    for g in grids[1:]:
        if not np.array_equal(g.active, active) or g.data.shape != grids[0].data.shape:
            raise InputShapeError("resource grids differ in geometry")
    return np.stack([g.active_data for g in grids], axis=1)


def estimate_channel_ls(rx_grids: list[ResourceGrid], pilot_ref: list[ResourceGrid],
                        schedule: list[np.ndarray]) -> ChannelEstimate:
    """Least-squares estimate: mean of ``Y / X`` over each UE's pilot symbols.

    ``pilot_ref[k]`` holds UE k's pilot values on its own slots
    ``schedule[k]`` (same symbol indexing as ``rx_grids``).
    """
    if len(pilot_ref) != len(schedule):
        raise InputShapeError("one pilot schedule entry per UE is required")
    Y = _stack(rx_grids)
    n_sc, n_rrh, _ = Y.shape
    H = np.empty((n_sc, n_rrh, len(pilot_ref)), dtype=np.complex128)
    for k, (ref, slots) in enumerate(zip(pilot_ref, schedule)):
        slots = np.asarray(slots, dtype=np.int64)
        X = ref.active_data[:, slots]
        if np.any(X == 0):
            raise ConfigurationError(f"UE {k}: zero pilot value")
        H[:, :, k] = np.mean(Y[:, :, slots] / X[:, None, :], axis=2)
    return ChannelEstimate(H, rx_grids[0].active.copy(), rx_grids[0].n_fft)


def _checked_inverse(G: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(G)
    bad = np.flatnonzero(~(cond < CONDITION_LIMIT))
    if bad.size:
        s = int(bad[0])
        raise SingularityError(f"{what} is singular on subcarrier {s} "
                               f"(condition number {cond[s]:.3g})", subcarrier=s)
    return np.linalg.inv(G)


def combiner_weights(est: ChannelEstimate, kind: str) -> CombinerWeights:
    """Per-subcarrier weights ``W[s, ue, rrh]``."""
    H = est.H
    Hh = np.conj(np.swapaxes(H, 1, 2))
    kind = kind.lower()
    if kind == "mrc":
        norm = np.sum(np.abs(H) ** 2, axis=1)
        if np.any(norm == 0):
            raise SingularityError("zero channel norm", subcarrier=int(np.argwhere(norm == 0)[0, 0]))
        W = Hh / norm[:, :, None]
    elif kind == "zf":
        if est.n_rrh < est.n_ue:
            raise ConfigurationError(f"ZF needs at least as many RRHs ({est.n_rrh}) "
                                     f"as UEs ({est.n_ue})")
        W = _checked_inverse(Hh @ H, "H^H H") @ Hh
    else:
        raise ConfigurationError(f"unknown combiner {kind!r}")
    return CombinerWeights(W, kind)


def combine(est: ChannelEstimate, y: list[ResourceGrid], kind: str = "mrc",
            symbols=None) -> list[ResourceGrid]:
    """Per-UE symbol estimates from per-RRH grids (MRC or ZF).

    ``symbols`` optionally restricts the output to those symbol indices.
    """
    Y = _stack(y)
    if Y.shape[1] != est.n_rrh:
        raise InputShapeError(f"{Y.shape[1]} RRH grids for a {est.n_rrh}-RRH estimate")
    if symbols is not None:
        Y = Y[:, :, symbols]
    W = combiner_weights(est, kind).W
    S = W @ Y
    out = []
    for k in range(est.n_ue):
        data = np.zeros((est.n_fft, S.shape[2]), dtype=np.complex128)
        data[est.active] = S[:, k, :]
        out.append(ResourceGrid(data, est.active))
    return out


def precode(est: ChannelEstimate, s: list[ResourceGrid], kind: str = "mrt",
            per_rrh_power: float = 5.0) -> tuple[list[ResourceGrid], float]:
    """Downlink precoding ``X = P s`` with MRT (``P = H*``) or ZF
    (``P = H* (H^T H*)^-1``).

    The result is scaled by one common real factor so that the strongest RRH
    transmits ``per_rrh_power`` (dBm, average over the grid) and the others
    stay below it, which preserves the precoder's beam and nulls. Grid
    amplitudes here are in volts-equivalent units relative to 1 mW per unit
    |X|^2; the returned scale is the factor applied.
    """
    S = _stack(s)
    if S.shape[1] != est.n_ue:
        raise InputShapeError(f"{S.shape[1]} UE grids for a {est.n_ue}-UE estimate")
    H = est.H
    Hc = np.conj(H)
    kind = kind.lower()
    if kind == "mrt":
        P = Hc
    elif kind == "zf":
        if est.n_rrh < est.n_ue:
            raise ConfigurationError(f"ZF needs at least as many RRHs ({est.n_rrh}) "
                                     f"as UEs ({est.n_ue})")
        P = Hc @ _checked_inverse(np.swapaxes(H, 1, 2) @ Hc, "H^T H*")
    else:
        raise ConfigurationError(f"unknown precoder {kind!r}")
    X = P @ S
    n_sym = X.shape[2]
    per_rrh = np.sum(np.abs(X) ** 2, axis=(0, 2)) / (est.n_fft * n_sym)
    peak = float(per_rrh.max())
    if peak == 0:
        raise SingularityError("precoder output is identically zero")
    scale = np.sqrt(10 ** (per_rrh_power / 10) / peak)
    X *= scale
    out = []
    for i in range(est.n_rrh):
        data = np.zeros((est.n_fft, n_sym), dtype=np.complex128)
        data[est.active] = X[:, i, :]
        out.append(ResourceGrid(data, est.active))
    return out, float(scale)
