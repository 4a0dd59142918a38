"""Scenario description, presets and the plain-text scenario file format.

Scenario file (INI)::

    [geometry]
    rrh = 0,0; 3.5,0; 0,4
    ue = 1.75,2

    [radio]
    carrier_hz = 2.35e9
    bandwidth_hz = 75e6
    subcarrier_hz = 240e3
    fronthaul_hz = 25e9
    scale = 1

    [power]
    ue_dbm = -5
    rrh_dbm = 5

    [mode]
    quantizer = one_bit
    direction = uplink
    combiner = mrc

    [seed]
    seed = 1

Points are ``x,y`` pairs in metres separated by ``;``. ``ue_dbm`` is either one
value for every UE or one value per UE.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..channel import Geometry, link_matrices
from ..errors import ConfigurationError
from ..frontend import FrontendConfig
from ..waveform import OfdmConfig

DIRECTIONS = ("uplink", "downlink")
COMBINERS = ("mrc", "zf")
PRECODERS = ("mrt", "zf")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one frame, in physical (unscaled) units.

    ``cable`` bypasses the propagation model: every link has unit gain and no
    delay, so ``ue_power_dbm`` is the power at the antenna port.
    """

    name: str
    rrh_positions: tuple
    ue_positions: tuple
    ue_power_dbm: tuple
    rrh_power_dbm: float = 5.0
    carrier_hz: float = 2.35e9
    bandwidth_hz: float = 75e6
    subcarrier_hz: float = 240e3
    fronthaul_hz: float = 25e9
    scale: float = 1.0
    mode: str = "one_bit"
    direction: str = "uplink"
    combiner: str = "mrc"
    precoder: str = "mrt"
    seed: int = 0
    cable: bool = False
    n_frames: int = 1
    n_pilots: int = 4
    n_data: int = 1
    dl_pilots_per_rrh: int = 2
    ue_noise_temp_k: float = 290.0
    ue_noise_bandwidth_hz: float = 400e6
    dl_sdm_rms: float = 0.15
    frontend: FrontendConfig = field(default=None, compare=True)

    def __post_init__(self):
        rrh = tuple(tuple(float(v) for v in p) for p in self.rrh_positions)
        ue = tuple(tuple(float(v) for v in p) for p in self.ue_positions)
        object.__setattr__(self, "rrh_positions", rrh)
        object.__setattr__(self, "ue_positions", ue)
        powers = self.ue_power_dbm
        if np.ndim(powers) == 0:
            powers = (float(powers),) * len(ue)
        powers = tuple(float(p) for p in powers)
        object.__setattr__(self, "ue_power_dbm", powers)
        if not rrh or not ue:
            raise ConfigurationError(f"{self.name}: need at least one RRH and one UE")
        if len(powers) != len(ue):
            raise ConfigurationError(f"{self.name}: {len(powers)} UE powers for {len(ue)} UEs")
        if self.scale < 1:
            raise ConfigurationError(f"{self.name}: scale factor must be >= 1")
        if self.mode not in ("one_bit", "inf_bit"):
            raise ConfigurationError(f"{self.name}: unknown quantizer {self.mode!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(f"{self.name}: unknown direction {self.direction!r}")
        if self.combiner not in COMBINERS:
            raise ConfigurationError(f"{self.name}: unknown combiner {self.combiner!r}")
        if self.precoder not in PRECODERS:
            raise ConfigurationError(f"{self.name}: unknown precoder {self.precoder!r}")
        if self.n_frames < 1 or self.n_pilots < 1 or self.n_data < 1:
            raise ConfigurationError(f"{self.name}: frame counts must be positive")
        if self.frontend is None:
            object.__setattr__(self, "frontend", FrontendConfig(carrier_hz=self.carrier_hz,
                                                                mode=self.mode))
        elif self.frontend.mode != self.mode:
            object.__setattr__(self, "frontend", replace(self.frontend, mode=self.mode))
        self.geometry()  # validates distances

    @property
    def n_rrh(self) -> int:
        return len(self.rrh_positions)

    @property
    def n_ue(self) -> int:
        return len(self.ue_positions)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def geometry(self) -> Geometry:
        return Geometry(np.array(self.rrh_positions), np.array(self.ue_positions),
                        self.carrier_hz)

    # scaled quantities used by the engine

    @property
    def sample_rate(self) -> float:
        return self.fronthaul_hz / self.scale

    @property
    def sim_carrier(self) -> float:
        return self.carrier_hz / self.scale

    def ofdm(self) -> OfdmConfig:
        return OfdmConfig(self.subcarrier_hz, self.bandwidth_hz).scaled(self.scale)

    def frontend_config(self) -> FrontendConfig:
        return self.frontend.scaled(self.scale)

    def links(self) -> tuple[np.ndarray, np.ndarray]:
        """Amplitude and delay matrices (n_rrh, n_ue); delays stretched by the scale
        factor, path loss evaluated at the physical carrier."""
        if self.cable:
            shape = (self.n_rrh, self.n_ue)
            return np.ones(shape), np.zeros(shape)
        amp, delay = link_matrices(self.geometry())
        return amp, delay * self.scale


def _rect_perimeter(width, height, n_per_side_x, n_per_side_y):
    pts = []
    for x in np.linspace(0, width, n_per_side_x):
        pts += [(x, 0.0), (x, height)]
    for y in np.linspace(0, height, n_per_side_y)[1:-1]:
        pts += [(0.0, y), (width, y)]
    return tuple(pts)


def su_coverage_positions() -> tuple:
    """Eleven UE test positions spread over the 3.5 m x 4 m area."""
    xs = (0.6, 1.75, 2.9)
    ys = (0.8, 2.0, 3.2)
    grid = [(x, y) for y in ys for x in xs]
    return tuple(grid + [(1.15, 1.4), (2.35, 2.6)])


_SU_RRHS = ((0.0, 0.0), (1.75, 0.0), (3.5, 0.0), (0.0, 4.0), (1.75, 4.0), (3.5, 4.0))


def _preset_table():
    return {
        "fig8": dict(
            rrh_positions=((0.0, 0.0),), ue_positions=((1.0, 0.0),),
            ue_power_dbm=(-40.0,), cable=True, combiner="mrc", n_frames=2),
        "fig9": dict(
            rrh_positions=((0.0, 0.0), (3.0, 0.0), (1.5, 2.6)),
            ue_positions=((1.5, 0.9), (6.0, -8.0)),
            ue_power_dbm=(-5.0, -5.0), combiner="zf", n_frames=2),
        "fig10": dict(
            rrh_positions=_rect_perimeter(12.0, 12.0, 4, 4),
            ue_positions=((3.0, 3.0), (9.0, 3.0), (3.0, 9.0), (9.0, 9.0), (6.0, 6.0)),
            ue_power_dbm=(10.0,) * 5, combiner="zf", n_frames=2),
        "su_coverage": dict(
            rrh_positions=_SU_RRHS, ue_positions=((1.75, 2.0),),
            ue_power_dbm=(-5.0,), combiner="mrc", precoder="mrt", n_frames=2),
        "su_colocated": dict(
            rrh_positions=tuple((1.75 + 0.0625 * k, 0.0) for k in range(6)),
            ue_positions=((1.75, 2.0),), ue_power_dbm=(-5.0,), combiner="mrc",
            precoder="mrt", n_frames=2),
    }


PRESETS = tuple(_preset_table())


def preset(name: str, **overrides) -> Scenario:
    """Named scenario. Coordinates (metres) are illustrative layouts that match the
    qualitative descriptions of the corresponding experiments."""
    table = _preset_table()
    if name not in table:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(table)}")
    params = dict(table[name])
    params.update(overrides)
    return Scenario(name=name, **params)


def _points(text: str, what: str):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            pts.append(tuple(float(v) for v in chunk.split(",")))
        except ValueError as exc:
            raise ConfigurationError(f"[geometry] {what}: cannot parse {chunk!r}") from exc
    if not pts:
        raise ConfigurationError(f"[geometry] {what}: no positions given")
    return tuple(pts)


def _floats(text: str):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def load_scenario(path) -> Scenario:
    """Parse a scenario file (see module docstring)."""
    parser = configparser.ConfigParser()
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if not parser.has_section("geometry"):
        raise ConfigurationError(f"{path}: missing [geometry] section")
    geo = parser["geometry"]
    if "rrh" not in geo or "ue" not in geo:
        raise ConfigurationError(f"{path}: [geometry] needs rrh and ue")
    kw = dict(name=path.stem, rrh_positions=_points(geo["rrh"], "rrh"),
              ue_positions=_points(geo["ue"], "ue"))
    try:
        if parser.has_section("radio"):
            radio = parser["radio"]
            for key in ("carrier_hz", "bandwidth_hz", "subcarrier_hz", "fronthaul_hz", "scale"):
                if key in radio:
                    kw[key] = radio.getfloat(key)
        power = parser["power"] if parser.has_section("power") else {}
        ue_dbm = _floats(power.get("ue_dbm", "-5"))
        kw["ue_power_dbm"] = ue_dbm[0] if len(ue_dbm) == 1 else ue_dbm
        if "rrh_dbm" in power:
            kw["rrh_power_dbm"] = float(power["rrh_dbm"])
        if parser.has_section("mode"):
            mode = parser["mode"]
            kw["mode"] = mode.get("quantizer", "one_bit").strip()
            kw["direction"] = mode.get("direction", "uplink").strip()
            kw["combiner"] = mode.get("combiner", "mrc").strip().lower()
            if "precoder" in mode:
                kw["precoder"] = mode["precoder"].strip().lower()
            if "cable" in mode:
                kw["cable"] = mode.getboolean("cable")
            if "frames" in mode:
                kw["n_frames"] = mode.getint("frames")
        if parser.has_section("seed"):
            kw["seed"] = parser["seed"].getint("seed", 0)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return Scenario(**kw)
