"""Path loss, noise and link-budget SNR for THz and mmWave access links.

THz links are LOS-only: free-space spreading plus molecular absorption,
``k(f)`` interpolated from an :class:`AbsorptionTable`.  mmWave links use
the 3GPP TR 38.901 urban-microcell (street canyon) model below the LOS
breakpoint.  All quantities are plain floats in SI units or dB.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

SPEED_OF_LIGHT = 299_792_458.0  # m/s
THERMAL_NOISE_DBM_HZ = -174.0
LOG10_E = math.log10(math.e)

PathlossModel = Callable[[float, float], float]


class ModelValidityWarning(UserWarning):
    """A channel model was evaluated outside its stated validity range."""


class AbsorptionRangeError(ValueError):
    """Frequency falls outside the tabulated absorption range."""


def w_to_dbm(power_w: float) -> float:
    if power_w <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(power_w * 1e3)


def dbm_to_w(power_dbm: float) -> float:
    return 10.0 ** (power_dbm / 10.0) / 1e3


@dataclass(frozen=True)
class LinkConfig:
    """Radio parameters of one technology (carrier, bandwidth, power, arrays)."""

    carrier_frequency: float  # Hz
    bandwidth: float  # Hz
    tx_power: float = 0.5  # W
    noise_figure: float = 10.0  # dB
    tx_elements: int = 1
    rx_elements: int = 1

    def __post_init__(self):
        if self.carrier_frequency <= 0:
            raise ValueError("carrier_frequency must be positive")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if self.tx_elements < 1 or self.rx_elements < 1:
            raise ValueError("element counts must be >= 1")

    @property
    def tx_power_dbm(self) -> float:
        return w_to_dbm(self.tx_power)

    @property
    def array_gain_db(self) -> float:
        return 10.0 * math.log10(self.tx_elements * self.rx_elements)


@dataclass(frozen=True)
class AbsorptionTable:
    """Molecular absorption coefficient k(f) in 1/m, piecewise linear in f."""

    frequencies: tuple[float, ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        coefs = tuple(float(k) for k in self.coefficients)
        if len(freqs) != len(coefs) or not freqs:
            raise ValueError("table needs matching, non-empty columns")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")
        if any(k < 0 for k in coefs):
            raise ValueError("absorption coefficients must be >= 0")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "coefficients", coefs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "AbsorptionTable":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def from_file(cls, path: str | Path) -> "AbsorptionTable":
        """Read a two-column ``frequency_Hz k_per_m`` text file ('#' comments)."""
        pairs = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.replace(",", " ").split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(fields)}")
            pairs.append((float(fields[0]), float(fields[1])))
        return cls.from_pairs(pairs)

    def with_coefficient(self, frequency: float, k: float) -> "AbsorptionTable":
        """Copy of the table with ``k`` set at ``frequency`` (inserted if new)."""
        entries = dict(zip(self.frequencies, self.coefficients))
        entries[float(frequency)] = float(k)
        return AbsorptionTable.from_pairs(sorted(entries.items()))

    def coefficient(self, frequency: float) -> float:
        lo, hi = self.frequencies[0], self.frequencies[-1]
        if not lo <= frequency <= hi:
            raise AbsorptionRangeError(
                f"frequency {frequency:.6g} Hz outside table range [{lo:.6g}, {hi:.6g}] Hz"
            )
        i = bisect_right(self.frequencies, frequency)
        if i >= len(self.frequencies):
            return self.coefficients[-1]
        f0, f1 = self.frequencies[i - 1], self.frequencies[i]
        k0, k1 = self.coefficients[i - 1], self.coefficients[i]
        return k0 + (k1 - k0) * (frequency - f0) / (f1 - f0)


# Coefficients at 0.43 and 1.5 THz fit the 1024x256 coverage curves
# (coverage.calibrate_absorption gives 0.0279-0.0283 and 0.0548-0.0554
# depending on the anchor densities); 1.0345 THz is interpolated.
DEFAULT_ABSORPTION = AbsorptionTable(
    (0.43e12, 1.0345e12, 1.5e12),
    (0.0279, 0.0433, 0.0552),
)


class LosMode(str, Enum):
    PROBABILISTIC = "probabilistic"
    LOS = "forced-los"
    NLOS = "forced-nlos"


@dataclass(frozen=True)
class UmiChannelParams:
    bs_height: float = 10.0
    ue_height: float = 1.5
    shadow_sigma_los: float = 4.0
    shadow_sigma_nlos: float = 7.82
    los_mode: LosMode = LosMode.PROBABILISTIC

    def __post_init__(self):
        if self.bs_height <= 0 or self.ue_height <= 0:
            raise ValueError("antenna heights must be positive")
        if self.shadow_sigma_los < 0 or self.shadow_sigma_nlos < 0:
            raise ValueError("shadowing sigmas must be >= 0")
        object.__setattr__(self, "los_mode", LosMode(self.los_mode))

    def distance_3d(self, distance_2d: float) -> float:
        return math.hypot(distance_2d, self.bs_height - self.ue_height)


def spreading_loss_db(frequency: float, distance: float) -> float:
    """Free-space spreading loss 20 log10(4 pi f d / c)."""
    if frequency <= 0 or distance <= 0:
        raise ValueError("frequency and distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * frequency * distance / SPEED_OF_LIGHT)


def absorption_loss_db(frequency: float, distance: float,
                       table: AbsorptionTable = DEFAULT_ABSORPTION) -> float:
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return 10.0 * LOG10_E * table.coefficient(frequency) * distance


def thz_pathloss_db(frequency: float, distance: float,
                    table: AbsorptionTable = DEFAULT_ABSORPTION) -> float:
    return spreading_loss_db(frequency, distance) + absorption_loss_db(frequency, distance, table)


def umi_los_probability(distance_2d: float) -> float:
    """LOS probability for UMi street canyon (38.901 Table 7.4.2-1)."""
    if distance_2d < 0:
        raise ValueError("distance must be >= 0")
    if distance_2d <= 18.0:
        return 1.0
    if math.isinf(distance_2d):
        return 0.0
    return 18.0 / distance_2d + math.exp(-distance_2d / 36.0) * (1.0 - 18.0 / distance_2d)


def umi_pathloss_db(frequency: float, distance_3d: float, los: bool,
                    params: UmiChannelParams = UmiChannelParams(),
                    shadow_sample: float = 0.0) -> float:
    """UMi street-canyon path loss below the breakpoint, plus a shadowing sample (dB).

    Outside 0.5-100 GHz a :class:`ModelValidityWarning` is issued.
    """
    if distance_3d <= 0:
        raise ValueError("distance must be positive")
    f_ghz = frequency / 1e9
    if not 0.5 <= f_ghz <= 100.0:
        warnings.warn(f"UMi model evaluated at {f_ghz:.4g} GHz (valid 0.5-100 GHz)",
                      ModelValidityWarning, stacklevel=2)
    pl_los = 32.4 + 21.0 * math.log10(distance_3d) + 20.0 * math.log10(f_ghz)
    if los:
        return pl_los + shadow_sample
    pl_nlos = (35.3 * math.log10(distance_3d) + 22.4 + 21.3 * math.log10(f_ghz)
               - 0.3 * (params.ue_height - 1.5))
    return max(pl_los, pl_nlos) + shadow_sample


def noise_power_dbm(bandwidth: float, noise_figure: float) -> float:
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure


def thz_model(table: AbsorptionTable = DEFAULT_ABSORPTION) -> PathlossModel:
    return lambda f, d: thz_pathloss_db(f, d, table)


def umi_model(los: bool = True, params: UmiChannelParams = UmiChannelParams(),
              shadow_sample: float = 0.0) -> PathlossModel:
    """Deterministic UMi path loss as a callable of (frequency, 3D distance)."""
    return lambda f, d: umi_pathloss_db(f, d, los, params, shadow_sample)


def snr_db(link: LinkConfig, distance: float, pathloss_model: PathlossModel,
           beamforming_gain: float = 0.0) -> float:
    return (link.tx_power_dbm + beamforming_gain
            - pathloss_model(link.carrier_frequency, distance)
            - noise_power_dbm(link.bandwidth, link.noise_figure))


def snr_gap_db(distances: Sequence[float], mmwave: LinkConfig, thz: LinkConfig,
               table: AbsorptionTable = DEFAULT_ABSORPTION) -> list[float]:
    """mmWave-minus-THz SNR (no beamforming, LOS) at each distance."""
    mm, th = umi_model(los=True), thz_model(table)
    return [snr_db(mmwave, d, mm) - snr_db(thz, d, th) for d in distances]
