"""Default end-to-end stacks: THz (rotating or beam-searching contention, ideal) and mmWave.

The THz link runs at 1.0345 THz with 74 GHz of bandwidth; the mmWave link
at 28 GHz with 400 MHz.  Rotation period, beamwidth and MAC overheads are
calibration knobs chosen so the UDP and TCP regimes look right; they are
not measured values.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .linkstack import MacConfig, PhyConfig, RotatingAntennaConfig, StackConfig
from .propagation import LinkConfig

THZ_PHY = PhyConfig(
    link=LinkConfig(carrier_frequency=1.0345e12, bandwidth=74e9, tx_power=0.5,
                    noise_figure=10.0, tx_elements=32, rx_elements=32),
    spectral_efficiency_cap=2.0,
    snr_floor=0.0,
)

MMWAVE_PHY = PhyConfig(
    link=LinkConfig(carrier_frequency=28e9, bandwidth=400e6, tx_power=0.5,
                    noise_figure=10.0, tx_elements=64, rx_elements=16),
    spectral_efficiency_cap=4.0,
    snr_floor=0.0,
    channel="umi-los",
)

# Rotating BS array: the UE is served for 32.5 % of every 5 ms revolution.
THZ_ROTATION = RotatingAntennaConfig(period=5e-3, beamwidth=0.65 * math.pi)

# Contention access behind the rotating array: no per-access beam search.
THZ_ROTATING_MAC = MacConfig(variant="contention", slot=1e-6, beam_search=0.0,
                             handshake=2e-6, sense=1e-6)

# Contention access with a 1 ms beam search at every channel access.  The
# access phase is deaf, and the retry limit of 6 makes repeated collisions
# drop bursts often enough to stall the transport timers.
THZ_BEAMSEARCH_MAC = MacConfig(variant="contention", slot=5e-6, beam_search=1e-3,
                               handshake=10e-6, sense=5e-6, cw_min=16, max_retries=6,
                               max_burst=16, deafness=True)

IDEAL_MAC = MacConfig(variant="ideal")

# NR-like numerology: 125 us slots, 2 of 14 symbols spent on control.
MMWAVE_SCHEDULED_MAC = MacConfig(variant="scheduled", slot=125e-6, control_overhead=2 / 14)

STACKS = {
    "thz-rotating": StackConfig(THZ_PHY, THZ_ROTATING_MAC, antenna=THZ_ROTATION,
                                label="thz-rotating"),
    "thz-contention": StackConfig(THZ_PHY, THZ_BEAMSEARCH_MAC, label="thz-contention"),
    "thz-ideal": StackConfig(THZ_PHY, IDEAL_MAC, label="thz-ideal"),
    "mmwave-scheduled": StackConfig(MMWAVE_PHY, MMWAVE_SCHEDULED_MAC, label="mmwave-scheduled"),
}


def stack_config(name: str, distance: float = 1.0, **overrides) -> StackConfig:
    try:
        base = STACKS[name]
    except KeyError:
        raise KeyError(f"unknown stack {name!r}; choose from {sorted(STACKS)}") from None
    return replace(base, distance=distance, **overrides)
