"""Array gain and beam-pair bookkeeping for directional links."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Largest pair count accepted by the scan model; anything above is a config error.
MAX_PAIR_COUNT = 2**63 - 1


@dataclass(frozen=True)
class ArrayPair:
    """Element and beam counts at the base station and the user equipment.

    Beam counts are plain configuration: they are not derived from the
    element counts.
    """

    bs_elements: int
    ue_elements: int
    bs_beams: int = 1
    ue_beams: int = 1

    def __post_init__(self):
        for name in ("bs_elements", "ue_elements", "bs_beams", "ue_beams"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")


# 208 = 16 x 13 and 411538 = 1381 x 298 scanned pairs reproduce the NR
# initial-access delays (see access.fit_scan_constants).
MMWAVE_ARRAYS = ArrayPair(bs_elements=16, ue_elements=4, bs_beams=16, ue_beams=13)
THZ_ARRAYS = ArrayPair(bs_elements=1024, ue_elements=256, bs_beams=1381, ue_beams=298)


def beamforming_gain_db(pair: ArrayPair) -> float:
    return 10.0 * math.log10(pair.bs_elements * pair.ue_elements)


def scan_pair_count(pair: ArrayPair) -> int:
    """Number of transmit/receive beam pairs visited by an exhaustive scan."""
    count = int(pair.bs_beams) * int(pair.ue_beams)
    if count > MAX_PAIR_COUNT:
        raise OverflowError(f"beam pair count {count} exceeds {MAX_PAIR_COUNT}")
    return count
