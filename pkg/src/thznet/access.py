"""Exhaustive-scan initial-access latency over an NR-like SS burst structure.

A base station sweeps ``N_ss`` directional synchronization signals every
``T_ss`` seconds.  Scanning ``S`` beam pairs costs ``floor(S / N_ss)`` full
burst periods, plus ``S mod N_ss`` residual signals of ``T_sig`` each, plus a
fixed overhead ``T_proc``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.optimize import nnls

T_SIG_DEFAULT = 31.25e-6
T_PROC_DEFAULT = 53.58125e-6
EXACT_TOLERANCE = 1e-9

MMWAVE_PAIRS = 208
THZ_PAIRS = 411538
SS_COUNTS = (8, 16, 32, 64)
SS_PERIODS = (0.020, 0.005)


def _exact(x: float | int) -> Fraction:
    # repr() gives the shortest decimal that round-trips, so 0.02 stays 1/50.
    return Fraction(x) if isinstance(x, int) else Fraction(repr(float(x)))


@dataclass(frozen=True)
class ScanConfig:
    total_pairs: int
    signals_per_burst: int
    burst_period: float  # s
    per_signal_time: float = T_SIG_DEFAULT
    fixed_overhead: float = T_PROC_DEFAULT

    def __post_init__(self):
        if self.total_pairs < 1 or self.signals_per_burst < 1:
            raise ValueError("total_pairs and signals_per_burst must be >= 1")
        if self.burst_period <= 0:
            raise ValueError("burst_period must be positive")
        if self.per_signal_time < 0 or self.fixed_overhead < 0:
            raise ValueError("per-signal time and overhead must be >= 0")
        if self.per_signal_time * self.signals_per_burst > self.burst_period:
            raise ValueError("a burst of signals does not fit in the burst period")


def exhaustive_scan_delay(cfg: ScanConfig) -> float:
    """Time (s) to visit every beam pair once, evaluated in exact arithmetic."""
    full, rest = divmod(cfg.total_pairs, cfg.signals_per_burst)
    delay = (full * _exact(cfg.burst_period) + rest * _exact(cfg.per_signal_time)
             + _exact(cfg.fixed_overhead))
    return float(delay)


def scan_delay_grid(mmwave_pairs: int = MMWAVE_PAIRS, thz_pairs: int = THZ_PAIRS,
               per_signal_time: float = T_SIG_DEFAULT,
               fixed_overhead: float = T_PROC_DEFAULT) -> list[tuple[str, int, float, float]]:
    """The 16-point (technology, N_ss, T_ss, delay) grid of the NR scan comparison."""
    rows = []
    for tech, pairs in (("mmwave", mmwave_pairs), ("thz", thz_pairs)):
        for t_ss in SS_PERIODS:
            for n_ss in SS_COUNTS:
                cfg = ScanConfig(pairs, n_ss, t_ss, per_signal_time, fixed_overhead)
                rows.append((tech, n_ss, t_ss, exhaustive_scan_delay(cfg)))
    return rows


Observation = tuple[Union[int, str, None], int, float, float]


@dataclass
class ScanFit:
    pairs: dict[str, int]
    per_signal_time: float
    fixed_overhead: float
    residuals: list[float]
    exact: bool
    candidates_tried: int = 0
    exact_solutions: list[tuple[dict[str, int], float, float]] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)


def _candidate_pairs(n_ss: int, t_ss: float, delay: float) -> set[int]:
    # Residual time is below one burst period unless the overhead is huge, so
    # the number of full periods is floor(delay / T_ss) or one less.
    q0 = math.floor(delay / t_ss + 1e-12)
    out: set[int] = set()
    for q in (q0, q0 - 1):
        if q >= 0:
            out.update(range(q * n_ss, q * n_ss + n_ss))
    out.discard(0)
    return out


def fit_scan_constants(observations: Iterable[Observation],
                       tolerance: float = EXACT_TOLERANCE,
                       max_combinations: int = 200_000) -> ScanFit:
    """Recover pair counts and the (T_sig, T_proc) constants from delay data.

    Each observation is ``(pairs, N_ss, T_ss, delay)``.  ``pairs`` is either a
    known integer, or a label (``None`` is the label ``"S"``) naming an
    unknown count shared by every observation with that label.  All groups
    share one ``T_sig`` and one ``T_proc``.

    Several integer solutions can reproduce the data exactly; the one with the
    smallest total pair count is returned (equivalently the largest fixed
    overhead), and all exact solutions are listed in ``exact_solutions``.  If
    none is exact, the least-squares best is returned with ``exact=False``.
    """
    obs = [("S" if p is None else p, int(n), float(t), float(d)) for p, n, t, d in observations]
    if not obs:
        raise ValueError("no observations")
    labels = sorted({p for p, *_ in obs if isinstance(p, str)})
    candidates: dict[str, list[int]] = {}
    for label in labels:
        rows = [o for o in obs if o[0] == label]
        if len(rows) < 3:
            raise ValueError(f"unknown pair count {label!r} needs >= 3 observations, got {len(rows)}")
        common = None
        for _, n, t, d in rows:
            cand = _candidate_pairs(n, t, d)
            common = cand if common is None else common & cand
        if not common:
            raise ValueError(f"no pair count for {label!r} is consistent with the burst counts")
        candidates[label] = sorted(common)

    delays = np.array([d for *_, d in obs])
    best = None
    exact_solutions = []
    tried = 0
    for combo in itertools.product(*(candidates[l] for l in labels)):
        tried += 1
        if tried > max_combinations:
            break
        assign = dict(zip(labels, combo))
        s = np.array([assign[p] if isinstance(p, str) else p for p, *_ in obs], dtype=np.int64)
        n = np.array([o[1] for o in obs], dtype=np.int64)
        t = np.array([o[2] for o in obs])
        target = delays - (s // n) * t
        design = np.column_stack([(s % n).astype(float), np.ones(len(obs))])
        (t_sig, t_proc), _ = nnls(design, target)
        res = target - design @ np.array([t_sig, t_proc])
        norm = float(np.max(np.abs(res)))
        key = (norm > tolerance, norm if norm > tolerance else 0.0, int(sum(combo)), combo)
        if norm <= tolerance:
            exact_solutions.append((assign, float(t_sig), float(t_proc)))
        if best is None or key < best[0]:
            best = (key, assign, float(t_sig), float(t_proc), res.tolist(), norm)

    _, assign, t_sig, t_proc, res, norm = best
    return ScanFit(pairs=assign, per_signal_time=t_sig, fixed_overhead=t_proc,
                   residuals=res, exact=norm <= tolerance, candidates_tried=tried,
                   exact_solutions=exact_solutions)


def scan_observations(rows: Sequence[tuple[str, int, float, float]]) -> list[Observation]:
    """Turn (technology, N_ss, T_ss, delay) rows into observations with unknown counts."""
    return [(tech, n, t, d) for tech, n, t, d in rows]
