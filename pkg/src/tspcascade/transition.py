"""Phase-transition policy: anytime gap metric, sample collection and a
least-squares linear fit from problem size to transition time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSamples, EmptyTrace
from .trace import ConvergenceTrace

log = logging.getLogger(__name__)

DEFAULT_CLAMP_MIN = 1.0
DEFAULT_CLAMP_FRACTION = 0.8
PENALTY_FACTOR = 10.0  # fill factor for seconds before the first valid solution


@dataclass
class LinearPolicy:
    """t_trans = slope * n + intercept, clamped into [clamp_min, clamp_fraction * t_max]."""

    slope: float
    intercept: float
    clamp_min: float = DEFAULT_CLAMP_MIN
    clamp_fraction: float = DEFAULT_CLAMP_FRACTION

    def __post_init__(self):
        if self.clamp_min < 0:
            raise ValueError("clamp_min must be >= 0")
        if not 0 < self.clamp_fraction < 1:
            raise ValueError("clamp_fraction must be in (0, 1)")

    def to_text(self) -> str:
        return (f"a={self.slope!r} b={self.intercept!r} "
                f"clamp_min={self.clamp_min!r} clamp_fraction={self.clamp_fraction!r}\n")

    @classmethod
    def from_text(cls, text: str) -> "LinearPolicy":
        fields = dict(part.split("=", 1) for part in text.split())
        return cls(
            slope=float(fields["a"]),
            intercept=float(fields["b"]),
            clamp_min=float(fields.get("clamp_min", DEFAULT_CLAMP_MIN)),
            clamp_fraction=float(fields.get("clamp_fraction", DEFAULT_CLAMP_FRACTION)),
        )


def gap_curve(trace: ConvergenceTrace, bks: int, horizon: int,
              interval: float = 1.0) -> list[float]:
    """Optimality gap sampled at t = interval, 2*interval, ..., horizon samples.

    Samples before the first recorded solution are filled with 10x the gap of
    the first solution as a penalty.
    """
    if bks <= 0:
        raise ValueError("bks must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not trace.events:
        raise EmptyTrace("trace contains no solution")
    first_gap = (trace.events[0].length - bks) / bks
    curve = []
    idx = -1
    for step in range(1, horizon + 1):
        t = step * interval
        while idx + 1 < len(trace.events) and trace.events[idx + 1].t <= t:
            idx += 1
        if idx < 0:
            curve.append(PENALTY_FACTOR * first_gap)
        else:
            curve.append((trace.events[idx].length - bks) / bks)
    return curve


def gap_sum(curve: list[float]) -> float:
    """Discrete area under the gap curve."""
    if not curve:
        raise ValueError("empty gap curve")
    return float(sum(curve))


def fit_policy(samples: list[tuple[int, float]],
               clamp_min: float = DEFAULT_CLAMP_MIN,
               clamp_fraction: float = DEFAULT_CLAMP_FRACTION) -> LinearPolicy:
    """Ordinary least squares t = a*n + b over (size, transition time) samples."""
    if len(samples) < 2:
        raise DegenerateSamples("need at least 2 samples")
    ns = np.array([float(n) for n, _ in samples])
    ts = np.array([float(t) for _, t in samples])
    if np.all(ns == ns[0]):
        raise DegenerateSamples("all sample sizes equal")
    a = np.stack([ns, np.ones_like(ns)], axis=1)
    coef, *_ = np.linalg.lstsq(a, ts, rcond=None)
    return LinearPolicy(slope=float(coef[0]), intercept=float(coef[1]),
                        clamp_min=clamp_min, clamp_fraction=clamp_fraction)


def predict_t_trans(policy: LinearPolicy, n: int, t_max: float) -> float:
    """Policy output clamped into [clamp_min, clamp_fraction * t_max]."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    raw = policy.slope * n + policy.intercept
    return float(min(max(raw, policy.clamp_min), policy.clamp_fraction * t_max))


def collect_policy_samples(instances, t_grid: list[float], budget: float,
                           solve_fn, bks_lookup=None,
                           interval: float = 1.0) -> list[tuple[int, float]]:
    """Run the solver over the transition-time grid; keep the argmin gap area.

    `solve_fn(inst, t_trans, budget) -> ConvergenceTrace` runs one cascade.
    When no best-known length is available for an instance, the best length
    found across its whole grid serves as the reference; ties go to the
    smaller transition time.
    """
    if not t_grid:
        raise ValueError("empty transition-time grid")
    if any(t >= budget for t in t_grid):
        raise ValueError("grid values must be below the budget")
    samples = []
    horizon = max(1, int(round(budget / interval)))
    for inst in instances:
        traces = {}
        try:
            for t_trans in t_grid:
                traces[t_trans] = solve_fn(inst, t_trans, budget)
        except Exception:
            log.exception("skipping instance %s", getattr(inst, "name", "?"))
            continue
        reference = None
        if bks_lookup is not None:
            reference = bks_lookup(inst)
        if reference is None:
            reference = min(t.best_length() for t in traces.values())
        best_t, best_area = None, math.inf
        for t_trans in sorted(t_grid):
            area = gap_sum(gap_curve(traces[t_trans], reference, horizon, interval))
            if area < best_area:
                best_t, best_area = t_trans, area
        samples.append((inst.n, float(best_t)))
    return samples
