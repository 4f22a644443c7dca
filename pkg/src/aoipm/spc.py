"""EWMA control charting and Western Electric run rules.

The EWMA recursion and its time-varying control limits flag change points;
the run rules, evaluated on the raw quantification series against zones built
from the baseline mean and standard deviation, declare the anomaly moment.
All operations are pure functions over immutable series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientBaselineError

SIGMA_FLOOR = 1e-9


@dataclass(frozen=True)
class EwmaParams:
    lam: float = 0.2  # weight on the newest observation
    L: float = 3.0  # control-limit width in subgroup standard deviations
    n: int = 1  # rational subgroup size; individuals by default
    mu0: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValueError("lam must be in (0, 1]")
        if self.L <= 0:
            raise ValueError("L must be > 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass
class EwmaSeries:
    z: np.ndarray
    params: EwmaParams


@dataclass(frozen=True)
class WerRule:
    """One of the four run rules; ``direction`` is 'above', 'below' or 'both'."""

    rule_id: int
    direction: str = "above"

    def __post_init__(self):
        if self.rule_id not in (1, 2, 3, 4):
            raise ValueError("rule_id must be 1..4")
        if self.direction not in ("above", "below", "both"):
            raise ValueError("direction must be above/below/both")


def fit_baseline(series, n_baseline):
    """Mean and sample standard deviation of the first ``n_baseline`` points."""
    series = np.asarray(series, dtype=float)
    if n_baseline < 2:
        raise ValueError("n_baseline must be >= 2")
    if series.size < n_baseline:
        raise InsufficientBaselineError(
            f"series length {series.size} < baseline window {n_baseline}"
        )
    head = series[:n_baseline]
    return float(head.mean()), float(head.std(ddof=1))


def ewma_transform(x, params):
    """Left-to-right EWMA recursion seeded at the baseline mean."""
    x = np.asarray(x, dtype=float)
    z = np.empty_like(x)
    prev = params.mu0
    lam = params.lam
    for i in range(x.size):
        prev = lam * x[i] + (1.0 - lam) * prev
        z[i] = prev
    return EwmaSeries(z=z, params=params)


def control_limits(params, i):
    """(LCL, UCL) at 1-based observation index ``i``."""
    if i < 1:
        raise ValueError("i must be >= 1")
    lam = params.lam
    half = (
        params.L
        * (params.sigma / math.sqrt(params.n))
        * math.sqrt(lam / (2.0 - lam) * (1.0 - (1.0 - lam) ** (2 * i)))
    )
    return params.mu0 - half, params.mu0 + half


def asymptotic_limits(params):
    """Closed-form limits as the observation index grows without bound."""
    half = params.L * (params.sigma / math.sqrt(params.n)) * math.sqrt(
        params.lam / (2.0 - params.lam)
    )
    return params.mu0 - half, params.mu0 + half


def detect_change_point(ewma, params, start, two_sided=False):
    """First 0-based index >= ``start`` where the EWMA leaves the limits.

    Upper side only by default (wear raises the quantification function).
    Returns None when the series never escapes.
    """
    z = ewma.z
    for k in range(max(start, 0), z.size):
        lcl, ucl = control_limits(params, k + 1)
        if z[k] > ucl or (two_sided and z[k] < lcl):
            return k
    return None


def guarded_sigma(sigma):
    """Floor a degenerate baseline deviation so zone rules stay usable."""
    if sigma < SIGMA_FLOOR:
        warnings.warn(
            "baseline standard deviation is zero; flooring it, any deviation will trigger",
            stacklevel=2,
        )
        return SIGMA_FLOOR
    return sigma


def _beyond(x, mu0, delta, direction):
    above = x > mu0 + delta
    below = x < mu0 - delta
    if direction == "above":
        return above, None
    if direction == "below":
        return below, None
    return above, below


def evaluate_wer(rule, x, mu0, sigma, start=0):
    """First 0-based index >= ``start`` where the rule's condition completes.

    Windows may reach back before ``start``; only the completion point is
    constrained.  Zone rules: (1) one point beyond 3 sigma, (2) two
    consecutive beyond 2 sigma, (3) three of four consecutive beyond 1 sigma,
    (4) eight in a row beyond the centre line, all on the same side.
    """
    x = np.asarray(x, dtype=float)
    sigma = guarded_sigma(sigma)
    spans = {1: (1, 1, 3.0), 2: (2, 2, 2.0), 3: (4, 3, 1.0), 4: (8, 8, 0.0)}
    window, needed, mult = spans[rule.rule_id]
    above, below = _beyond(x, mu0, mult * sigma, rule.direction)
    for k in range(max(start, window - 1), x.size):
        win = slice(k - window + 1, k + 1)
        if above is not None and int(above[win].sum()) >= needed:
            return k
        if below is not None and int(below[win].sum()) >= needed:
            return k
    return None


def export_chart(x, ewma, params):
    """Columnar text (cycle, z, UCL, LCL, centre) mirroring the chart figure."""
    lines = ["cycle\tz\tucl\tlcl\tcentre"]
    for k in range(ewma.z.size):
        lcl, ucl = control_limits(params, k + 1)
        lines.append(
            f"{k + 1}\t{float(ewma.z[k])!r}\t{float(ucl)!r}"
            f"\t{float(lcl)!r}\t{float(params.mu0)!r}"
        )
    return "\n".join(lines) + "\n"
