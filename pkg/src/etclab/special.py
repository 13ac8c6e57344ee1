"""Numerically careful scalar functions shared by the policies and bounds."""

from __future__ import annotations

import math

_SQRT2 = math.sqrt(2.0)


def lambert_w(y: float) -> float:
    """Principal branch of the Lambert function on [0, inf).

    Returns the unique x >= 0 with x * exp(x) = y.  A log-based starting
    point is refined by Halley iteration; whenever an iterate would leave
    the current bracket the step falls back to its midpoint, so convergence
    is guaranteed.  The residual |x e^x - y| stays below 1e-12 * max(1, y)
    across the full double range.
    """
    if math.isnan(y) or y < 0.0:
        raise ValueError(f"lambert_w requires y >= 0, got {y}")
    if y == 0.0:
        return 0.0
    if math.isinf(y):
        return math.inf
    # log1p(y) * (1 + y) >= y, so log1p(y) brackets the root from above.
    lo, hi = 0.0, math.log1p(y)
    if y > math.e:
        w = math.log(y) - math.log(math.log(y))
    else:
        w = y / (1.0 + y)
    tol = 1e-13 * max(1.0, y)
    for _ in range(120):
        ew = math.exp(w)
        f = w * ew - y
        if abs(f) <= tol:
            return w
        if f > 0.0:
            hi = w
        else:
            lo = w
        wp1 = w + 1.0
        denom = ew * wp1 - f * (w + 2.0) / (2.0 * wp1)
        step = f / denom if denom != 0.0 else math.inf
        nxt = w - step
        if not (lo < nxt < hi) or not math.isfinite(nxt):
            nxt = 0.5 * (lo + hi)
        if nxt == w:
            return w
        w = nxt
    return w


def std_normal_cdf(x: float) -> float:
    """Standard normal cdf, evaluated through the complementary error
    function for full tail accuracy (absolute error below 1e-14)."""
    return 0.5 * math.erfc(-x / _SQRT2)


def bernoulli_kl(p: float, q: float) -> float:
    """Relative entropy between Bernoulli(p) and Bernoulli(q), in nats.

    Follows the 0 log 0 = 0 convention, so kl(0, 0) = kl(1, 1) = 0; the
    divergence is +inf exactly when q puts zero mass where p does not.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"q must lie in [0, 1], got {q}")
    total = 0.0
    if p > 0.0:
        if q == 0.0:
            return math.inf
        total += p * math.log(p / q)
    if p < 1.0:
        if q == 1.0:
            return math.inf
        total += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return max(0.0, total)
