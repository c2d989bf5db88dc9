#!/usr/bin/env python3
"""
Lambert W (principal branch) on the reals.

The optimal offloading / result-return rates are closed forms in
1 + W0((x - 1)/e). ``one_plus_w`` evaluates that quantity directly from x,
which keeps full relative precision as x -> 0 where the argument of W0
approaches the branch point -1/e.
"""

from __future__ import annotations

import math

from ..errors import DomainError

INV_E = math.exp(-1.0)

BRANCH_SNAP = 1e-15
HALLEY_TOL = 1e-15
MAX_ITER = 64

# |u| below which (u - 1) e^u + 1 is summed as a series
SERIES_CUTOFF = 0.1


def _initial_guess(y: float) -> float:
    if y < -0.25:
        # branch-point expansion in p = sqrt(2 (e y + 1))
        p = math.sqrt(max(2.0 * (math.e * y + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if y <= 3.0:
        # Winitzki
        l1 = math.log1p(y)
        return l1 * (1.0 - math.log1p(l1) / (2.0 + l1))
    l1 = math.log(y)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w0(y: float) -> float:
    """Lambert W 主分支

    Principal-branch Lambert W: the w >= -1 with w * exp(w) = y.
    """
    y = float(y)
    if math.isnan(y):
        raise DomainError("lambert_w0: argument is NaN")
    if math.isinf(y):
        if y > 0:
            return math.inf
        raise DomainError("lambert_w0: argument is -inf")

    d = y + INV_E
    if abs(d) <= BRANCH_SNAP:
        return -1.0
    if d < 0:
        raise DomainError(f"lambert_w0: argument {y!r} is below -1/e")
    if y == 0.0:
        return 0.0

    w = _initial_guess(y)
    for _ in range(MAX_ITER):
        ew = math.exp(w)
        f = w * ew - y
        if f == 0.0:
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if w < -1.0:
            w = -1.0
        if abs(dw) <= HALLEY_TOL * (1.0 + abs(w)):
            break
    return w


def _shifted_phi(u: float) -> float:
    """(u - 1) e^u + 1, cancellation-free near u = 0."""
    if abs(u) < SERIES_CUTOFF:
        # sum_{n>=2} (n - 1) u^n / n!
        total = 0.0
        term = u * u / 2.0  # u^n / n! at n = 2
        n = 2
        while True:
            contrib = (n - 1) * term
            total += contrib
            if abs(contrib) <= 1e-18 * abs(total):
                break
            n += 1
            term *= u / n
        return total
    return (u - 1.0) * math.exp(u) + 1.0


def one_plus_w(x: float) -> float:
    """1 + W(x)

    1 + W0((x - 1) / e) for x >= 0.

    Equivalently the u >= 0 solving (u - 1) e^u + 1 = x.
    """
    x = float(x)
    if math.isnan(x) or x < 0:
        raise DomainError(f"one_plus_w: argument {x!r} must be non-negative")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x > 1e-3:
        return 1.0 + lambert_w0((x - 1.0) / math.e)

    # (u - 1) e^u + 1 ~ u^2 / 2 near 0
    p = math.sqrt(2.0 * x)
    u = p - p * p / 3.0 + 11.0 / 72.0 * p**3
    for _ in range(MAX_ITER):
        du = (_shifted_phi(u) - x) / (u * math.exp(u))
        u -= du
        if abs(du) <= HALLEY_TOL * abs(u):
            break
    return u
