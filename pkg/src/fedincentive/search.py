"""Scalar search helpers for concave objectives."""

from __future__ import annotations

import math
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-12,
    maxiter: int = 500,
) -> tuple[float, float, int]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x), iterations)``. ``xtol`` is relative to ``hi - lo``.
    """
    a, b = float(lo), float(hi)
    width0 = b - a
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while (b - a) > xtol * width0 and it < maxiter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc, it
    return d, fd, it
