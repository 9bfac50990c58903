"""Golden-section minimisation on a logarithmic bandwidth scale."""

from __future__ import annotations

import math
from typing import Callable, Tuple

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_log(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-3,
    max_iters: int = 60,
) -> Tuple[float, float, int]:
    """Minimise ``f(h)`` for ``h`` in ``[lo, hi]``, searching over ``log h``.

    Stops once ``hi / lo <= 1 + rel_tol`` or after ``max_iters`` bracket
    reductions. Returns ``(h_best, f(h_best), iterations)`` where ``h_best`` is
    the best point evaluated (bracket midpoint when the bracket is already
    collapsed).
    """
    a, b = math.log(lo), math.log(hi)
    stop = math.log1p(rel_tol)
    if b - a <= stop:
        h = math.exp(0.5 * (a + b))
        return h, f(h), 1

    c = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    it = 0
    while b - a > stop and it < max_iters:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI2 * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(math.exp(d))
    if fc <= fd:
        return math.exp(c), fc, it
    return math.exp(d), fd, it
