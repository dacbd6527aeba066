"""Equilibrium structure of the averaged nonlinearity.

Everything here concerns f(x) = (1/delta) * sum_j p_j e^{-a_j x}: its
derivatives, and the positive equilibrium K solving f(K) = 1, which exists
exactly when p = sum_j p_j > delta.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import NoPositiveEquilibrium


@dataclass(frozen=True)
class EquilibriumResult:
    K: float
    residual: float  # |f(K) - 1|
    iterations: int


def f_eval(model, x, order=0):
    """k-th derivative of f at x: (1/delta) sum_j p_j (-a_j)^k e^{-a_j x}.

    Accepts a scalar or ndarray x. Mathematically defined for all real x;
    the model semantics only use x >= 0.
    """
    xs = np.asarray(x, dtype=np.float64)
    acc = np.zeros_like(xs)
    for pr in model.pairs:
        acc = acc + pr.p * (-pr.a) ** order * np.exp(-pr.a * xs)
    acc = acc / model.delta
    if np.isscalar(x) or getattr(x, "ndim", 0) == 0:
        return float(acc)
    return acc


def carrying_capacity(model, rel_tol=1e-12, max_iter=200):
    """Positive equilibrium K with f(K) = 1, by bisection.

    Brackets with [0, x_hi], doubling x_hi from 1 until f(x_hi) < 1, then
    bisects until the bracket width is below rel_tol * max(1, K). For a
    single pair the result is cross-checked against (1/a) log(p/delta).
    Raises NoPositiveEquilibrium when p <= delta.
    """
    p = model.p_total
    delta = model.delta
    if p <= delta:
        raise NoPositiveEquilibrium(
            f"no positive equilibrium: p = {p:.12g} <= delta = {delta:.12g}"
        )
    lo = 0.0
    hi = 1.0
    guard = 0
    while f_eval(model, hi) >= 1.0:
        lo = hi
        hi *= 2.0
        guard += 1
        if guard > 2000:  # pragma: no cover
            raise RuntimeError("failed to bracket the equilibrium")
    iterations = 0
    while hi - lo > rel_tol * max(1.0, lo) and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f_eval(model, mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    K = 0.5 * (lo + hi)
    residual = abs(f_eval(model, K) - 1.0)
    if model.m == 1:
        pr = model.pairs[0]
        closed = math.log(pr.p / delta) / pr.a
        if abs(K - closed) > 1e-9 * max(1.0, abs(closed)):  # pragma: no cover
            raise RuntimeError(
                f"bisection K={K!r} disagrees with closed form {closed!r}"
            )
    return EquilibriumResult(K=K, residual=residual, iterations=iterations)
