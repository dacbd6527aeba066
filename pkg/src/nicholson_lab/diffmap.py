"""Scalar feedback map h and Schwarzian analysis.

For zeta >= 0 set theta = K e^{-delta zeta} and mu = 1 - e^{-delta zeta}.
The map

    h(x) = theta / (1 - mu f(x))

fixes K, is decreasing where defined, and bounds the asymptotic behavior of
trajectories; its attractivity at K (negative Schwarzian plus multiplier in
[-1, 0)) underwrites the route to global attractivity via the three map
conditions checked in ``criteria``. Since h is a Moebius function of f, the
Schwarzian of h equals that of f.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import equilibria
from .errors import MapUndefined
from .verdicts import BOUNDARY_TOL, FAILS, HOLDS, Verdict, make_verdict


def schwarzian_f(model, x, form="quotient"):
    """Schwarzian derivative of f at x (scalar or array).

    ``form`` picks the evaluation route: "quotient" computes
    f'''/f' - 1.5 (f''/f')^2 from the derivative sums, "double_sum" the
    equivalent pair-sum expression. Both factor out the slowest exponential
    so the value stays defined arbitrarily far right, where the raw
    derivatives underflow. A single pair has the constant value -a^2/2.
    """
    if form not in ("quotient", "double_sum"):
        raise ValueError(f"unknown form {form!r}")
    scalar = np.isscalar(x) or getattr(x, "ndim", 0) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if model.m == 1:
        a = model.pairs[0].a
        out = np.full_like(xs, -0.5 * a * a)
        return float(out[0]) if scalar else out
    a_ref = model.a_minus
    ps = np.array([pr.p for pr in model.pairs])
    as_ = np.array([pr.a for pr in model.pairs])
    # w[j, i] = p_j e^{-(a_j - a_ref) x_i}, bounded for x -> +inf
    w = ps[:, None] * np.exp(-(as_[:, None] - a_ref) * xs[None, :])
    if form == "quotient":
        s1 = (w * as_[:, None]).sum(axis=0)
        s2 = (w * (as_**2)[:, None]).sum(axis=0)
        s3 = (w * (as_**3)[:, None]).sum(axis=0)
        out = s3 / s1 - 1.5 * (s2 / s1) ** 2
    else:
        coef = (
            (as_[:, None] ** 2)
            * as_[None, :]
            * (2.0 * as_[:, None] - 3.0 * as_[None, :])
        )
        num = np.einsum("jk,ik,ji->k", w, w, coef)
        den = 2.0 * ((w * as_[:, None]).sum(axis=0)) ** 2
        out = num / den
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class MapSpec:
    """The map h(x) = theta / (1 - mu f(x)) built at a given zeta."""

    model: object
    K: float
    zeta: float
    theta: float
    mu: float
    theta_1: float  # f(theta_1) = 1/mu; None when mu = 0 (constant map)


def _f_scalar(model, x):
    acc = 0.0
    for pr in model.pairs:
        acc += pr.p * math.exp(-pr.a * x)
    return acc / model.delta


def _solve_theta1(model, mu):
    """Root of f(x) = 1/mu over the real line (f is a decreasing bijection
    onto (0, inf)); negative when 1/mu >= f(0)."""
    target = 1.0 / mu
    lo, hi = 0.0, 1.0
    if _f_scalar(model, 0.0) <= target:
        hi = 0.0
        lo = -1.0
        while _f_scalar(model, lo) <= target:
            lo *= 2.0
            if lo < -1e6:  # pragma: no cover
                raise RuntimeError("failed to bracket theta_1")
    else:
        while _f_scalar(model, hi) >= target:
            lo = hi
            hi *= 2.0
            if hi > 1e308:  # pragma: no cover
                raise RuntimeError("failed to bracket theta_1")
    for _ in range(200):
        if hi - lo <= 1e-14 * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if _f_scalar(model, mid) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def build_map(model, K, zeta):
    """Construct MapSpec; raises MapUndefined when (1-e^{-dz}) f(theta) >= 1."""
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    dz = model.delta * zeta
    theta = K * math.exp(-dz)
    mu = -math.expm1(-dz)  # 1 - e^{-dz}
    if mu > 0.0:
        value = mu * _f_scalar(model, theta)
        if value >= 1.0:
            raise MapUndefined(value)
        theta_1 = _solve_theta1(model, mu)
    else:
        theta_1 = None
    return MapSpec(model=model, K=K, zeta=zeta, theta=theta, mu=mu, theta_1=theta_1)


def h_eval(map_spec, x, order=0):
    """h(x) (order 0) or h'(x) (order 1); raises MapUndefined where
    1 - mu f(x) <= 0 (never happens for x >= theta on a well-defined map)."""
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    fx = _f_scalar(map_spec.model, x)
    g = 1.0 - map_spec.mu * fx
    if g <= 0.0:
        raise MapUndefined(map_spec.mu * fx)
    if order == 0:
        return map_spec.theta / g
    fp = equilibria.f_eval(map_spec.model, x, order=1)
    return map_spec.theta * map_spec.mu * fp / (g * g)


def h_prime_at_K(map_spec):
    """h'(K) = K (e^{delta zeta} - 1) f'(K)."""
    growth = math.expm1(map_spec.model.delta * map_spec.zeta)
    return map_spec.K * growth * equilibria.f_eval(map_spec.model, map_spec.K, order=1)


def _h_array(map_spec, xs):
    fx = equilibria.f_eval(map_spec.model, xs)
    g = 1.0 - map_spec.mu * fx
    if np.any(g <= 0.0):
        bad = float((map_spec.mu * fx).max())
        raise MapUndefined(bad)
    return map_spec.theta / g


def iterate(map_spec, x0, n):
    """Orbit [x0, h(x0), ..., h^n(x0)]. Requires x0 >= theta."""
    if x0 < map_spec.theta - 1e-12 * (1.0 + abs(map_spec.theta)):
        raise ValueError(f"x0={x0!r} is below theta={map_spec.theta!r}")
    orbit = np.empty(n + 1, dtype=np.float64)
    orbit[0] = x0
    x = float(x0)
    theta = map_spec.theta
    mu = map_spec.mu
    model = map_spec.model
    for i in range(1, n + 1):
        g = 1.0 - mu * _f_scalar(model, x)
        if g <= 0.0:
            raise MapUndefined(1.0 - g)
        x = theta / g
        orbit[i] = x
    return orbit


def expansive_interval_search(map_spec, x_hi, n_grid=2001):
    """First grid pair (c, d), c < d, with [c, d] contained in h([c, d]),
    i.e. h(d) <= c and h(c) >= d. Returns None when no pair qualifies."""
    grid = np.linspace(map_spec.theta, x_hi, n_grid)
    hv = _h_array(map_spec, grid)
    # rows index c, columns index d
    cond = (hv[None, :] <= grid[:, None]) & (hv[:, None] >= grid[None, :])
    cond &= np.triu(np.ones((n_grid, n_grid), dtype=bool), k=1)
    hits = np.argwhere(cond)
    if len(hits) == 0:
        return None
    ci, di = hits[0]
    return float(grid[ci]), float(grid[di])


def attractor_check(
    map_spec,
    x_hi,
    n_grid=2001,
    orbit_points=101,
    orbit_tol=1e-6,
    orbit_max_iter=20000,
    corroborate=True,
):
    """Verdict on K attracting all positive orbits of h on [theta, x_hi].

    Holds when the sampled Schwarzian stays negative on the grid and
    -1 <= h'(K) < 0 (inclusive left end; |h'(K)| = 1 within tolerance
    reports ``boundary``, which satisfies). mu = 0 is the constant map at K
    and holds degenerately. When satisfied and ``corroborate`` is set, orbits
    from ``orbit_points`` seeds across [theta, x_hi] are iterated toward K;
    seeds that fail to come within ``orbit_tol`` inside the budget add a
    ``corroboration-incomplete`` flag (expected at the multiplier boundary,
    where convergence is sublinear).
    """
    model = map_spec.model
    inputs = {
        "K": map_spec.K,
        "zeta": map_spec.zeta,
        "theta": map_spec.theta,
        "mu": map_spec.mu,
        "x_hi": x_hi,
    }
    if map_spec.mu == 0.0:
        return Verdict(
            status=HOLDS,
            lhs=0.0,
            rhs=1.0,
            margin=1.0,
            strict=False,
            inputs=inputs,
            flags=("degenerate-constant-map",),
        )
    grid = np.linspace(map_spec.theta, x_hi, n_grid)
    sf_max = float(schwarzian_f(model, grid).max())
    hp = h_prime_at_K(map_spec)
    inputs["sf_max"] = sf_max
    inputs["h_prime_K"] = hp
    verdict = make_verdict(abs(hp), 1.0, strict=False, inputs=inputs)
    if sf_max >= -BOUNDARY_TOL:
        verdict = Verdict(
            status=FAILS,
            lhs=verdict.lhs,
            rhs=verdict.rhs,
            margin=verdict.margin,
            strict=False,
            inputs=inputs,
            flags=("schwarzian-nonnegative",),
        )
    if not (verdict.satisfied and corroborate):
        return verdict
    converged = 0
    for seed in np.linspace(map_spec.theta, x_hi, orbit_points):
        x = float(seed)
        ok = False
        for _ in range(orbit_max_iter):
            if abs(x - map_spec.K) <= orbit_tol:
                ok = True
                break
            x = map_spec.theta / (1.0 - map_spec.mu * _f_scalar(model, x))
        converged += ok
    inputs = dict(inputs)
    inputs["orbits_converged"] = converged
    inputs["orbit_points"] = orbit_points
    inputs["orbit_tol"] = orbit_tol
    inputs["orbit_max_iter"] = orbit_max_iter
    flags = verdict.flags
    if converged < orbit_points:
        flags = flags + ("corroboration-incomplete",)
    return Verdict(
        status=verdict.status,
        lhs=verdict.lhs,
        rhs=verdict.rhs,
        margin=verdict.margin,
        strict=False,
        inputs=inputs,
        flags=flags,
    )


def export_orbit_csv(orbit, path):
    """Write an orbit as ``n,x`` rows at 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n,x\n")
        for i, v in enumerate(orbit):
            fh.write(f"{i},{v:.17g}\n")


def export_cobweb_csv(orbit, path):
    """Write consecutive orbit pairs as ``x_n,x_next`` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x_n,x_next\n")
        for a, b in zip(orbit[:-1], orbit[1:]):
            fh.write(f"{a:.17g},{b:.17g}\n")
