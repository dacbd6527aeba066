"""Model types and validation.

The population model is

    x'(t) = beta(t) * ( sum_j p_j x(t - tau_j(t)) e^{-a_j x(t - sigma_j(t))}
                        - delta * x(t) )

with m >= 1 delay pairs. ``beta``, the delays and initial histories are
TimeExpr functions of absolute time; t0 is where integration starts.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ExprDomainError
from .exprlang import TimeExpr, parse

_OVERRIDE_KEYS = ("zeta_M", "beta_inf", "beta_sup", "tau_max")


def _as_expr(value):
    """Accept a TimeExpr, an expression string, or a plain number."""
    if isinstance(value, TimeExpr):
        return value
    if isinstance(value, (int, float)):
        return parse(repr(float(value)))
    return parse(value)


@dataclass(frozen=True)
class DelayPair:
    """One recruitment term: weight p, decay rate a, delays tau and sigma."""

    p: float
    a: float
    tau: TimeExpr
    sigma: TimeExpr

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "tau", _as_expr(self.tau))
        object.__setattr__(self, "sigma", _as_expr(self.sigma))


@dataclass(frozen=True)
class NicholsonModel:
    delta: float
    beta: TimeExpr
    pairs: tuple
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "beta", _as_expr(self.beta))
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def m(self):
        return len(self.pairs)

    @property
    def p_total(self):
        return sum(pr.p for pr in self.pairs)

    @property
    def a_plus(self):
        return max(pr.a for pr in self.pairs)

    @property
    def a_minus(self):
        return min(pr.a for pr in self.pairs)


@dataclass(frozen=True)
class InitialHistory:
    """Initial state: phi on [t0 - tau_max, t0], with phi(t0) > 0.

    Admissibility (nonnegative on the past, positive at t0) is checked by
    ``check_history`` / the CLI, not at construction.
    """

    phi: TimeExpr

    def __post_init__(self):
        object.__setattr__(self, "phi", _as_expr(self.phi))


@dataclass(frozen=True)
class Aggregates:
    """Scalar summaries the criteria consume.

    ``estimated`` names the members that came from grid sampling rather than
    an exact override; criteria depending on them get flagged.
    """

    p: float
    a_plus: float
    a_minus: float
    tau_max: float
    beta_minus: float
    beta_plus: float
    estimated: frozenset = field(default_factory=frozenset)


@dataclass
class ValidationReport:
    ok: bool
    violations: list
    aggregates: object  # Aggregates or None when sampling itself failed
    horizon: float
    samples: int


@dataclass(frozen=True)
class LinearPair:
    """Lag coefficients of the linearization about K.

    The linearized equation integrated by the kernel is
    u' = beta(t) * (sum_j [coef_tau_j u(t-tau_j) + coef_sigma_j u(t-sigma_j)]
                    - delta u).
    """

    coef_tau: float
    coef_sigma: float
    tau: TimeExpr
    sigma: TimeExpr

    def __post_init__(self):
        object.__setattr__(self, "tau", _as_expr(self.tau))
        object.__setattr__(self, "sigma", _as_expr(self.sigma))


@dataclass(frozen=True)
class LinearDelayModel:
    beta: TimeExpr
    delta: float
    K: float
    pairs: tuple
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _as_expr(self.beta))
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @property
    def m(self):
        return len(self.pairs)

    def coefficient_terms(self):
        """Terms (B, lag) of u'(t) + sum B_j beta(t) u(r_j(t)) = 0.

        B_0 = delta acts at lag None (meaning r(t) = t), then one negative
        coefficient per tau lag and one positive per sigma lag. The tau-lag
        coefficients sum to -delta and the absolute values of the delayed
        coefficients sum to delta + K * sum_j a_j p_j e^{-a_j K}; tests rely
        on both.
        """
        terms = [(self.delta, None)]
        for pr in self.pairs:
            terms.append((-pr.coef_tau, pr.tau))
        for pr in self.pairs:
            terms.append((-pr.coef_sigma, pr.sigma))
        return terms


def rhs(model, t, x_now, delayed):
    """Right-hand side given delayed values [(x_tau_j, x_sigma_j), ...]."""
    acc = 0.0
    for pr, (xt, xs) in zip(model.pairs, delayed):
        acc += pr.p * xt * math.exp(-pr.a * xs)
    return model.beta(t) * (acc - model.delta * x_now)


def linearize(model, K):
    """Linearization about the positive equilibrium K."""
    pairs = tuple(
        LinearPair(
            coef_tau=pr.p * math.exp(-pr.a * K),
            coef_sigma=-pr.a * K * pr.p * math.exp(-pr.a * K),
            tau=pr.tau,
            sigma=pr.sigma,
        )
        for pr in model.pairs
    )
    return LinearDelayModel(
        beta=model.beta, delta=model.delta, K=K, pairs=pairs, t0=model.t0
    )


def _sample_max_delay(model, t_lo, t_hi, n):
    worst = 0.0
    for pr in model.pairs:
        for expr in (pr.tau, pr.sigma):
            vals = expr.eval_array(np.linspace(t_lo, t_hi, n))
            worst = max(worst, float(vals.max()))
    return worst


def validate(model, horizon=None, n=20001, overrides=None):
    """Check model assumptions on a sampling grid and compute Aggregates.

    Parameter positivity is exact; nonnegativity of the delays and the
    positive lower bound on beta are verified on ``n`` uniform samples over
    ``[t0, t0 + horizon]``. The default horizon is 200*(1 + tau_max), with
    tau_max bootstrapped from a preliminary pass (or taken from an override).
    Overrides (beta_inf, beta_sup, tau_max) replace the sampled estimates and
    are sanity-checked against the samples.
    """
    overrides = dict(overrides or {})
    violations = []
    for key in overrides:
        if key not in _OVERRIDE_KEYS:
            violations.append(f"overrides.{key}: unknown override")

    if model.delta <= 0:
        violations.append("delta must be positive")
    if not model.pairs:
        violations.append("at least one delay pair is required")
    for j, pr in enumerate(model.pairs):
        if pr.p <= 0:
            violations.append(f"pairs[{j}].p must be positive")
        if pr.a <= 0:
            violations.append(f"pairs[{j}].a must be positive")

    t0 = model.t0
    aggregates = None
    if model.pairs:
        try:
            tau_override = overrides.get("tau_max")
            if horizon is None:
                tau_boot = (
                    float(tau_override)
                    if tau_override is not None
                    else _sample_max_delay(model, t0, t0 + 200.0, min(n, 20001))
                )
                horizon = 200.0 * (1.0 + max(tau_boot, 0.0))
            ts = np.linspace(t0, t0 + horizon, n)

            tau_max_s = 0.0
            for j, pr in enumerate(model.pairs):
                for name, expr in (("tau", pr.tau), ("sigma", pr.sigma)):
                    vals = expr.eval_array(ts)
                    lo = float(vals.min())
                    if lo < 0.0:
                        t_bad = float(ts[int(vals.argmin())])
                        violations.append(
                            f"pairs[{j}].{name} must be nonnegative "
                            f"(sampled {lo:.6g} at t={t_bad:.6g})"
                        )
                    tau_max_s = max(tau_max_s, float(vals.max()))

            beta_vals = model.beta.eval_array(ts)
            bmin = float(beta_vals.min())
            bmax = float(beta_vals.max())
            if bmin <= 0.0:
                violations.append(
                    "beta must be bounded below by a positive constant "
                    f"(sampled min {bmin:.6g})"
                )

            estimated = set()
            if tau_override is not None:
                tau_max = float(tau_override)
                if tau_max_s > tau_max + 1e-9:
                    violations.append(
                        f"sampled delay {tau_max_s:.12g} exceeds the tau_max "
                        f"override {tau_max:.12g}"
                    )
            else:
                tau_max = tau_max_s
                estimated.add("tau_max")
            if "beta_inf" in overrides:
                beta_minus = float(overrides["beta_inf"])
                if bmin < beta_minus - 1e-9:
                    violations.append(
                        f"sampled beta {bmin:.12g} falls below the beta_inf "
                        f"override {beta_minus:.12g}"
                    )
            else:
                beta_minus = bmin
                estimated.add("beta_minus")
            if "beta_sup" in overrides:
                beta_plus = float(overrides["beta_sup"])
                if bmax > beta_plus + 1e-9:
                    violations.append(
                        f"sampled beta {bmax:.12g} exceeds the beta_sup "
                        f"override {beta_plus:.12g}"
                    )
            else:
                beta_plus = bmax
                estimated.add("beta_plus")

            aggregates = Aggregates(
                p=model.p_total,
                a_plus=model.a_plus,
                a_minus=model.a_minus,
                tau_max=tau_max,
                beta_minus=beta_minus,
                beta_plus=beta_plus,
                estimated=frozenset(estimated),
            )
        except ExprDomainError as exc:
            violations.append(f"expression domain error while sampling: {exc}")
            aggregates = None
    if horizon is None:
        horizon = 0.0
    return ValidationReport(
        ok=not violations,
        violations=violations,
        aggregates=aggregates,
        horizon=horizon,
        samples=n,
    )


def check_history(history, model, tau_max, n=2001):
    """Admissibility of the initial history: phi >= 0 on the past window
    [t0 - tau_max, t0] (sampled) and phi(t0) > 0. Returns violations."""
    violations = []
    t0 = model.t0
    try:
        at_start = history.phi(t0)
        if not at_start > 0.0:
            violations.append(
                f"history must be positive at t0 (phi({t0:g}) = {at_start:.6g})"
            )
        if tau_max > 0.0:
            ts = np.linspace(t0 - tau_max, t0, n)
            vals = history.phi.eval_array(ts)
            lo = float(vals.min())
            if lo < 0.0:
                t_bad = float(ts[int(vals.argmin())])
                violations.append(
                    "history must be nonnegative on the delay window "
                    f"(sampled {lo:.6g} at t={t_bad:.6g})"
                )
    except ExprDomainError as exc:
        violations.append(f"history expression domain error: {exc}")
    return violations
