"""Mechanical checks of the dynamical criteria.

Each check returns a Verdict with the literal inequality sides, so reports
show exactly what was compared. Criteria needing the positive equilibrium or
a delay-load bound zeta_M come out ``inapplicable`` when those do not exist.

zeta_M is sup over late t of the largest window integral of beta over
[t - sigma_j(t), t]. It enters every delay-dependent bound below; sampled
estimates (vs. exact scenario overrides) mark dependent verdicts with an
``estimated-input`` flag.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import diffmap, equilibria
from .verdicts import (
    BOUNDARY_TOL,
    FAILS,
    HOLDS,
    Verdict,
    combine,
    inapplicable,
    make_verdict,
)

CLAIM_GRID_POINTS = 10001

CRITERION_NAMES = (
    "extinction",
    "las_general",
    "las_zeta",
    "las_zeta_coarse",
    "las_zeta_log",
    "ga_m1",
    "gas_m1",
    "ga_multi_h1",
    "ga_multi_h2",
    "ga_multi",
    "ga_multi_nok",
    "ga_multi_nok_combined",
    "map_schwarzian",
    "map_slope",
    "map_domain",
    "map_route",
)


def check_extinction(model):
    """Zero is the global attractor iff p <= delta.

    Strict inequality adds the ``exponential`` flag (decay at an exponential
    rate); equality within tolerance keeps ``holds`` but marks the
    exponential part as boundary.
    """
    p = model.p_total
    delta = model.delta
    margin = delta - p
    inputs = {"p": p, "delta": delta}
    if margin > BOUNDARY_TOL:
        return Verdict(
            status=HOLDS,
            lhs=p,
            rhs=delta,
            margin=margin,
            strict=False,
            inputs=inputs,
            flags=("exponential",),
        )
    if margin >= -BOUNDARY_TOL:
        return Verdict(
            status=HOLDS,
            lhs=p,
            rhs=delta,
            margin=margin,
            strict=False,
            inputs=inputs,
            flags=("exponential-boundary",),
        )
    return Verdict(
        status=FAILS, lhs=p, rhs=delta, margin=margin, strict=False, inputs=inputs
    )


def permanence_bounds(model, K, aggregates):
    """Asymptotic corridor for positive solutions when p > delta:

        K e^{-2 delta beta_plus tau}  <=  liminf,
        limsup  <=  K e^{2 (delta + p) beta_plus tau},

    with tau the supremum of all delays. Returns (m_lo, M_hi)."""
    tau = aggregates.tau_max
    bp = aggregates.beta_plus
    delta = model.delta
    p = model.p_total
    m_lo = K * math.exp(-2.0 * delta * bp * tau)
    try:
        M_hi = K * math.exp(2.0 * (delta + p) * bp * tau)
    except OverflowError:
        M_hi = math.inf
    return m_lo, M_hi


def _weights_sum(model, K):
    return sum(pr.a * pr.p * math.exp(-pr.a * K) for pr in model.pairs)


@dataclass(frozen=True)
class LocalStability:
    """The local-stability family, strongest to weakest rhs."""

    general: Verdict
    simple: Verdict
    simple_coarse: Verdict
    single_log: Verdict


def check_local_stability(model, K, zeta_M, las_lhs=None, flags=()):
    """Local asymptotic stability of K via small delay load. All strict.

    general:       sup_t sum_j w_j I_j(t) < W / (2 delta + K W),
                    w_j = a_j p_j e^{-a_j K}, W = sum_j w_j
    simple:        zeta_M < 1 / (2 delta + K W)
    simple_coarse: zeta_M < 1 / (delta (2 + a_plus K))
    single_log:    zeta_M < 1 / (delta (2 + log(p/delta)))   [one pair only]

    Without a sampled sup of the weighted sum, the general lhs falls back to
    the uniform bound zeta_M * W (each I_j <= zeta_M eventually).
    """
    delta = model.delta
    W = _weights_sum(model, K)
    inputs = {"K": K, "zeta_M": zeta_M, "weights_sum": W}
    if las_lhs is None:
        lhs_general = zeta_M * W
        gen_inputs = dict(inputs, lhs_source="uniform-bound")
    else:
        lhs_general = las_lhs
        gen_inputs = dict(inputs, lhs_source="sampled-sum")
    general = make_verdict(
        lhs_general, W / (2.0 * delta + K * W), strict=True, inputs=gen_inputs,
        flags=flags,
    )
    simple = make_verdict(
        zeta_M, 1.0 / (2.0 * delta + K * W), strict=True, inputs=inputs, flags=flags
    )
    simple_coarse = make_verdict(
        zeta_M,
        1.0 / (delta * (2.0 + model.a_plus * K)),
        strict=True,
        inputs=inputs,
        flags=flags,
    )
    if model.m == 1:
        ratio = math.log(model.p_total / delta)
        single_log = make_verdict(
            zeta_M,
            1.0 / (delta * (2.0 + ratio)),
            strict=True,
            inputs=dict(inputs, log_ratio=ratio),
            flags=flags,
        )
    else:
        single_log = inapplicable(
            f"single-pair criterion; model has m={model.m}", inputs
        )
    return LocalStability(
        general=general,
        simple=simple,
        simple_coarse=simple_coarse,
        single_log=single_log,
    )


def check_ga_m1(model, zeta_M, flags=()):
    """Single-pair global attractivity: (e^{delta zeta_M} - 1) log(p/delta) <= 1."""
    if model.m != 1:
        return inapplicable(f"single-pair criterion; model has m={model.m}")
    p = model.p_total
    delta = model.delta
    if p <= delta:
        return inapplicable("no positive equilibrium: p <= delta")
    dz = delta * zeta_M
    ratio = math.log(p / delta)
    return make_verdict(
        math.expm1(dz) * ratio,
        1.0,
        strict=False,
        inputs={"zeta_M": zeta_M, "delta_zeta": dz, "log_ratio": ratio},
        flags=flags,
    )


def check_gas_m1(model, zeta_M, flags=()):
    """Single-pair global asymptotic stability, split at c(delta zeta_M).

    With dz = delta*zeta_M and c = 2 dz / (e^dz - dz - 1):
      case i  (log(p/delta) <= c): requires dz (2 + log(p/delta)) < 1 (strict)
      case ii (log(p/delta) >  c): requires (e^dz - 1) log(p/delta) <= 1
    dz = 0 degenerates to case i with c = +inf and lhs 0.
    """
    if model.m != 1:
        return inapplicable(f"single-pair criterion; model has m={model.m}")
    p = model.p_total
    delta = model.delta
    if p <= delta:
        return inapplicable("no positive equilibrium: p <= delta")
    dz = delta * zeta_M
    ratio = math.log(p / delta)
    if dz == 0.0:
        c = math.inf
    else:
        c = 2.0 * dz / (math.expm1(dz) - dz)
    inputs = {"zeta_M": zeta_M, "delta_zeta": dz, "log_ratio": ratio, "c": c}
    if ratio <= c:
        return make_verdict(
            dz * (2.0 + ratio), 1.0, strict=True, inputs=inputs, case="i",
            flags=flags,
        )
    return make_verdict(
        math.expm1(dz) * ratio, 1.0, strict=False, inputs=inputs, case="ii",
        flags=flags,
    )


def check_ga_multi(model, K, zeta_M, flags=()):
    """Global attractivity for any m: the decay-rate spread condition
    a_plus/a_minus < 3/2 together with a_plus K (e^{delta zeta_M} - 1) <= 1.

    Returns (ratio verdict, size verdict, combined verdict)."""
    ratio = model.a_plus / model.a_minus
    h1 = make_verdict(
        ratio, 1.5, strict=True, inputs={"a_plus": model.a_plus, "a_minus": model.a_minus}
    )
    dz = model.delta * zeta_M
    lhs = model.a_plus * K * math.expm1(dz)
    h2 = make_verdict(
        lhs,
        1.0,
        strict=False,
        inputs={"K": K, "zeta_M": zeta_M, "delta_zeta": dz, "a_plus": model.a_plus},
        flags=flags,
    )
    return h1, h2, combine([h1, h2], inputs={"zeta_M": zeta_M})


def check_ga_multi_noK(model, zeta_M, flags=()):
    """K-free variant of the size condition:
    (a_plus/a_minus) (e^{delta zeta_M} - 1) log(p/delta) <= 1.

    Using a_minus K <= log(p/delta) <= a_plus K this implies the K-based
    size condition; the full criterion still needs the rate-spread bound,
    combined by the report assembly."""
    p = model.p_total
    delta = model.delta
    if p <= delta:
        return inapplicable("no positive equilibrium: p <= delta")
    ratio = model.a_plus / model.a_minus
    dz = delta * zeta_M
    log_ratio = math.log(p / delta)
    return make_verdict(
        ratio * math.expm1(dz) * log_ratio,
        1.0,
        strict=False,
        inputs={
            "zeta_M": zeta_M,
            "delta_zeta": dz,
            "a_ratio": ratio,
            "log_ratio": log_ratio,
        },
        flags=flags,
    )


def check_claims_route(model, K, zeta_M, x_hi, n_grid=CLAIM_GRID_POINTS, flags=()):
    """The three map conditions that together give global attractivity:

      (i)   Sf < 0 on a log-spaced grid over [theta, x_hi] (strict),
      (ii)  |K (e^{delta zeta_M} - 1) f'(K)| <= 1,
      (iii) (1 - e^{-delta zeta_M}) f(theta) < 1 (map well defined, strict),

    with theta = K e^{-delta zeta_M}. Returns (i, ii, iii, combined)."""
    delta = model.delta
    dz = delta * zeta_M
    theta = K * math.exp(-dz)
    mu = -math.expm1(-dz)
    hi = min(max(x_hi, theta), 1e300)
    grid = np.geomspace(theta, hi, n_grid) if hi > theta else np.full(n_grid, theta)
    sf_max = float(diffmap.schwarzian_f(model, grid).max())
    inputs = {
        "K": K,
        "zeta_M": zeta_M,
        "theta": theta,
        "grid_hi": hi,
        "grid_points": n_grid,
    }
    c_sf = make_verdict(sf_max, 0.0, strict=True, inputs=inputs, flags=flags)
    slope = abs(K * math.expm1(dz) * equilibria.f_eval(model, K, order=1))
    c_slope = make_verdict(slope, 1.0, strict=False, inputs=inputs, flags=flags)
    c_domain = make_verdict(
        mu * equilibria.f_eval(model, theta), 1.0, strict=True, inputs=inputs,
        flags=flags,
    )
    return c_sf, c_slope, c_domain, combine(
        [c_sf, c_slope, c_domain], inputs={"zeta_M": zeta_M}
    )


@dataclass
class CriteriaReport:
    """Every criterion verdict plus the shared numeric inputs."""

    inputs: dict
    extinction: Verdict
    permanence: dict
    las_general: Verdict
    las_zeta: Verdict
    las_zeta_coarse: Verdict
    las_zeta_log: Verdict
    ga_m1: Verdict
    gas_m1: Verdict
    ga_multi_h1: Verdict
    ga_multi_h2: Verdict
    ga_multi: Verdict
    ga_multi_nok: Verdict
    ga_multi_nok_combined: Verdict
    map_schwarzian: Verdict
    map_slope: Verdict
    map_domain: Verdict
    map_route: Verdict

    def criterion_verdicts(self):
        return {
            "extinction": self.extinction,
            "las_general": self.las_general,
            "las_zeta": self.las_zeta,
            "las_zeta_coarse": self.las_zeta_coarse,
            "las_zeta_log": self.las_zeta_log,
            "ga_m1": self.ga_m1,
            "gas_m1": self.gas_m1,
            "ga_multi_h1": self.ga_multi_h1,
            "ga_multi_h2": self.ga_multi_h2,
            "ga_multi": self.ga_multi,
            "ga_multi_nok": self.ga_multi_nok,
            "ga_multi_nok_combined": self.ga_multi_nok_combined,
            "map_schwarzian": self.map_schwarzian,
            "map_slope": self.map_slope,
            "map_domain": self.map_domain,
            "map_route": self.map_route,
        }

    @property
    def global_attractivity_holds(self):
        """True when any criterion establishing a global attractor is
        satisfied (extinction makes zero the attractor, the rest K)."""
        candidates = (
            self.extinction,
            self.ga_m1,
            self.gas_m1,
            self.ga_multi,
            self.ga_multi_nok_combined,
            self.map_route,
        )
        return any(v.satisfied for v in candidates)

    def to_dict(self):
        return {
            "inputs": dict(self.inputs),
            "criteria": {
                name: v.to_dict() for name, v in self.criterion_verdicts().items()
            },
            "permanence": dict(self.permanence),
            "global_attractivity_holds": self.global_attractivity_holds,
        }


def assemble_report(
    model,
    aggregates,
    equilibrium=None,
    zeta_M=None,
    zeta_source="sampled",
    zeta_per_pair=(),
    las_lhs=None,
):
    """Run every criterion and collect a CriteriaReport.

    ``equilibrium`` is the EquilibriumResult (None when p <= delta),
    ``zeta_M`` the delay-load bound with its provenance in ``zeta_source``
    ("sampled" estimates flag dependent verdicts as estimated-input;
    "override" values are exact). ``las_lhs`` optionally carries the sampled
    sup of the weighted window-integral sum for the general test.
    """
    delta = model.delta
    p = model.p_total
    inputs = {
        "m": model.m,
        "delta": delta,
        "p": p,
        "a_plus": model.a_plus,
        "a_minus": model.a_minus,
        "t0": model.t0,
    }
    if aggregates is not None:
        inputs.update(
            {
                "tau_max": aggregates.tau_max,
                "beta_minus": aggregates.beta_minus,
                "beta_plus": aggregates.beta_plus,
                "estimated_aggregates": sorted(aggregates.estimated),
            }
        )
    if zeta_M is not None:
        inputs["zeta_M"] = zeta_M
        inputs["zeta_source"] = zeta_source
        if zeta_per_pair:
            inputs["zeta_per_pair"] = list(zeta_per_pair)

    extinction = check_extinction(model)
    zflags = ("estimated-input",) if zeta_source == "sampled" else ()

    if equilibrium is None:
        why = "no positive equilibrium: p <= delta"
        permanence = {"status": "inapplicable", "reason": why}
        las = LocalStability(
            general=inapplicable(why),
            simple=inapplicable(why),
            simple_coarse=inapplicable(why),
            single_log=inapplicable(why),
        )
        ga_m1 = inapplicable(why)
        gas_m1 = inapplicable(why)
        h1 = make_verdict(
            model.a_plus / model.a_minus,
            1.5,
            strict=True,
            inputs={"a_plus": model.a_plus, "a_minus": model.a_minus},
        )
        h2 = inapplicable(why)
        ga_multi = inapplicable(why)
        nok = inapplicable(why)
        nok_combined = inapplicable(why)
        c_sf = inapplicable(why)
        c_slope = inapplicable(why)
        c_domain = inapplicable(why)
        c_comb = inapplicable(why)
    else:
        K = equilibrium.K
        inputs["K"] = K
        inputs["K_residual"] = equilibrium.residual
        if zeta_M is not None:
            inputs["las_log_product"] = delta * zeta_M * (2.0 + math.log(p / delta))
        if aggregates is not None:
            m_lo, M_hi = permanence_bounds(model, K, aggregates)
            permanence = {
                "status": "computed",
                "m_lo": m_lo,
                "M_hi": M_hi,
                "estimated": sorted(
                    aggregates.estimated & {"tau_max", "beta_plus"}
                ),
            }
        else:
            permanence = {"status": "inapplicable", "reason": "no aggregates"}
            M_hi = None
        if zeta_M is None:
            why = "no zeta_M available"
            las = LocalStability(
                general=inapplicable(why),
                simple=inapplicable(why),
                simple_coarse=inapplicable(why),
                single_log=inapplicable(why),
            )
            ga_m1 = inapplicable(why)
            gas_m1 = inapplicable(why)
            h1, _, _ = check_ga_multi(model, K, 0.0)
            h2 = inapplicable(why)
            ga_multi = inapplicable(why)
            nok = inapplicable(why)
            nok_combined = inapplicable(why)
            c_sf = inapplicable(why)
            c_slope = inapplicable(why)
            c_domain = inapplicable(why)
            c_comb = inapplicable(why)
        else:
            las = check_local_stability(model, K, zeta_M, las_lhs, flags=zflags)
            ga_m1 = check_ga_m1(model, zeta_M, flags=zflags)
            gas_m1 = check_gas_m1(model, zeta_M, flags=zflags)
            h1, h2, ga_multi = check_ga_multi(model, K, zeta_M, flags=zflags)
            nok = check_ga_multi_noK(model, zeta_M, flags=zflags)
            nok_combined = combine([h1, nok], inputs={"zeta_M": zeta_M})
            x_hi = M_hi if M_hi is not None else K * math.e**4
            c_sf, c_slope, c_domain, c_comb = check_claims_route(
                model, K, zeta_M, x_hi, flags=zflags
            )

    return CriteriaReport(
        inputs=inputs,
        extinction=extinction,
        permanence=permanence,
        las_general=las.general,
        las_zeta=las.simple,
        las_zeta_coarse=las.simple_coarse,
        las_zeta_log=las.single_log,
        ga_m1=ga_m1,
        gas_m1=gas_m1,
        ga_multi_h1=h1,
        ga_multi_h2=h2,
        ga_multi=ga_multi,
        ga_multi_nok=nok,
        ga_multi_nok_combined=nok_combined,
        map_schwarzian=c_sf,
        map_slope=c_slope,
        map_domain=c_domain,
        map_route=c_comb,
    )
