"""Feedback-map tests: Schwarzian forms, map construction, attractor check."""

import math

import numpy as np
import pytest

from nicholson_lab import equilibria
from nicholson_lab.diffmap import (
    attractor_check,
    build_map,
    expansive_interval_search,
    export_cobweb_csv,
    export_orbit_csv,
    h_eval,
    h_prime_at_K,
    iterate,
    schwarzian_f,
)
from nicholson_lab.errors import MapUndefined
from nicholson_lab.model import DelayPair, NicholsonModel
from nicholson_lab.scenario import builtin


def two_pair():
    return builtin("3.9").model


def single_pair(delta=0.1, p=0.3, a=1.0):
    return NicholsonModel(
        delta=delta,
        beta="1",
        pairs=(DelayPair(p=p, a=a, tau="1", sigma="1"),),
        t0=0.0,
    )


def random_model(rng, m):
    pairs = tuple(
        DelayPair(
            p=float(rng.uniform(0.2, 2.0)),
            a=float(rng.uniform(0.3, 2.5)),
            tau="1",
            sigma="1",
        )
        for _ in range(m)
    )
    return NicholsonModel(delta=0.05, beta="1", pairs=pairs, t0=0.0)


def test_schwarzian_single_pair_is_constant():
    model = single_pair(a=0.8)
    expected = -0.5 * 0.8 * 0.8
    for x in (0.0, 1.0, 7.5, 300.0):
        assert schwarzian_f(model, x) == expected
    arr = schwarzian_f(model, np.array([0.5, 2.0, 10.0]))
    assert np.all(arr == expected)


def test_schwarzian_forms_agree():
    rng = np.random.default_rng(11)
    for m in (2, 3, 4):
        model = random_model(rng, m)
        xs = rng.uniform(0.0, 30.0, size=40)
        q = schwarzian_f(model, xs, form="quotient")
        d = schwarzian_f(model, xs, form="double_sum")
        assert np.allclose(q, d, rtol=1e-10, atol=0.0)
    with pytest.raises(ValueError, match="unknown form"):
        schwarzian_f(two_pair(), 1.0, form="pade")


def test_schwarzian_matches_raw_derivative_quotient():
    model = two_pair()
    for x in (0.5, 2.0, 5.0, 9.0):
        f1 = equilibria.f_eval(model, x, order=1)
        f2 = equilibria.f_eval(model, x, order=2)
        f3 = equilibria.f_eval(model, x, order=3)
        direct = f3 / f1 - 1.5 * (f2 / f1) ** 2
        assert schwarzian_f(model, x) == pytest.approx(direct, rel=1e-10)


def test_schwarzian_defined_far_right_where_derivatives_underflow():
    model = two_pair()
    assert equilibria.f_eval(model, 1000.0, order=1) == 0.0
    val = schwarzian_f(model, 1000.0)
    assert math.isfinite(val)
    # far right the slowest pair dominates: limit -a_min^2 / 2
    assert val == pytest.approx(-0.32, rel=1e-6)


def test_map_fixes_the_equilibrium():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    for zeta in (0.3, 1.5, 2.2):
        spec = build_map(model, K, zeta)
        assert h_eval(spec, K) == pytest.approx(K, rel=1e-12)


def test_h_eval_derivative_matches_finite_difference():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 1.5)
    e = 1e-6
    for x in (spec.theta, 4.0, K, 6.5):
        fd = (h_eval(spec, x + e) - h_eval(spec, x - e)) / (2.0 * e)
        assert h_eval(spec, x, order=1) == pytest.approx(fd, rel=1e-6)


def test_h_prime_at_K_closed_form():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    for zeta in (0.5, 1.0, 1.5):
        spec = build_map(model, K, zeta)
        hp = h_prime_at_K(spec)
        assert hp == pytest.approx(h_eval(spec, K, order=1), rel=1e-11)
        expected = K * math.expm1(model.delta * zeta) * equilibria.f_eval(
            model, K, order=1
        )
        assert hp == expected


def test_theta1_single_pair_closed_form():
    model = single_pair(delta=0.1, p=0.3, a=1.0)
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 1.0)
    expected = math.log(spec.mu * model.pairs[0].p / model.delta)
    assert spec.theta_1 == pytest.approx(expected, abs=1e-10)
    # by definition mu * f(theta_1) = 1
    assert spec.mu * equilibria.f_eval(model, spec.theta_1) == pytest.approx(
        1.0, abs=1e-10
    )


def test_schwarzian_of_map_equals_schwarzian_of_f():
    # h is a Moebius transform of f, so their Schwarzians coincide.
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 1.5)

    def sh_numeric(x, e):
        hm2, hm1, h1, h2 = (h_eval(spec, x + k * e) for k in (-2, -1, 1, 2))
        d1 = (h1 - hm1) / (2.0 * e)
        d2 = (h1 - 2.0 * h_eval(spec, x) + hm1) / (e * e)
        d3 = (h2 - 2.0 * h1 + 2.0 * hm1 - hm2) / (2.0 * e**3)
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    for x in (4.0, 5.5):
        coarse = sh_numeric(x, 0.02)
        fine = sh_numeric(x, 0.01)
        richardson = (4.0 * fine - coarse) / 3.0
        assert richardson == pytest.approx(schwarzian_f(model, x), rel=1e-4)


def test_map_undefined_reports_offending_value():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    with pytest.raises(MapUndefined) as exc:
        build_map(model, K, 40.0)
    assert exc.value.value >= 1.0
    assert f"{exc.value.value}" in str(exc.value)


def test_zero_zeta_gives_degenerate_constant_map():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 0.0)
    assert spec.mu == 0.0
    assert spec.theta == K
    assert spec.theta_1 is None
    verdict = attractor_check(spec, 2.0 * K)
    assert verdict.status == "holds"
    assert "degenerate-constant-map" in verdict.flags
    orbit = iterate(spec, K, 3)
    assert np.all(orbit == K)


def test_no_expansive_interval_when_contracting():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 1.5)
    assert expansive_interval_search(spec, 2.0 * K) is None
    verdict = attractor_check(spec, h_eval(spec, spec.theta))
    assert verdict.satisfied
    assert verdict.inputs["orbits_converged"] == verdict.inputs["orbit_points"]


def test_expansive_interval_appears_past_unit_multiplier():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 2.5)
    assert abs(h_prime_at_K(spec)) > 1.0
    x_hi = h_eval(spec, spec.theta)
    found = expansive_interval_search(spec, x_hi, n_grid=4001)
    assert found is not None
    c, d = found
    assert c < K < d
    assert h_eval(spec, d) <= c
    assert h_eval(spec, c) >= d
    verdict = attractor_check(spec, x_hi)
    assert verdict.status == "fails"


def test_iterate_rejects_points_below_theta():
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 1.5)
    with pytest.raises(ValueError, match="below theta"):
        iterate(spec, spec.theta - 0.1, 5)


def test_orbit_and_cobweb_exports(tmp_path):
    model = two_pair()
    K = equilibria.carrying_capacity(model).K
    spec = build_map(model, K, 1.5)
    orbit = iterate(spec, spec.theta, 10)
    assert len(orbit) == 11
    assert abs(orbit[-1] - K) < abs(orbit[0] - K)
    po = tmp_path / "orbit.csv"
    pc = tmp_path / "cobweb.csv"
    export_orbit_csv(orbit, po)
    export_cobweb_csv(orbit, pc)
    olines = po.read_text().splitlines()
    clines = pc.read_text().splitlines()
    assert olines[0] == "n,x"
    assert clines[0] == "x_n,x_next"
    assert len(olines) == 12
    assert len(clines) == 11
    assert olines[1].startswith("0,")
    first_pair = clines[1].split(",")
    assert float(first_pair[0]) == orbit[0]
    assert float(first_pair[1]) == orbit[1]
