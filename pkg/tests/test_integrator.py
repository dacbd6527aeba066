"""Integrator tests: invariants, convergence order, interpolation, stats."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nicholson_lab.equilibria import carrying_capacity
from nicholson_lab.errors import PositivityLoss
from nicholson_lab.integrator import (
    Trajectory,
    delay_integral_sup,
    export_csv,
    integrate,
    interpolate,
    tail_extrema,
)
from nicholson_lab.model import DelayPair, InitialHistory, NicholsonModel
from nicholson_lab.scenario import builtin


def single_pair_model(delta, beta, p, a, tau, sigma, t0=0.0):
    return NicholsonModel(
        delta=delta,
        beta=beta,
        pairs=(DelayPair(p=p, a=a, tau=tau, sigma=sigma),),
        t0=t0,
    )


def test_equilibrium_history_stays_at_equilibrium():
    model = builtin("3.9").model
    K = carrying_capacity(model).K
    traj = integrate(model, InitialHistory(repr(K)), T=model.t0 + 20.0, h=0.01)
    assert np.max(np.abs(traj.x - K)) <= 1e-9


def no_delay_model():
    # tau = sigma = 0 reduces the stepper to classical RK4 on an ODE.
    return single_pair_model(0.5, "1 + 0.5*sin(t)", 3.0, 1.0, "0", "0")


def no_delay_reference(T, x0=2.0):
    def rhs(t, y):
        b = 1.0 + 0.5 * math.sin(t)
        return [b * (3.0 * y[0] * math.exp(-y[0]) - 0.5 * y[0])]

    sol = solve_ivp(
        rhs, (0.0, T), [x0], method="DOP853", rtol=1e-12, atol=1e-14
    )
    return float(sol.y[0, -1])


def test_no_delay_reduction_matches_ode_reference():
    model = no_delay_model()
    ref = no_delay_reference(10.0)
    traj = integrate(model, InitialHistory("2"), T=10.0, h=0.005)
    assert traj.x[-1] == pytest.approx(ref, abs=1e-6)


def test_no_delay_reduction_converges_at_fourth_order():
    model = no_delay_model()
    ref = no_delay_reference(10.0)
    errs = []
    for h in (0.2, 0.1):
        traj = integrate(model, InitialHistory("2"), T=10.0, h=h)
        errs.append(abs(traj.x[-1] - ref))
    ratio = errs[0] / errs[1]
    assert 12.0 <= ratio <= 20.0


def test_short_delay_uses_provisional_cell_consistently():
    # Delay shorter than the step exercises the predictor/corrector pass.
    model = single_pair_model(0.5, "1", 3.0, 1.0, "0.005", "0.005")
    hist = InitialHistory("2")
    coarse = integrate(model, hist, T=5.0, h=0.01)
    fine = integrate(model, hist, T=5.0, h=0.001)
    assert coarse.x[-1] == pytest.approx(fine.x[-1], abs=1e-7)


def cubic_trajectory():
    ts = np.arange(5, dtype=np.float64) * 0.5
    return Trajectory(
        t0=0.0,
        t_end=2.0,
        h=0.5,
        x=ts**3,
        xp=3.0 * ts**2,
        history=InitialHistory("t^3"),
        hist_lo=-1.0,
    )


def test_hermite_interpolation_reproduces_cubics():
    traj = cubic_trajectory()
    rng = np.random.default_rng(7)
    for t in rng.uniform(0.0, 2.0, size=31):
        assert interpolate(traj, float(t)) == pytest.approx(t**3, abs=1e-12)
    assert interpolate(traj, 2.0) == 8.0


def test_interpolation_queries_history_before_t0():
    traj = cubic_trajectory()
    assert interpolate(traj, -0.5) == pytest.approx(-0.125, abs=1e-15)
    assert interpolate(traj, 0.0) == 0.0


def test_interpolation_range_errors():
    traj = cubic_trajectory()
    with pytest.raises(ValueError, match="beyond the trajectory end"):
        interpolate(traj, 2.5)
    with pytest.raises(ValueError, match="before the stored history range"):
        interpolate(traj, -1.5)


def test_interpolation_error_is_fourth_order():
    maxerr = []
    for h in (0.2, 0.1):
        ts = np.arange(0.0, 2.0 + h / 2, h)
        traj = Trajectory(
            t0=0.0,
            t_end=float(ts[-1]),
            h=h,
            x=np.sin(ts),
            xp=np.cos(ts),
            history=InitialHistory("sin(t)"),
            hist_lo=0.0,
        )
        mids = (ts[:-1] + ts[1:]) / 2.0
        errs = [abs(interpolate(traj, float(t)) - math.sin(t)) for t in mids]
        maxerr.append(max(errs))
    ratio = maxerr[0] / maxerr[1]
    assert 12.0 <= ratio <= 20.0


def test_positivity_loss_raised_with_time_and_value():
    # History dips negative inside the queried window, dragging the
    # recruitment term negative until the trajectory crosses zero.
    model = single_pair_model(2.0, "1", 10.0, 1.0, "2", "2", t0=math.pi / 2)
    with pytest.raises(PositivityLoss) as exc:
        integrate(model, InitialHistory("sin(t)"), T=20.0, h=0.01)
    assert exc.value.t > model.t0
    assert exc.value.value <= 0.0
    assert "lost positivity" in str(exc.value)


def test_tail_extrema_window_selection():
    ts = np.arange(11, dtype=np.float64) * 0.5
    traj = Trajectory(
        t0=0.0,
        t_end=5.0,
        h=0.5,
        x=ts.copy(),
        xp=np.ones_like(ts),
        history=InitialHistory("0.1"),
        hist_lo=0.0,
    )
    stats = tail_extrema(traj, 2.0)
    assert stats.n_nodes == 5
    assert stats.l_est == 3.0
    assert stats.L_est == 5.0
    whole = tail_extrema(traj, 50.0)
    assert whole.n_nodes == 11
    assert whole.l_est == 0.0
    with pytest.raises(ValueError):
        tail_extrema(traj, 0.0)


def test_export_csv_round_trips_and_is_deterministic(tmp_path):
    model = no_delay_model()
    traj = integrate(model, InitialHistory("2"), T=2.0, h=0.25)
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    export_csv(traj, p1)
    export_csv(traj, p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == "t,x"
    assert len(lines) == len(traj.x) + 1
    for line, t, v in zip(lines[1:], traj.times(), traj.x):
        st, sv = line.split(",")
        assert float(st) == t
        assert float(sv) == v


def test_delay_integral_sup_constant_case():
    model = single_pair_model(0.1, "1.3", 0.3, 1.0, "1", "0.7")
    K = carrying_capacity(model).K
    stats = delay_integral_sup(model, K)
    assert stats.zeta_M == pytest.approx(0.91, abs=1e-10)
    assert len(stats.zeta_per_pair) == 1
    assert stats.zeta_per_pair[0] == pytest.approx(0.91, abs=1e-10)
    # With one pair the weighted load is just w1 * zeta: w1 = a p e^{-aK} = 0.1.
    assert stats.las_lhs == pytest.approx(0.091, abs=1e-10)


def test_delay_integral_sup_oscillating_and_max_over_pairs():
    model = NicholsonModel(
        delta=0.1,
        beta="2",
        pairs=(
            DelayPair(p=0.3, a=1.0, tau="1", sigma="abs(cos(t))"),
            DelayPair(p=0.2, a=1.0, tau="1", sigma="0.25"),
        ),
        t0=0.0,
    )
    K = carrying_capacity(model).K
    stats = delay_integral_sup(model, K)
    assert stats.zeta_per_pair[0] == pytest.approx(2.0, abs=1e-6)
    assert stats.zeta_per_pair[1] == pytest.approx(0.5, abs=1e-10)
    assert stats.zeta_M == pytest.approx(2.0, abs=1e-6)
