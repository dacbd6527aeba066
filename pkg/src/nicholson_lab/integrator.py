"""Method-of-steps integration and trajectory utilities.

The mesh is uniform. Each step is classical RK4; delayed values come from
cubic Hermite interpolation of already-accepted mesh cells, from the history
expression for times at or before t0, or (when a delay is shorter than the
step) from a provisional cell over the current step that is corrected by a
second pass. Delays evaluating to zero (or a tiny negative rounding residue)
use the stage's own state, which makes the no-delay reduction exactly
classical RK4.

``integrate`` does not re-check history admissibility; the CLI simulate path
runs ``model.check_history`` first, library callers are expected to do the
same when they care.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._backend import kernels
from ._ops import ERR_MESSAGES, ERR_OK, ERR_POSITIVITY
from .errors import ExprDomainError, PositivityLoss
from .exprlang import pack_programs
from .model import InitialHistory, LinearDelayModel, NicholsonModel, _sample_max_delay


@dataclass(frozen=True)
class Trajectory:
    """Solution on a uniform mesh: nodes x and node derivatives xp.

    ``hist_lo`` is the earliest time the integration actually queried; it
    bounds where ``interpolate`` may evaluate the stored history.
    """

    t0: float
    t_end: float
    h: float
    x: np.ndarray
    xp: np.ndarray
    history: InitialHistory
    hist_lo: float

    @property
    def n_steps(self):
        return len(self.x) - 1

    def times(self):
        return self.t0 + np.arange(len(self.x), dtype=np.float64) * self.h


@dataclass(frozen=True)
class TailStats:
    l_est: float
    L_est: float
    window: float
    n_nodes: int


@dataclass(frozen=True)
class DelayIntegralStats:
    """Sampled asymptotic delay-load statistics.

    zeta_per_pair[j] estimates sup_t of I_j(t) = integral of beta over
    [t - sigma_j(t), t]; zeta_M is their max; las_lhs estimates
    sup_t sum_j a_j p_j e^{-a_j K} I_j(t), the general local-stability lhs.
    """

    zeta_per_pair: tuple
    zeta_M: float
    las_lhs: float
    t_skip: float
    t_hi: float
    samples: int


def _slot_name(model, slot):
    if slot == 0:
        return "beta"
    if slot == 1:
        return "history"
    j = (slot - 2) // 2
    kind = "tau" if slot % 2 == 0 else "sigma"
    return f"pairs[{j}].{kind}"


def default_step(tau_max):
    """Default mesh step: min(0.01, tau_max/20) when tau_max > 0."""
    if tau_max > 0.0:
        return min(0.01, tau_max / 20.0)
    return 0.01


def integrate(model, history, T, h=None):
    """Integrate from t0 to T; returns a Trajectory.

    ``model`` is a NicholsonModel (positivity enforced) or a LinearDelayModel
    (perturbation variable, sign-free). ``history`` is an InitialHistory or a
    bare TimeExpr. The step is adjusted so the mesh lands exactly on T. When
    ``h`` is omitted it defaults from the sampled maximal delay.
    """
    if not isinstance(history, InitialHistory):
        history = InitialHistory(phi=history)
    t0 = model.t0
    if not T > t0:
        raise ValueError(f"horizon T={T!r} must exceed t0={t0!r}")

    if isinstance(model, LinearDelayModel):
        kind = 1
        c1 = np.array([pr.coef_tau for pr in model.pairs], dtype=np.float64)
        c2 = np.array([pr.coef_sigma for pr in model.pairs], dtype=np.float64)
        check_positivity = False
    elif isinstance(model, NicholsonModel):
        kind = 0
        c1 = np.array([pr.p for pr in model.pairs], dtype=np.float64)
        c2 = np.array([pr.a for pr in model.pairs], dtype=np.float64)
        check_positivity = True
    else:
        raise TypeError(f"cannot integrate {type(model).__name__}")

    if h is None:
        tau_est = _sample_max_delay(model, t0, min(t0 + 200.0, T), 2001)
        h = default_step(max(tau_est, 0.0))
    if not h > 0:
        raise ValueError("step h must be positive")
    n_steps = max(1, round((T - t0) / h))
    h_eff = (T - t0) / n_steps

    exprs = [model.beta, history.phi]
    for pr in model.pairs:
        exprs.append(pr.tau)
        exprs.append(pr.sigma)
    packed = pack_programs(exprs)

    x, xp, err, err_prog, err_t, s_min = kernels.integrate_mos(
        kind,
        model.delta,
        c1,
        c2,
        packed.ops,
        packed.args,
        packed.consts,
        packed.offsets,
        packed.stack_need,
        t0,
        h_eff,
        n_steps,
        check_positivity,
    )
    if err == ERR_POSITIVITY:
        idx = round((err_t - t0) / h_eff)
        raise PositivityLoss(err_t, float(x[idx]))
    if err != ERR_OK:
        where = _slot_name(model, err_prog) if err_prog >= 0 else "the model rhs"
        raise ExprDomainError(ERR_MESSAGES[err], err_t, where)
    return Trajectory(
        t0=t0,
        t_end=t0 + n_steps * h_eff,
        h=h_eff,
        x=x,
        xp=xp,
        history=history,
        hist_lo=min(t0, s_min),
    )


def interpolate(traj, t):
    """Dense evaluation: history for t <= t0, cubic Hermite on the mesh."""
    tiny = 1e-12 * (abs(traj.t_end) + 1.0)
    if t > traj.t_end + tiny:
        raise ValueError(f"t={t!r} is beyond the trajectory end {traj.t_end!r}")
    if t <= traj.t0:
        if t < traj.hist_lo - tiny:
            raise ValueError(
                f"t={t!r} is before the stored history range ({traj.hist_lo!r})"
            )
        return traj.history.phi(t)
    u = (t - traj.t0) / traj.h
    j = int(math.floor(u))
    if j > traj.n_steps - 1:
        j = traj.n_steps - 1
    if j < 0:
        j = 0
    th = u - j
    th = min(max(th, 0.0), 1.0)
    t2 = th * th
    t3 = t2 * th
    x, xp, h = traj.x, traj.xp, traj.h
    return (
        (2.0 * t3 - 3.0 * t2 + 1.0) * x[j]
        + (t3 - 2.0 * t2 + th) * h * xp[j]
        + (-2.0 * t3 + 3.0 * t2) * x[j + 1]
        + (t3 - t2) * h * xp[j + 1]
    )


def tail_extrema(traj, window):
    """Min and max of mesh values over the final ``window`` time units."""
    if window <= 0:
        raise ValueError("window must be positive")
    t_from = traj.t_end - window
    ts = traj.times()
    mask = ts >= t_from - 1e-12 * (abs(t_from) + 1.0)
    vals = traj.x[mask]
    return TailStats(
        l_est=float(vals.min()),
        L_est=float(vals.max()),
        window=window,
        n_nodes=int(mask.sum()),
    )


def default_tail_window(tau_max):
    return max(100.0, 10.0 * tau_max)


def export_csv(traj, path):
    """Write mesh nodes as ``t,x`` rows at 17 significant digits."""
    ts = traj.times()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x\n")
        for t, v in zip(ts, traj.x):
            fh.write(f"{t:.17g},{v:.17g}\n")


def delay_integral_sup(model, K, t_skip=None, t_hi=None, n=20001, tol=1e-10):
    """Sampled sup of the delay-window integrals I_j(t) past a transient.

    I_j(t) integrates beta over [t - sigma_j(t), t] (adaptive Simpson with
    absolute tolerance ``tol``). The grid is ``n`` uniform points on
    [t_skip, t_hi]; defaults skip 50*(1+tau_max) time units and span
    200*(1+tau_max) more. These are estimates of limsups; scenario overrides
    can replace zeta_M downstream.
    """
    t0 = model.t0
    if t_skip is None or t_hi is None:
        tau_est = _sample_max_delay(model, t0, t0 + 200.0, 2001)
        if t_skip is None:
            t_skip = t0 + 50.0 * (1.0 + tau_est)
        if t_hi is None:
            t_hi = t_skip + 200.0 * (1.0 + tau_est)
    if not t_hi > t_skip:
        raise ValueError("need t_hi > t_skip")
    ts = np.linspace(t_skip, t_hi, n)
    weights = np.array(
        [pr.a * pr.p * math.exp(-pr.a * K) for pr in model.pairs]
    )
    per_pair = []
    acc = np.zeros(n, dtype=np.float64)
    for j, pr in enumerate(model.pairs):
        packed = pack_programs([model.beta, pr.sigma])
        vals, err, err_t = kernels.window_integrals(
            packed.ops,
            packed.args,
            packed.consts,
            packed.offsets,
            packed.stack_need,
            ts,
            tol,
        )
        if err != ERR_OK:
            raise ExprDomainError(ERR_MESSAGES[err], err_t, f"pairs[{j}] window")
        per_pair.append(float(vals.max()))
        acc += weights[j] * vals
    return DelayIntegralStats(
        zeta_per_pair=tuple(per_pair),
        zeta_M=max(per_pair),
        las_lhs=float(acc.max()),
        t_skip=float(t_skip),
        t_hi=float(t_hi),
        samples=n,
    )
