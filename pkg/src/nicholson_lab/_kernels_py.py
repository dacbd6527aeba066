"""Pure-Python numeric kernels.

Fallback backend used when the compiled extension is unavailable (or when
``NICHOLSON_LAB_BACKEND=python``). Every function here mirrors the Cython
implementation in ``_core.pyx`` operation for operation, so the two backends
produce identical results; ``tests/test_backends.py`` enforces that.

All kernels report failures through the error codes in ``_ops`` instead of
raising, because the compiled versions cannot raise from nogil code paths.
"""

import math

import numpy as np

from ._ops import (
    ERR_BAD_PROGRAM,
    ERR_DIV_ZERO,
    ERR_LOG_DOMAIN,
    ERR_NONFINITE,
    ERR_OK,
    ERR_POSITIVITY,
    ERR_POW_DOMAIN,
    ERR_SQRT_DOMAIN,
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_EXP,
    OP_LOG,
    OP_MAX,
    OP_MIN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_T,
)

NAME = "python"
_NAN = float("nan")


def _evalp(ops, args, consts, lo, hi, t):
    """Execute program instructions [lo, hi); returns (value, err)."""
    stack = []
    push = stack.append
    for i in range(lo, hi):
        op = ops[i]
        if op == OP_CONST:
            push(consts[args[i]])
        elif op == OP_T:
            push(t)
        elif op == OP_ADD:
            b = stack.pop()
            r = stack[-1] + b
            if not math.isfinite(r):
                return _NAN, ERR_NONFINITE
            stack[-1] = r
        elif op == OP_SUB:
            b = stack.pop()
            r = stack[-1] - b
            if not math.isfinite(r):
                return _NAN, ERR_NONFINITE
            stack[-1] = r
        elif op == OP_MUL:
            b = stack.pop()
            r = stack[-1] * b
            if not math.isfinite(r):
                return _NAN, ERR_NONFINITE
            stack[-1] = r
        elif op == OP_DIV:
            b = stack.pop()
            if b == 0.0:
                return _NAN, ERR_DIV_ZERO
            r = stack[-1] / b
            if not math.isfinite(r):
                return _NAN, ERR_NONFINITE
            stack[-1] = r
        elif op == OP_POW:
            b = stack.pop()
            a = stack[-1]
            if a < 0.0 and b != math.floor(b):
                return _NAN, ERR_POW_DOMAIN
            try:
                r = math.pow(a, b)
            except (OverflowError, ValueError, ZeroDivisionError):
                return _NAN, ERR_NONFINITE
            if not math.isfinite(r):
                return _NAN, ERR_NONFINITE
            stack[-1] = r
        elif op == OP_NEG:
            stack[-1] = -stack[-1]
        elif op == OP_SIN:
            stack[-1] = math.sin(stack[-1])
        elif op == OP_COS:
            stack[-1] = math.cos(stack[-1])
        elif op == OP_ABS:
            stack[-1] = abs(stack[-1])
        elif op == OP_EXP:
            try:
                r = math.exp(stack[-1])
            except OverflowError:
                return _NAN, ERR_NONFINITE
            if not math.isfinite(r):
                return _NAN, ERR_NONFINITE
            stack[-1] = r
        elif op == OP_LOG:
            if stack[-1] <= 0.0:
                return _NAN, ERR_LOG_DOMAIN
            stack[-1] = math.log(stack[-1])
        elif op == OP_SQRT:
            if stack[-1] < 0.0:
                return _NAN, ERR_SQRT_DOMAIN
            stack[-1] = math.sqrt(stack[-1])
        elif op == OP_MIN:
            b = stack.pop()
            if b < stack[-1]:
                stack[-1] = b
        elif op == OP_MAX:
            b = stack.pop()
            if b > stack[-1]:
                stack[-1] = b
        else:
            return _NAN, ERR_BAD_PROGRAM
    if len(stack) != 1:
        return _NAN, ERR_BAD_PROGRAM
    v = stack[0]
    if not math.isfinite(v):
        return _NAN, ERR_NONFINITE
    return v, ERR_OK


def _aslist(a):
    return a.tolist() if isinstance(a, np.ndarray) else list(a)


def eval_program(ops, args, consts, stack_need, t):
    return _evalp(_aslist(ops), _aslist(args), _aslist(consts), 0, len(ops), t)


def eval_program_array(ops, args, consts, stack_need, ts):
    ops, args, consts = _aslist(ops), _aslist(args), _aslist(consts)
    out = np.empty(len(ts), dtype=np.float64)
    n = len(ops)
    for i in range(len(ts)):
        v, err = _evalp(ops, args, consts, 0, n, float(ts[i]))
        if err != ERR_OK:
            return out, err, i
        out[i] = v
    return out, ERR_OK, -1


def _hermite(th, h, xa, ma, xb, mb):
    t2 = th * th
    t3 = t2 * th
    return (
        (2.0 * t3 - 3.0 * t2 + 1.0) * xa
        + (t3 - 2.0 * t2 + th) * h * ma
        + (-2.0 * t3 + 3.0 * t2) * xb
        + (t3 - t2) * h * mb
    )


def integrate_mos(
    kind,
    delta,
    c1,
    c2,
    ops,
    args,
    consts,
    offs,
    stack_need,
    t0,
    h,
    n_steps,
    check_positivity,
):
    """Method-of-steps RK4 with cubic Hermite dense output.

    Program slots in ``offs``: 0 = beta, 1 = history, then 2+2j = tau_j and
    3+2j = sigma_j for pair j. ``kind`` 0 integrates the population model
    (c1=p_j, c2=a_j), kind 1 the linearized one (c1, c2 = lag coefficients).

    Returns (x, xp, err, err_prog, err_t, s_min). ``err_prog`` is the slot
    whose evaluation failed (-1 for positivity loss / non-program errors).
    """
    ops, args, consts = _aslist(ops), _aslist(args), _aslist(consts)
    offs, c1, c2 = _aslist(offs), _aslist(c1), _aslist(c2)
    m = len(c1)
    x = np.empty(n_steps + 1, dtype=np.float64)
    xp = np.empty(n_steps + 1, dtype=np.float64)

    err = ERR_OK
    err_prog = -1
    err_t = _NAN
    s_min = t0
    i_front = 0
    xe = 0.0
    xpe = 0.0
    used_prov = False

    def evalp(slot, t):
        nonlocal err, err_prog, err_t
        v, e = _evalp(ops, args, consts, offs[slot], offs[slot + 1], t)
        if e != ERR_OK:
            err = e
            err_prog = slot
            err_t = t
        return v

    def delayed(s):
        nonlocal s_min, used_prov
        if s < s_min:
            s_min = s
        if s <= t0:
            return evalp(1, s)
        tf = t0 + i_front * h
        if s >= tf:
            used_prov = True
            th = (s - tf) / h
            if th > 1.0:
                th = 1.0
            return _hermite(th, h, x[i_front], xp[i_front], xe, xpe)
        u = (s - t0) / h
        j = int(math.floor(u))
        if j > i_front - 1:
            j = i_front - 1
        if j < 0:
            j = 0
        th = u - j
        if th > 1.0:
            th = 1.0
        if th < 0.0:
            th = 0.0
        return _hermite(th, h, x[j], xp[j], x[j + 1], xp[j + 1])

    def rhs(t, xnow):
        beta = evalp(0, t)
        if err != ERR_OK:
            return _NAN
        acc = 0.0
        for j in range(m):
            d = evalp(2 + 2 * j, t)
            if err != ERR_OK:
                return _NAN
            xt = xnow if d <= 0.0 else delayed(t - d)
            if err != ERR_OK:
                return _NAN
            d = evalp(3 + 2 * j, t)
            if err != ERR_OK:
                return _NAN
            xs = xnow if d <= 0.0 else delayed(t - d)
            if err != ERR_OK:
                return _NAN
            if kind == 0:
                ex = -c2[j] * xs
                if ex > 709.0:
                    return _set_overflow(t)
                acc += c1[j] * xt * math.exp(ex)
            else:
                acc += c1[j] * xt + c2[j] * xs
        r = beta * (acc - delta * xnow)
        if not math.isfinite(r):
            return _set_overflow(t)
        return r

    def _set_overflow(t):
        nonlocal err, err_prog, err_t
        err = ERR_NONFINITE
        err_prog = -1
        err_t = t
        return _NAN

    x[0] = evalp(1, t0)
    if err != ERR_OK:
        return x, xp, err, err_prog, err_t, s_min
    xe = x[0]
    xpe = 0.0
    xp[0] = rhs(t0, x[0])
    if err != ERR_OK:
        return x, xp, err, err_prog, err_t, s_min

    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n_steps):
        ti = t0 + i * h
        xi = x[i]
        i_front = i
        xe = xi + h * xp[i]
        xpe = xp[i]
        for _ in range(2):
            used_prov = False
            k1 = rhs(ti, xi)
            k2 = rhs(ti + half, xi + half * k1)
            k3 = rhs(ti + half, xi + half * k2)
            k4 = rhs(ti + h, xi + h * k3)
            if err != ERR_OK:
                return x, xp, err, err_prog, err_t, s_min
            xn = xi + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            xe = xn
            xpe = rhs(ti + h, xn)
            if err != ERR_OK:
                return x, xp, err, err_prog, err_t, s_min
            if not used_prov:
                break
        x[i + 1] = xe
        xp[i + 1] = xpe
        if check_positivity and xe <= 0.0:
            err = ERR_POSITIVITY
            err_prog = -1
            err_t = t0 + (i + 1) * h
            return x, xp, err, err_prog, err_t, s_min
    return x, xp, err, err_prog, err_t, s_min


def _simpson_rec(ops, args, consts, lo, hi, a, b, fa, fm, fb, whole, tol, depth):
    mid = 0.5 * (a + b)
    lm = 0.5 * (a + mid)
    rm = 0.5 * (mid + b)
    flm, e = _evalp(ops, args, consts, lo, hi, lm)
    if e != ERR_OK:
        return _NAN, e, lm
    frm, e = _evalp(ops, args, consts, lo, hi, rm)
    if e != ERR_OK:
        return _NAN, e, rm
    left = (mid - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - mid) * (fm + 4.0 * frm + fb) / 6.0
    diff = left + right - whole
    if depth <= 0 or abs(diff) <= 15.0 * tol:
        return left + right + diff / 15.0, ERR_OK, 0.0
    v1, e, bad = _simpson_rec(
        ops, args, consts, lo, hi, a, mid, fa, flm, fm, left, 0.5 * tol, depth - 1
    )
    if e != ERR_OK:
        return _NAN, e, bad
    v2, e, bad = _simpson_rec(
        ops, args, consts, lo, hi, mid, b, fm, frm, fb, right, 0.5 * tol, depth - 1
    )
    if e != ERR_OK:
        return _NAN, e, bad
    return v1 + v2, ERR_OK, 0.0


def window_integrals(ops, args, consts, offs, stack_need, ts, tol):
    """Integral of the slot-0 program over [t - sigma(t), t] for each t.

    Slot 1 holds the sigma program. Adaptive Simpson with absolute
    tolerance ``tol`` per integral. Returns (values, err, err_t).
    """
    ops, args, consts, offs = _aslist(ops), _aslist(args), _aslist(consts), _aslist(offs)
    out = np.empty(len(ts), dtype=np.float64)
    blo, bhi = offs[0], offs[1]
    slo, shi = offs[1], offs[2]
    for i in range(len(ts)):
        t = ts[i]
        d, e = _evalp(ops, args, consts, slo, shi, t)
        if e != ERR_OK:
            return out, e, t
        if d < 0.0:
            d = 0.0
        if d == 0.0:
            out[i] = 0.0
            continue
        a = t - d
        fa, e = _evalp(ops, args, consts, blo, bhi, a)
        if e != ERR_OK:
            return out, e, a
        mid = 0.5 * (a + t)
        fm, e = _evalp(ops, args, consts, blo, bhi, mid)
        if e != ERR_OK:
            return out, e, mid
        fb, e = _evalp(ops, args, consts, blo, bhi, t)
        if e != ERR_OK:
            return out, e, t
        whole = d * (fa + 4.0 * fm + fb) / 6.0
        v, e, bad = _simpson_rec(
            ops, args, consts, blo, bhi, a, t, fa, fm, fb, whole, tol, 50
        )
        if e != ERR_OK:
            return out, e, bad
        out[i] = v
    return out, ERR_OK, 0.0
