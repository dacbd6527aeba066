# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels.

Mirrors ``_kernels_py`` operation for operation; see that module for the
reference semantics. Opcode and error numbering follow ``_ops``.
"""

import numpy as np

from libc.math cimport cos, exp, fabs, floor, isfinite, log, pow, sin, sqrt

NAME = "compiled"

cdef enum:
    OP_CONST = 0
    OP_T = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_POW = 6
    OP_NEG = 7
    OP_SIN = 8
    OP_COS = 9
    OP_ABS = 10
    OP_EXP = 11
    OP_LOG = 12
    OP_SQRT = 13
    OP_MIN = 14
    OP_MAX = 15

cdef enum:
    ERR_OK = 0
    ERR_DIV_ZERO = 1
    ERR_LOG_DOMAIN = 2
    ERR_SQRT_DOMAIN = 3
    ERR_POW_DOMAIN = 4
    ERR_NONFINITE = 5
    ERR_POSITIVITY = 6
    ERR_BAD_PROGRAM = 7

cdef enum:
    MAX_STACK = 128

cdef double NAN_VAL = float("nan")


cdef double _run_prog(const int* ops, const int* args, const double* consts,
                      int lo, int hi, double t, double* stack, int* err) noexcept nogil:
    cdef int i, sp = 0, op
    cdef double a, b, r
    for i in range(lo, hi):
        op = ops[i]
        if op == OP_CONST:
            stack[sp] = consts[args[i]]
            sp += 1
        elif op == OP_T:
            stack[sp] = t
            sp += 1
        elif op == OP_ADD:
            sp -= 1
            r = stack[sp - 1] + stack[sp]
            if not isfinite(r):
                err[0] = ERR_NONFINITE
                return NAN_VAL
            stack[sp - 1] = r
        elif op == OP_SUB:
            sp -= 1
            r = stack[sp - 1] - stack[sp]
            if not isfinite(r):
                err[0] = ERR_NONFINITE
                return NAN_VAL
            stack[sp - 1] = r
        elif op == OP_MUL:
            sp -= 1
            r = stack[sp - 1] * stack[sp]
            if not isfinite(r):
                err[0] = ERR_NONFINITE
                return NAN_VAL
            stack[sp - 1] = r
        elif op == OP_DIV:
            sp -= 1
            b = stack[sp]
            if b == 0.0:
                err[0] = ERR_DIV_ZERO
                return NAN_VAL
            r = stack[sp - 1] / b
            if not isfinite(r):
                err[0] = ERR_NONFINITE
                return NAN_VAL
            stack[sp - 1] = r
        elif op == OP_POW:
            sp -= 1
            b = stack[sp]
            a = stack[sp - 1]
            if a < 0.0 and b != floor(b):
                err[0] = ERR_POW_DOMAIN
                return NAN_VAL
            r = pow(a, b)
            if not isfinite(r):
                err[0] = ERR_NONFINITE
                return NAN_VAL
            stack[sp - 1] = r
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_SIN:
            stack[sp - 1] = sin(stack[sp - 1])
        elif op == OP_COS:
            stack[sp - 1] = cos(stack[sp - 1])
        elif op == OP_ABS:
            stack[sp - 1] = fabs(stack[sp - 1])
        elif op == OP_EXP:
            r = exp(stack[sp - 1])
            if not isfinite(r):
                err[0] = ERR_NONFINITE
                return NAN_VAL
            stack[sp - 1] = r
        elif op == OP_LOG:
            if stack[sp - 1] <= 0.0:
                err[0] = ERR_LOG_DOMAIN
                return NAN_VAL
            stack[sp - 1] = log(stack[sp - 1])
        elif op == OP_SQRT:
            if stack[sp - 1] < 0.0:
                err[0] = ERR_SQRT_DOMAIN
                return NAN_VAL
            stack[sp - 1] = sqrt(stack[sp - 1])
        elif op == OP_MIN:
            sp -= 1
            if stack[sp] < stack[sp - 1]:
                stack[sp - 1] = stack[sp]
        elif op == OP_MAX:
            sp -= 1
            if stack[sp] > stack[sp - 1]:
                stack[sp - 1] = stack[sp]
        else:
            err[0] = ERR_BAD_PROGRAM
            return NAN_VAL
    if sp != 1:
        err[0] = ERR_BAD_PROGRAM
        return NAN_VAL
    a = stack[0]
    if not isfinite(a):
        err[0] = ERR_NONFINITE
        return NAN_VAL
    return a


def eval_program(int[:] ops, int[:] args, double[:] consts, int stack_need, double t):
    cdef double stack[MAX_STACK]
    cdef int err = ERR_OK
    cdef double v
    cdef const double* cp = NULL
    if consts.shape[0] > 0:
        cp = &consts[0]
    v = _run_prog(&ops[0], &args[0], cp, 0, ops.shape[0], t, stack, &err)
    return v, err


def eval_program_array(int[:] ops, int[:] args, double[:] consts, int stack_need,
                       double[:] ts):
    cdef long n = ts.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double stack[MAX_STACK]
    cdef int err = ERR_OK
    cdef long i
    cdef int nops = ops.shape[0]
    cdef const double* cp = NULL
    if consts.shape[0] > 0:
        cp = &consts[0]
    for i in range(n):
        out[i] = _run_prog(&ops[0], &args[0], cp, 0, nops, ts[i], stack, &err)
        if err != ERR_OK:
            return out_arr, err, i
    return out_arr, ERR_OK, -1


cdef inline double _hermite(double th, double h, double xa, double ma,
                            double xb, double mb) noexcept nogil:
    cdef double t2 = th * th
    cdef double t3 = t2 * th
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * xa
            + (t3 - 2.0 * t2 + th) * h * ma
            + (-2.0 * t3 + 3.0 * t2) * xb
            + (t3 - t2) * h * mb)


cdef struct MosCtx:
    const int* ops
    const int* args
    const double* consts
    const int* offs
    double* stack
    double* x
    double* xp
    double t0
    double h
    long i_front
    double xe
    double xpe
    int kind
    int m
    const double* c1
    const double* c2
    double delta
    int err
    int err_prog
    double err_t
    double s_min
    bint used_prov


cdef double _evalp(MosCtx* c, int slot, double t) noexcept nogil:
    cdef int err = ERR_OK
    cdef double v = _run_prog(c.ops, c.args, c.consts, c.offs[slot],
                              c.offs[slot + 1], t, c.stack, &err)
    if err != ERR_OK:
        c.err = err
        c.err_prog = slot
        c.err_t = t
    return v


cdef double _delayed(MosCtx* c, double s) noexcept nogil:
    cdef double tf, u, th
    cdef long j
    if s < c.s_min:
        c.s_min = s
    if s <= c.t0:
        return _evalp(c, 1, s)
    tf = c.t0 + c.i_front * c.h
    if s >= tf:
        c.used_prov = True
        th = (s - tf) / c.h
        if th > 1.0:
            th = 1.0
        return _hermite(th, c.h, c.x[c.i_front], c.xp[c.i_front], c.xe, c.xpe)
    u = (s - c.t0) / c.h
    j = <long>floor(u)
    if j > c.i_front - 1:
        j = c.i_front - 1
    if j < 0:
        j = 0
    th = u - j
    if th > 1.0:
        th = 1.0
    if th < 0.0:
        th = 0.0
    return _hermite(th, c.h, c.x[j], c.xp[j], c.x[j + 1], c.xp[j + 1])


cdef double _overflow(MosCtx* c, double t) noexcept nogil:
    c.err = ERR_NONFINITE
    c.err_prog = -1
    c.err_t = t
    return NAN_VAL


cdef double _rhs(MosCtx* c, double t, double xnow) noexcept nogil:
    cdef double beta, acc, d, xt, xs, ex, r
    cdef int j
    beta = _evalp(c, 0, t)
    if c.err != ERR_OK:
        return NAN_VAL
    acc = 0.0
    for j in range(c.m):
        d = _evalp(c, 2 + 2 * j, t)
        if c.err != ERR_OK:
            return NAN_VAL
        if d <= 0.0:
            xt = xnow
        else:
            xt = _delayed(c, t - d)
        if c.err != ERR_OK:
            return NAN_VAL
        d = _evalp(c, 3 + 2 * j, t)
        if c.err != ERR_OK:
            return NAN_VAL
        if d <= 0.0:
            xs = xnow
        else:
            xs = _delayed(c, t - d)
        if c.err != ERR_OK:
            return NAN_VAL
        if c.kind == 0:
            ex = -c.c2[j] * xs
            if ex > 709.0:
                return _overflow(c, t)
            acc += c.c1[j] * xt * exp(ex)
        else:
            acc += c.c1[j] * xt + c.c2[j] * xs
    r = beta * (acc - c.delta * xnow)
    if not isfinite(r):
        return _overflow(c, t)
    return r


def integrate_mos(int kind, double delta, double[:] c1, double[:] c2,
                  int[:] ops, int[:] args, double[:] consts, int[:] offs,
                  int stack_need, double t0, double h, long n_steps,
                  bint check_positivity):
    x_arr = np.empty(n_steps + 1, dtype=np.float64)
    xp_arr = np.empty(n_steps + 1, dtype=np.float64)
    cdef double[:] x = x_arr
    cdef double[:] xp = xp_arr
    cdef double stack[MAX_STACK]

    cdef MosCtx ctx
    ctx.ops = &ops[0]
    ctx.args = &args[0]
    ctx.consts = NULL
    if consts.shape[0] > 0:
        ctx.consts = &consts[0]
    ctx.offs = &offs[0]
    ctx.stack = stack
    ctx.x = &x[0]
    ctx.xp = &xp[0]
    ctx.t0 = t0
    ctx.h = h
    ctx.i_front = 0
    ctx.xe = 0.0
    ctx.xpe = 0.0
    ctx.kind = kind
    ctx.m = c1.shape[0]
    ctx.c1 = &c1[0]
    ctx.c2 = &c2[0]
    ctx.delta = delta
    ctx.err = ERR_OK
    ctx.err_prog = -1
    ctx.err_t = NAN_VAL
    ctx.s_min = t0
    ctx.used_prov = False

    cdef long i
    cdef int p
    cdef double ti, xi, xn, k1, k2, k3, k4
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0

    x[0] = _evalp(&ctx, 1, t0)
    if ctx.err != ERR_OK:
        return x_arr, xp_arr, ctx.err, ctx.err_prog, ctx.err_t, ctx.s_min
    ctx.xe = x[0]
    ctx.xpe = 0.0
    xp[0] = _rhs(&ctx, t0, x[0])
    if ctx.err != ERR_OK:
        return x_arr, xp_arr, ctx.err, ctx.err_prog, ctx.err_t, ctx.s_min

    with nogil:
        for i in range(n_steps):
            ti = t0 + i * h
            xi = x[i]
            ctx.i_front = i
            ctx.xe = xi + h * xp[i]
            ctx.xpe = xp[i]
            for p in range(2):
                ctx.used_prov = False
                k1 = _rhs(&ctx, ti, xi)
                k2 = _rhs(&ctx, ti + half, xi + half * k1)
                k3 = _rhs(&ctx, ti + half, xi + half * k2)
                k4 = _rhs(&ctx, ti + h, xi + h * k3)
                if ctx.err != ERR_OK:
                    break
                xn = xi + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                ctx.xe = xn
                ctx.xpe = _rhs(&ctx, ti + h, xn)
                if ctx.err != ERR_OK:
                    break
                if not ctx.used_prov:
                    break
            if ctx.err != ERR_OK:
                break
            x[i + 1] = ctx.xe
            xp[i + 1] = ctx.xpe
            if check_positivity and ctx.xe <= 0.0:
                ctx.err = ERR_POSITIVITY
                ctx.err_prog = -1
                ctx.err_t = t0 + (i + 1) * h
                break
    return x_arr, xp_arr, ctx.err, ctx.err_prog, ctx.err_t, ctx.s_min


cdef double _simpson_rec(const int* ops, const int* args, const double* consts,
                         int lo, int hi, double a, double b, double fa,
                         double fm, double fb, double whole, double tol,
                         int depth, double* stack, int* err,
                         double* bad_t) noexcept nogil:
    cdef double mid = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + mid)
    cdef double rm = 0.5 * (mid + b)
    cdef double flm, frm, left, right, diff, v1, v2
    flm = _run_prog(ops, args, consts, lo, hi, lm, stack, err)
    if err[0] != ERR_OK:
        bad_t[0] = lm
        return NAN_VAL
    frm = _run_prog(ops, args, consts, lo, hi, rm, stack, err)
    if err[0] != ERR_OK:
        bad_t[0] = rm
        return NAN_VAL
    left = (mid - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - mid) * (fm + 4.0 * frm + fb) / 6.0
    diff = left + right - whole
    if depth <= 0 or fabs(diff) <= 15.0 * tol:
        return left + right + diff / 15.0
    v1 = _simpson_rec(ops, args, consts, lo, hi, a, mid, fa, flm, fm, left,
                      0.5 * tol, depth - 1, stack, err, bad_t)
    if err[0] != ERR_OK:
        return NAN_VAL
    v2 = _simpson_rec(ops, args, consts, lo, hi, mid, b, fm, frm, fb, right,
                      0.5 * tol, depth - 1, stack, err, bad_t)
    if err[0] != ERR_OK:
        return NAN_VAL
    return v1 + v2


def window_integrals(int[:] ops, int[:] args, double[:] consts, int[:] offs,
                     int stack_need, double[:] ts, double tol):
    cdef long n = ts.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double stack[MAX_STACK]
    cdef int err = ERR_OK
    cdef double bad_t = 0.0
    cdef int blo = offs[0], bhi = offs[1], slo = offs[1], shi = offs[2]
    cdef const double* cp = NULL
    if consts.shape[0] > 0:
        cp = &consts[0]
    cdef const int* op_p = &ops[0]
    cdef const int* ar_p = &args[0]
    cdef long i
    cdef double t, d, a, fa, fm, fb, mid, whole, v
    with nogil:
        for i in range(n):
            t = ts[i]
            d = _run_prog(op_p, ar_p, cp, slo, shi, t, stack, &err)
            if err != ERR_OK:
                bad_t = t
                break
            if d < 0.0:
                d = 0.0
            if d == 0.0:
                out[i] = 0.0
                continue
            a = t - d
            fa = _run_prog(op_p, ar_p, cp, blo, bhi, a, stack, &err)
            if err != ERR_OK:
                bad_t = a
                break
            mid = 0.5 * (a + t)
            fm = _run_prog(op_p, ar_p, cp, blo, bhi, mid, stack, &err)
            if err != ERR_OK:
                bad_t = mid
                break
            fb = _run_prog(op_p, ar_p, cp, blo, bhi, t, stack, &err)
            if err != ERR_OK:
                bad_t = t
                break
            whole = d * (fa + 4.0 * fm + fb) / 6.0
            v = _simpson_rec(op_p, ar_p, cp, blo, bhi, a, t, fa, fm, fb,
                             whole, tol, 50, stack, &err, &bad_t)
            if err != ERR_OK:
                break
            out[i] = v
    if err != ERR_OK:
        return out_arr, err, bad_t
    return out_arr, ERR_OK, 0.0
