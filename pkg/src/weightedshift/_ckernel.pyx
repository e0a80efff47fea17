# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flow kernel.

Dormand-Prince 5(4) integration of the augmented characteristic system for
fields given as postfix programs (see ``expr.compile_program``) on domains
given as intersections of open half-spaces ``A x < b``.  The algorithm is
the one in ``_pykernel.integrate``; the two must stay in step.
"""

import numpy as np
from libc.math cimport sin, cos, exp, sqrt, fabs, fmax, fmin, log, pow, floor, isfinite, NAN, INFINITY
from libc.stdlib cimport malloc, free

cdef int N_STAGE = 7

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9, MIN_FACTOR = 0.2, MAX_FACTOR = 10.0
cdef double EPS = 2.220446049250313e-16

OK = 0
LEFT_DOMAIN = 1
STEP_FAILURE = 2


cdef struct Prog:
    const int* ops
    const int* args
    const double* consts
    const int* starts
    int n_out
    double* stack
    const double* A
    const double* b
    int n_half
    int n_dim
    double direction


cdef int run(Prog* p, int start, int stop, const double* x, double* out) noexcept nogil:
    cdef int sp = 0
    cdef int i, op
    cdef double a, c, r
    for i in range(start, stop):
        op = p.ops[i]
        if op == 0:
            p.stack[sp] = p.consts[p.args[i]]
            sp += 1
            continue
        if op == 1:
            p.stack[sp] = x[p.args[i]]
            sp += 1
            continue
        if op <= 9:
            a = p.stack[sp - 1]
            if op == 2:
                r = -a
            elif op == 3:
                r = sin(a)
            elif op == 4:
                r = cos(a)
            elif op == 5:
                r = exp(a)
            elif op == 6:
                if a < 0.0:
                    return -1
                r = sqrt(a)
            elif op == 7:
                r = fabs(a)
            elif op == 8:
                if a <= 0.0:
                    return -1
                r = log(a)
            else:
                r = (a > 0.0) - (a < 0.0)
            if not isfinite(r):
                return -1
            p.stack[sp - 1] = r
            continue
        c = p.stack[sp - 1]
        a = p.stack[sp - 2]
        sp -= 1
        if op == 10:
            r = a + c
        elif op == 11:
            r = a - c
        elif op == 12:
            r = a * c
        elif op == 13:
            if c == 0.0:
                return -1
            r = a / c
        else:
            if a < 0.0 and c != floor(c):
                return -1
            if a == 0.0 and c < 0.0:
                return -1
            r = pow(a, c)
        if not isfinite(r):
            return -1
        p.stack[sp - 1] = r
    out[0] = p.stack[0]
    return 0


cdef int rhs(Prog* p, const double* y, double* out) noexcept nogil:
    cdef int k
    for k in range(p.n_out):
        if run(p, p.starts[k], p.starts[k + 1], y, &out[k]) != 0:
            return -1
        if not isfinite(out[k]):
            return -1
    for k in range(p.n_dim):
        out[k] *= p.direction
    return 0


cdef bint inside(Prog* p, const double* x) noexcept nogil:
    cdef int j, k
    cdef double s
    for j in range(p.n_half):
        s = 0.0
        for k in range(p.n_dim):
            s += p.A[j * p.n_dim + k] * x[k]
        if not (s < p.b[j]):
            return False
    return True


cdef int stages(Prog* p, int m, const double* y, double h, double* k, double* tmp, double* y_new) noexcept nogil:
    """Fill stages k[1..5] (k[0] is given) and the 5th-order update."""
    cdef double* k1 = k
    cdef double* k2 = k + m
    cdef double* k3 = k + 2 * m
    cdef double* k4 = k + 3 * m
    cdef double* k5 = k + 4 * m
    cdef double* k6 = k + 5 * m
    cdef int i
    for i in range(m):
        tmp[i] = y[i] + h * (A21 * k1[i])
    if rhs(p, tmp, k2) != 0:
        return -1
    for i in range(m):
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    if rhs(p, tmp, k3) != 0:
        return -1
    for i in range(m):
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    if rhs(p, tmp, k4) != 0:
        return -1
    for i in range(m):
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    if rhs(p, tmp, k5) != 0:
        return -1
    for i in range(m):
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    if rhs(p, tmp, k6) != 0:
        return -1
    for i in range(m):
        y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        if not isfinite(y_new[i]):
            return -1
    return 0


cdef int _loop(Prog* p, double* y, double t_end, const double* t_out, int n_req,
               double* y_out, int* n_out_p, double* t_p, long* steps_p, double* exit_time,
               double rtol, double atol, double h_max, double t_tol, long max_steps,
               double* k, double* tmp, double* y_new, double* y_mid, double* y_lo) noexcept nogil:
    cdef int m = p.n_dim + 3
    cdef int i
    cdef double h, h_saved, target, err, sc, e, d0, d1, factor
    cdef double lo, hi, mid, bis_tol
    cdef bint clipped, ok
    cdef double h_min_rel = 16.0 * EPS
    cdef double* k7 = k + 6 * m

    while n_out_p[0] < n_req and t_out[n_out_p[0]] <= 0.0:
        for i in range(m):
            y_out[n_out_p[0] * m + i] = y[i]
        n_out_p[0] += 1
    if t_end <= 0.0:
        return 0
    if rhs(p, y, k) != 0:
        return 2

    # initial step (Hairer, Norsett & Wanner, II.4)
    d0 = 0.0
    d1 = 0.0
    for i in range(m):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1 += (k[i] / sc) * (k[i] / sc)
    d0 = sqrt(d0 / m)
    d1 = sqrt(d1 / m)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    if h > t_end:
        h = t_end
    if h > h_max:
        h = h_max

    while t_p[0] < t_end:
        target = t_end
        if n_out_p[0] < n_req and t_out[n_out_p[0]] < target:
            target = t_out[n_out_p[0]]
        if h > h_max:
            h = h_max
        clipped = False
        h_saved = h
        if t_p[0] + h >= target or target - (t_p[0] + h) < h_min_rel * fmax(fabs(target), 1.0):
            h = target - t_p[0]
            clipped = True

        if stages(p, m, y, h, k, tmp, y_new) != 0 or rhs(p, y_new, k7) != 0:
            err = INFINITY
        else:
            err = 0.0
            for i in range(m):
                e = h * (E1 * k[i] + E3 * k[2 * m + i] + E4 * k[3 * m + i] + E5 * k[4 * m + i]
                         + E6 * k[5 * m + i] + E7 * k7[i])
                sc = atol + rtol * fmax(fabs(y[i]), fabs(y_new[i]))
                err += (e / sc) * (e / sc)
            err = sqrt(err / m)
            if not isfinite(err):
                err = INFINITY

        if err <= 1.0:
            if not inside(p, y_new):
                # bisect the crossing with single steps from the accepted state
                lo = 0.0
                hi = h
                for i in range(m):
                    y_lo[i] = y[i]
                bis_tol = t_tol / 16.0
                while hi - lo > bis_tol:
                    mid = 0.5 * (lo + hi)
                    ok = stages(p, m, y, mid, k, tmp, y_mid) == 0 and inside(p, y_mid)
                    if ok:
                        lo = mid
                        for i in range(m):
                            y_lo[i] = y_mid[i]
                    else:
                        hi = mid
                exit_time[0] = t_p[0] + 0.5 * (lo + hi)
                for i in range(m):
                    y[i] = y_lo[i]
                t_p[0] = t_p[0] + lo
                steps_p[0] += 1
                return 1

            steps_p[0] += 1
            if clipped:
                t_p[0] = target
            else:
                t_p[0] = t_p[0] + h
            for i in range(m):
                y[i] = y_new[i]
                k[i] = k7[i]
            while n_out_p[0] < n_req and t_out[n_out_p[0]] <= t_p[0]:
                for i in range(m):
                    y_out[n_out_p[0] * m + i] = y[i]
                n_out_p[0] += 1
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = fmin(MAX_FACTOR, fmax(MIN_FACTOR, SAFETY * pow(err, -0.2)))
            h = h * factor
            if clipped and h < h_saved:
                h = h_saved
        else:
            if not isfinite(err):
                factor = 0.25
            else:
                factor = fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))
            h = h * factor
            if h < h_min_rel * fmax(fabs(t_p[0]), 1.0):
                return 2
        if steps_p[0] >= max_steps:
            return 2
    return 0


def integrate_program(const int[::1] ops, const int[::1] args, const double[::1] consts,
                      const int[::1] starts, int stack_size, A, b, int n_dim,
                      y0, double t_end, double direction, t_out,
                      double rtol, double atol, double h_max, double t_tol, long max_steps):
    """Integrate the augmented system from 0 to ``t_end >= 0``.

    Returns ``(y_out, n_out, y_end, t_reached, steps, status, exit_time)``
    exactly like ``_pykernel.integrate``.
    """
    cdef int m = n_dim + 3
    cdef double[:, ::1] A_c = np.ascontiguousarray(A, dtype=np.float64).reshape(-1, n_dim)
    cdef double[::1] b_c = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
    cdef double[::1] y = np.array(y0, dtype=np.float64).reshape(-1)
    cdef double[::1] t_out_c = (np.empty(0) if t_out is None
                                else np.ascontiguousarray(t_out, dtype=np.float64).reshape(-1))
    cdef int n_req = t_out_c.shape[0]
    y_out_arr = np.full((n_req, m), np.nan)
    cdef double[:, ::1] y_out = y_out_arr
    cdef double[::1] stack = np.empty(max(stack_size, 1) + 1)
    cdef double dummy = 0.0
    cdef Prog p
    cdef int status, n_out = 0
    cdef long steps = 0
    cdef double t = 0.0, exit_time = NAN
    if y.shape[0] != m:
        raise ValueError("y0 must have n_dim + 3 entries")
    if A_c.shape[0] != b_c.shape[0]:
        raise ValueError("A and b disagree on the number of half-spaces")

    p.ops = &ops[0]
    p.args = &args[0]
    p.consts = &consts[0]
    p.starts = &starts[0]
    p.n_out = starts.shape[0] - 1
    p.stack = &stack[0]
    p.A = &A_c[0, 0] if A_c.shape[0] > 0 else &dummy
    p.b = &b_c[0] if b_c.shape[0] > 0 else &dummy
    p.n_half = b_c.shape[0]
    p.n_dim = n_dim
    p.direction = direction

    cdef double* k = <double*> malloc(N_STAGE * m * sizeof(double))
    cdef double* tmp = <double*> malloc(m * sizeof(double))
    cdef double* y_new = <double*> malloc(m * sizeof(double))
    cdef double* y_mid = <double*> malloc(m * sizeof(double))
    cdef double* y_lo = <double*> malloc(m * sizeof(double))
    if k == NULL or tmp == NULL or y_new == NULL or y_mid == NULL or y_lo == NULL:
        free(k); free(tmp); free(y_new); free(y_mid); free(y_lo)
        raise MemoryError()
    try:
        with nogil:
            status = _loop(&p, &y[0], t_end, &t_out_c[0] if n_req > 0 else &dummy, n_req,
                           &y_out[0, 0] if n_req > 0 else &dummy, &n_out, &t, &steps, &exit_time,
                           rtol, atol, h_max, t_tol, max_steps, k, tmp, y_new, y_mid, y_lo)
    finally:
        free(k); free(tmp); free(y_new); free(y_mid); free(y_lo)
    return y_out_arr, n_out, np.asarray(y), t, int(steps), status, exit_time
