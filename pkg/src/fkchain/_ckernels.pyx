# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled FK kernels: right-hand side and Dormand-Prince 5(4) stepping.

Same contract as ``fkchain._pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, pow
from libc.stdlib cimport malloc, free

from fkchain._pykernels import StepSizeUnderflow, DT_MIN

cnp.import_array()

cdef double TWO_PI = 6.283185307179586


cdef struct Params:
    double mu
    double *dpoly
    int ndpoly
    double *wc
    double *ws
    int nw
    double k
    double *vc
    double *vs
    int nv
    double fdc
    double fac
    double nu0


cdef inline double _trig_d1(double x, double *c, double *s, int n) noexcept nogil:
    cdef double out = 0.0, w
    cdef int i
    for i in range(n):
        w = TWO_PI * (i + 1)
        out += w * (s[i] * cos(w * x) - c[i] * sin(w * x))
    return out


cdef inline double _dW(double d, Params *P) noexcept nogil:
    cdef double x = d - P.mu
    cdef double acc = P.dpoly[P.ndpoly - 1]
    cdef int i
    for i in range(P.ndpoly - 2, -1, -1):
        acc = acc * x + P.dpoly[i]
    if P.nw > 0:
        acc += _trig_d1(d, P.wc, P.ws, P.nw)
    return acc


cdef void _rhs(const double *u, int q, long p, double t, Params *P,
               double *dw, double *out) noexcept nogil:
    cdef int j
    cdef double f = P.fdc
    if P.fac != 0.0:
        f += P.fac * sin(TWO_PI * P.nu0 * t)
    for j in range(q - 1):
        dw[j] = _dW(u[j + 1] - u[j], P)
    dw[q - 1] = _dW(u[0] + p - u[q - 1], P)
    out[0] = dw[0] - dw[q - 1] + f
    for j in range(1, q):
        out[j] = dw[j] - dw[j - 1] + f
    if P.k != 0.0 and P.nv > 0:
        for j in range(q):
            out[j] += P.k * _trig_d1(u[j], P.vc, P.vs, P.nv)


cdef class _ParamBlock:
    """Keeps the coefficient arrays alive while a Params struct points into them."""
    cdef Params P
    cdef object refs

    def __init__(self, params):
        mu, dpoly, wc, ws, k, vc, vs, fdc, fac, nu0 = params
        cdef double[::1] a_dpoly = np.array(dpoly, dtype=np.float64)
        cdef double[::1] a_wc = np.ascontiguousarray(np.append(wc, 0.0), dtype=np.float64)
        cdef double[::1] a_ws = np.ascontiguousarray(np.append(ws, 0.0), dtype=np.float64)
        cdef double[::1] a_vc = np.ascontiguousarray(np.append(vc, 0.0), dtype=np.float64)
        cdef double[::1] a_vs = np.ascontiguousarray(np.append(vs, 0.0), dtype=np.float64)
        self.refs = (a_dpoly, a_wc, a_ws, a_vc, a_vs)
        self.P.mu = mu
        self.P.dpoly = &a_dpoly[0]
        self.P.ndpoly = a_dpoly.shape[0]
        self.P.wc = &a_wc[0]
        self.P.ws = &a_ws[0]
        self.P.nw = len(wc)
        self.P.k = k
        self.P.vc = &a_vc[0]
        self.P.vs = &a_vs[0]
        self.P.nv = len(vc)
        self.P.fdc = fdc
        self.P.fac = fac
        self.P.nu0 = nu0


def rhs(u, long p, double t, params):
    cdef double[::1] uu = np.array(u, dtype=np.float64)
    cdef int q = uu.shape[0]
    cdef _ParamBlock pb = _ParamBlock(params)
    out = np.empty(q)
    cdef double[::1] o = out
    cdef double[::1] dw = np.empty(q)
    _rhs(&uu[0], q, p, t, &pb.P, &dw[0], &o[0])
    return out


# Dormand-Prince 5(4)
cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40


cdef int _integrate(double *y, int q, long p, double t0, const double *ts, int nt,
                    Params *P, double dt_max, double tol, double *dt_io,
                    double *states, long *counts) noexcept nogil:
    """Returns 0 on success, 1 on step-size underflow (time stored in dt_io)."""
    cdef double *work = <double *> malloc(10 * q * sizeof(double))
    if work == NULL:
        return 2
    cdef double *k1 = work
    cdef double *k2 = work + q
    cdef double *k3 = work + 2 * q
    cdef double *k4 = work + 3 * q
    cdef double *k5 = work + 4 * q
    cdef double *k6 = work + 5 * q
    cdef double *k7 = work + 6 * q
    cdef double *tmp = work + 7 * q
    cdef double *ynew = work + 8 * q
    cdef double *dw = work + 9 * q
    cdef double *swap
    cdef double t = t0, h, err, e, fac
    cdef double dt = dt_io[0]
    cdef int i, j, last, status = 0
    cdef long n_acc = 0, n_rej = 0
    if dt > dt_max:
        dt = dt_max
    _rhs(y, q, p, t, P, dw, k1)
    for i in range(nt):
        while t < ts[i]:
            h = dt
            last = 0
            if t + h >= ts[i]:
                h = ts[i] - t
                last = 1
            for j in range(q):
                tmp[j] = y[j] + h * A21 * k1[j]
            _rhs(tmp, q, p, t + C2 * h, P, dw, k2)
            for j in range(q):
                tmp[j] = y[j] + h * (A31 * k1[j] + A32 * k2[j])
            _rhs(tmp, q, p, t + C3 * h, P, dw, k3)
            for j in range(q):
                tmp[j] = y[j] + h * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
            _rhs(tmp, q, p, t + C4 * h, P, dw, k4)
            for j in range(q):
                tmp[j] = y[j] + h * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
            _rhs(tmp, q, p, t + C5 * h, P, dw, k5)
            for j in range(q):
                tmp[j] = y[j] + h * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j]
                                     + A64 * k4[j] + A65 * k5[j])
            _rhs(tmp, q, p, t + h, P, dw, k6)
            for j in range(q):
                ynew[j] = y[j] + h * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j]
                                      + B5 * k5[j] + B6 * k6[j])
            _rhs(ynew, q, p, t + h, P, dw, k7)
            err = 0.0
            for j in range(q):
                e = fabs(E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j]
                         + E6 * k6[j] + E7 * k7[j])
                if e > err:
                    err = e
            err *= h
            if err <= tol:
                if last:
                    t = ts[i]
                else:
                    t = t + h
                for j in range(q):
                    y[j] = ynew[j]
                swap = k1
                k1 = k7
                k7 = swap
                n_acc += 1
                if err == 0.0:
                    fac = 5.0
                else:
                    fac = 0.9 * pow(tol / err, 0.2)
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                if (not last) or fac < 1.0:
                    dt = h * fac
                    if dt > dt_max:
                        dt = dt_max
            else:
                n_rej += 1
                fac = 0.9 * pow(tol / err, 0.2)
                if fac < 0.2:
                    fac = 0.2
                dt = h * fac
                if dt < 1e-12:
                    dt_io[0] = t
                    status = 1
                    break
        if status != 0:
            break
        for j in range(q):
            states[i * q + j] = y[j]
    free(work)
    if status == 0:
        dt_io[0] = dt
    counts[0] = n_acc
    counts[1] = n_rej
    return status


def integrate(u0, long p, double t0, sample_times, params, double dt_max, double tol, double dt0):
    cdef double[::1] y = np.array(u0, dtype=np.float64)
    cdef double[::1] ts = np.array(sample_times, dtype=np.float64)
    cdef int q = y.shape[0]
    cdef int nt = ts.shape[0]
    cdef _ParamBlock pb = _ParamBlock(params)
    cdef double dt_io = dt0
    cdef long counts[2]
    cdef int status
    states = np.empty((nt, q))
    if nt == 0:
        return states, dt0, 0, 0
    cdef double[:, ::1] st = states
    with nogil:
        status = _integrate(&y[0], q, p, t0, &ts[0], nt, &pb.P, dt_max, tol,
                            &dt_io, &st[0, 0], counts)
    if status == 1:
        raise StepSizeUnderflow(f"dt below {DT_MIN:g} at t={dt_io:.6g}")
    if status == 2:
        raise MemoryError("kernel workspace allocation failed")
    return states, dt_io, counts[0], counts[1]
