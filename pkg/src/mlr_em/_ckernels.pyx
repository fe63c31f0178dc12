# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: scaled K0/K1 and the population convolution integrals.

Same algorithms as ``_pykernels``; results agree to rounding.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt, tanh, M_PI
from libc.stdlib cimport malloc, free

from ._gk21 import WG, WGK, XGK

cnp.import_array()

cdef double EULER_GAMMA = 0.57721566490153286061
cdef double EPS = 2.220446049250313e-16
cdef double TANH_CLAMP = 50.0
cdef int SERIES_TERMS = 26
cdef int CF_MAXIT = 2000

cdef double X21[21]
cdef double WK21[21]
cdef double WG21[21]


def _init_rule():
    cdef int i, j
    for i in range(21):
        WG21[i] = 0.0
    for i in range(10):
        X21[i] = -XGK[i]
        X21[20 - i] = XGK[i]
        WK21[i] = WGK[i]
        WK21[20 - i] = WGK[i]
    X21[10] = 0.0
    WK21[10] = WGK[10]
    for j in range(5):
        i = 2 * j + 1
        WG21[i] = WG[j]
        WG21[20 - i] = WG[j]


_init_rule()


cdef void _series_small(double x, double *k0, double *k1) noexcept nogil:
    cdef double q = 0.25 * x * x
    cdef double lg = log(0.5 * x)
    cdef double term = 1.0, t1 = 0.5 * x
    cdef double i0 = 0.0, s0 = 0.0, i1 = 0.0, s1 = 0.0, h = 0.0
    cdef int k
    for k in range(SERIES_TERMS):
        i0 += term
        s0 += term * h
        i1 += t1
        s1 += t1 * (2.0 * h + 1.0 / (k + 1))
        h += 1.0 / (k + 1)
        term = term * q / ((k + 1.0) * (k + 1.0))
        t1 = t1 * q / ((k + 1.0) * (k + 2.0))
    k0[0] = -(lg + EULER_GAMMA) * i0 + s0
    k1[0] = 1.0 / x + lg * i1 + EULER_GAMMA * i1 - 0.5 * s1


cdef int _steed_scaled(double x, double *k0e, double *k1e) noexcept nogil:
    cdef double b = 2.0 * (1.0 + x)
    cdef double d = 1.0 / b
    cdef double h = d, delh = d
    cdef double q1 = 0.0, q2 = 1.0, a1 = 0.25
    cdef double q = a1, c = a1, a = -a1
    cdef double s = 1.0 + q * delh
    cdef double qnew, dels, ke
    cdef int i
    for i in range(1, CF_MAXIT):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if fabs(dels / s) < EPS:
            h = a1 * h
            ke = sqrt(M_PI / (2.0 * x)) / s
            k0e[0] = ke
            k1e[0] = ke * (x + 0.5 - h) / x
            return 0
    return -1


cdef int _k01_scaled(double x, double *k0e, double *k1e) noexcept nogil:
    cdef double k0, k1, ex
    if x <= 2.0:
        _series_small(x, &k0, &k1)
        ex = exp(x)
        k0e[0] = k0 * ex
        k1e[0] = k1 * ex
        return 0
    return _steed_scaled(x, k0e, k1e)


cdef int _k01(double x, double *k0, double *k1) noexcept nogil:
    cdef double ex
    cdef int rc
    if x <= 2.0:
        _series_small(x, k0, k1)
        return 0
    rc = _steed_scaled(x, k0, k1)
    ex = exp(-x)
    k0[0] *= ex
    k1[0] *= ex
    return rc


def bessel_k01_scaled(x):
    """Return (exp(x) K0(x), exp(x) K1(x)) for an array of positive x."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    flat = arr.ravel()
    cdef double[::1] xv = flat
    out0 = np.empty(flat.shape[0])
    out1 = np.empty(flat.shape[0])
    cdef double[::1] o0 = out0
    cdef double[::1] o1 = out1
    cdef Py_ssize_t i
    cdef int bad = 0
    with nogil:
        for i in range(xv.shape[0]):
            if _k01_scaled(xv[i], &o0[i], &o1[i]) != 0:
                bad = 1
    if bad:
        raise ArithmeticError("Steed continued fraction did not converge")
    return out0.reshape(arr.shape), out1.reshape(arr.shape)


def bessel_k01(x):
    """Return (K0(x), K1(x)) for an array of positive x."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    flat = arr.ravel()
    cdef double[::1] xv = flat
    out0 = np.empty(flat.shape[0])
    out1 = np.empty(flat.shape[0])
    cdef double[::1] o0 = out0
    cdef double[::1] o1 = out1
    cdef Py_ssize_t i
    cdef int bad = 0
    with nogil:
        for i in range(xv.shape[0]):
            if _k01(xv[i], &o0[i], &o1[i]) != 0:
                bad = 1
    if bad:
        raise ArithmeticError("Steed continued fraction did not converge")
    return out0.reshape(arr.shape), out1.reshape(arr.shape)


def k0_scalar(double x):
    cdef double k0, k1
    _k01(x, &k0, &k1)
    return k0


def k1_scalar(double x):
    cdef double k0, k1
    _k01(x, &k0, &k1)
    return k1


cdef struct PopParams:
    double r
    double c
    double nu
    double tau
    double k0_scale


cdef inline void _pop_eval(const PopParams *p, double w, double *out) noexcept nogil:
    cdef double aw = fabs(w)
    cdef double k0e, k1e, arg, th, ep, em, g
    _k01_scaled(aw, &k0e, &k1e)
    arg = p.nu - p.c * w
    if arg > TANH_CLAMP:
        arg = TANH_CLAMP
    elif arg < -TANH_CLAMP:
        arg = -TANH_CLAMP
    th = tanh(arg)
    ep = 0.5 * (1.0 - p.tau) * exp(p.r * w - aw)
    em = 0.5 * (1.0 + p.tau) * exp(-p.r * w - aw)
    g = th * p.k0_scale * k0e * (ep + em)
    out[0] = g
    out[1] = g * w
    out[2] = th * aw * k1e * (ep - em)


def population_integrand(w, double r, double c, double nu, double tau, double k0_scale=1.0):
    """Rows N, alpha, beta of the convolution integrand at abscissae ``w``."""
    arr = np.ascontiguousarray(w, dtype=np.float64).ravel()
    cdef double[::1] wv = arr
    out = np.empty((3, arr.shape[0]))
    cdef double[:, ::1] ov = out
    cdef PopParams p
    cdef double buf[3]
    cdef Py_ssize_t i
    p.r = r; p.c = c; p.nu = nu; p.tau = tau; p.k0_scale = k0_scale
    with nogil:
        for i in range(wv.shape[0]):
            _pop_eval(&p, wv[i], buf)
            ov[0, i] = buf[0]
            ov[1, i] = buf[1]
            ov[2, i] = buf[2]
    return out


cdef void _rule(const PopParams *p, double a, double b,
                double *est, double *err, double *rabs) noexcept nogil:
    cdef double mid = 0.5 * (a + b)
    cdef double half = 0.5 * (b - a)
    cdef double kk[3]
    cdef double gg[3]
    cdef double ra[3]
    cdef double f[3]
    cdef int i, k
    for k in range(3):
        kk[k] = 0.0
        gg[k] = 0.0
        ra[k] = 0.0
    for i in range(21):
        _pop_eval(p, mid + half * X21[i], f)
        for k in range(3):
            kk[k] += WK21[i] * f[k]
            gg[k] += WG21[i] * f[k]
            ra[k] += WK21[i] * fabs(f[k])
    for k in range(3):
        est[k] = kk[k] * half
        err[k] = fabs((kk[k] - gg[k]) * half)
        rabs[k] = ra[k] * fabs(half)


cdef inline bint _frozen(double a, double b, const double *err, const double *rabs) noexcept nogil:
    cdef int k
    cdef double scale = fabs(a)
    if fabs(b) > scale:
        scale = fabs(b)
    if scale < 1e-300:
        scale = 1e-300
    if (b - a) <= 4.0 * EPS * scale:
        return True
    for k in range(3):
        if err[k] > 50.0 * EPS * rabs[k]:
            return False
    return True


def population_integrals(double r, double c, double nu, double tau, double trunc,
                         double abs_tol, double rel_tol, int max_sub, double k0_scale=1.0):
    """Adaptive GK21 integration of ``population_integrand`` over the line.

    Returns ``(values, errors, n_panels, converged)``.
    """
    cdef double w0 = nu / c if c > 0.0 else 0.0
    cdef double span = trunc / (1.0 - fabs(r)) + fabs(w0)
    cuts = sorted({-span, 0.0, w0, span})
    cdef int n0 = len(cuts) - 1
    cdef int cap = (max_sub if max_sub > n0 else n0) + 2
    cdef double *lo = <double *> malloc(cap * sizeof(double))
    cdef double *hi = <double *> malloc(cap * sizeof(double))
    cdef double *est = <double *> malloc(3 * cap * sizeof(double))
    cdef double *err = <double *> malloc(3 * cap * sizeof(double))
    cdef double *rabs = <double *> malloc(3 * cap * sizeof(double))
    cdef char *frz = <char *> malloc(cap * sizeof(char))
    if not lo or not hi or not est or not err or not rabs or not frz:
        free(lo); free(hi); free(est); free(err); free(rabs); free(frz)
        raise MemoryError()
    cdef PopParams p
    p.r = r; p.c = c; p.nu = nu; p.tau = tau; p.k0_scale = k0_scale
    cdef int n = 0, i, j, k, conv = 0
    cdef double total[3]
    cdef double terr[3]
    cdef double tol[3]
    cdef double key, best, a, b, m
    cdef bint ok
    for i in range(n0):
        if cuts[i + 1] > cuts[i]:
            lo[n] = cuts[i]
            hi[n] = cuts[i + 1]
            n += 1
    try:
        with nogil:
            for i in range(n):
                _rule(&p, lo[i], hi[i], &est[3 * i], &err[3 * i], &rabs[3 * i])
                frz[i] = _frozen(lo[i], hi[i], &err[3 * i], &rabs[3 * i])
            while True:
                for k in range(3):
                    total[k] = 0.0
                    terr[k] = 0.0
                for i in range(n):
                    for k in range(3):
                        total[k] += est[3 * i + k]
                        terr[k] += err[3 * i + k]
                ok = True
                for k in range(3):
                    tol[k] = rel_tol * fabs(total[k])
                    if tol[k] < abs_tol:
                        tol[k] = abs_tol
                    if terr[k] > tol[k]:
                        ok = False
                if ok:
                    conv = 1
                    break
                if n >= max_sub:
                    break
                best = -1.0
                j = -1
                for i in range(n):
                    if frz[i]:
                        continue
                    key = 0.0
                    for k in range(3):
                        if err[3 * i + k] / tol[k] > key:
                            key = err[3 * i + k] / tol[k]
                    if key > best:
                        best = key
                        j = i
                if j < 0:
                    conv = 1
                    break
                a = lo[j]
                b = hi[j]
                m = 0.5 * (a + b)
                hi[j] = m
                lo[n] = m
                hi[n] = b
                _rule(&p, a, m, &est[3 * j], &err[3 * j], &rabs[3 * j])
                _rule(&p, m, b, &est[3 * n], &err[3 * n], &rabs[3 * n])
                frz[j] = _frozen(a, m, &err[3 * j], &rabs[3 * j])
                frz[n] = _frozen(m, b, &err[3 * n], &rabs[3 * n])
                n += 1
        values = np.array([total[0], total[1], total[2]])
        errors = np.array([terr[0], terr[1], terr[2]])
        return values, errors, n, bool(conv)
    finally:
        free(lo); free(hi); free(est); free(err); free(rabs); free(frz)


BACKEND = "cython"
