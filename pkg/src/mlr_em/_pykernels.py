"""Pure-Python (NumPy) kernels: scaled K0/K1 and adaptive GK21 quadrature.

This module mirrors the compiled ``_ckernels`` extension function for
function; it is selected automatically when the extension is unavailable.
"""
import numpy as np

from ._gk21 import WG, WGK, XGK

EULER_GAMMA = 0.57721566490153286061
_EPS = np.finfo(float).eps
_SERIES_TERMS = 26
_CF_MAXIT = 2000
TANH_CLAMP = 50.0

# full 21-point abscissae/weights on [-1, 1]
_X21 = np.concatenate([-np.asarray(XGK[:-1]), [0.0], np.asarray(XGK[:-1])[::-1]])
_WK21 = np.concatenate([np.asarray(WGK[:-1]), [WGK[-1]], np.asarray(WGK[:-1])[::-1]])
_WG21 = np.zeros(21)
for _j, _w in enumerate(WG):
    _i = 2 * _j + 1
    _WG21[_i] = _w
    _WG21[20 - _i] = _w


def _series_small(x):
    """K0, K1 by their ascending series; valid for 0 < x <= 2."""
    q = 0.25 * x * x
    lg = np.log(0.5 * x)
    term = np.ones_like(x)
    t1 = 0.5 * x
    i0 = np.zeros_like(x)
    s0 = np.zeros_like(x)
    i1 = np.zeros_like(x)
    s1 = np.zeros_like(x)
    h = 0.0
    for k in range(_SERIES_TERMS):
        i0 += term
        s0 += term * h
        i1 += t1
        s1 += t1 * (2.0 * h + 1.0 / (k + 1))
        h += 1.0 / (k + 1)
        term = term * q / ((k + 1) * (k + 1))
        t1 = t1 * q / ((k + 1) * (k + 2))
    k0 = -(lg + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / x + lg * i1 + EULER_GAMMA * i1 - 0.5 * s1
    return k0, k1


def _steed_scaled(x):
    """exp(x)*K0(x), exp(x)*K1(x) from Steed's continued fraction; x > 2."""
    k0e = np.empty_like(x)
    k1e = np.empty_like(x)
    idx = np.arange(x.size)
    xs = x.copy()
    b = 2.0 * (1.0 + xs)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(xs)
    q2 = np.ones_like(xs)
    a1 = 0.25
    q = np.full_like(xs, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _CF_MAXIT):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        done = np.abs(dels / s) < _EPS
        if done.any():
            j = idx[done]
            hh = a1 * h[done]
            ke = np.sqrt(np.pi / (2.0 * xs[done])) / s[done]
            k0e[j] = ke
            k1e[j] = ke * (xs[done] + 0.5 - hh) / xs[done]
            keep = ~done
            if not keep.any():
                return k0e, k1e
            idx, xs, b, d, h, delh = idx[keep], xs[keep], b[keep], d[keep], h[keep], delh[keep]
            q1, q2, q, s = q1[keep], q2[keep], q[keep], s[keep]
    raise ArithmeticError("Steed continued fraction did not converge")


def bessel_k01_scaled(x):
    """Return (exp(x) K0(x), exp(x) K1(x)) for an array of positive x."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    k0e = np.empty_like(x)
    k1e = np.empty_like(x)
    small = x <= 2.0
    if small.any():
        xs = x[small]
        k0, k1 = _series_small(xs)
        ex = np.exp(xs)
        k0e[small] = k0 * ex
        k1e[small] = k1 * ex
    big = ~small
    if big.any():
        k0e[big], k1e[big] = _steed_scaled(x[big])
    return k0e.reshape(shape), k1e.reshape(shape)


def bessel_k01(x):
    """Return (K0(x), K1(x)) for an array of positive x."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= 2.0
    if small.any():
        k0[small], k1[small] = _series_small(x[small])
    big = ~small
    if big.any():
        xb = x[big]
        k0e, k1e = _steed_scaled(xb)
        ex = np.exp(-xb)
        k0[big] = k0e * ex
        k1[big] = k1e * ex
    return k0.reshape(shape), k1.reshape(shape)


def adaptive_gk21(fvec, intervals, abs_tol, rel_tol, max_sub):
    """Globally adaptive GK21 bisection for a vector-valued integrand.

    ``fvec`` maps an array of m abscissae to an array of shape (k, m).
    Returns ``(values, errors, n_panels, converged)``.
    """
    intervals = [(float(a), float(b)) for a, b in intervals if b > a]
    cap = max(max_sub, len(intervals)) + 2
    lo = np.empty(cap)
    hi = np.empty(cap)
    ests = None
    errs = None
    absr = None
    frozen = np.zeros(cap, dtype=bool)

    def rule(a, b):
        a = np.asarray(a)
        b = np.asarray(b)
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        pts = (mid[:, None] + half[:, None] * _X21[None, :]).ravel()
        fv = np.asarray(fvec(pts), dtype=float).reshape(-1, a.size, 21)
        k21 = (fv * _WK21).sum(axis=2) * half
        g10 = (fv * _WG21).sum(axis=2) * half
        rabs = (np.abs(fv) * _WK21).sum(axis=2) * np.abs(half)
        return k21, np.abs(k21 - g10), rabs

    n = len(intervals)
    if n == 0:
        k = np.asarray(fvec(np.zeros(1))).reshape(-1, 1).shape[0]
        return np.zeros(k), np.zeros(k), 0, True
    lo[:n] = [iv[0] for iv in intervals]
    hi[:n] = [iv[1] for iv in intervals]
    k21, e, ra = rule(lo[:n], hi[:n])
    ncomp = k21.shape[0]
    ests = np.zeros((ncomp, cap))
    errs = np.zeros((ncomp, cap))
    absr = np.zeros((ncomp, cap))
    ests[:, :n] = k21
    errs[:, :n] = e
    absr[:, :n] = ra

    def freeze(j):
        at_roundoff = np.all(errs[:, j] <= 50.0 * _EPS * absr[:, j])
        too_narrow = (hi[j] - lo[j]) <= 4.0 * _EPS * max(abs(lo[j]), abs(hi[j]), 1e-300)
        if at_roundoff or too_narrow:
            frozen[j] = True

    for j in range(n):
        freeze(j)

    while True:
        total = ests[:, :n].sum(axis=1)
        tot_err = errs[:, :n].sum(axis=1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        if np.all(tot_err <= tol):
            return total, tot_err, n, True
        if n >= max_sub:
            return total, tot_err, n, False
        key = (errs[:, :n] / tol[:, None]).max(axis=0)
        key[frozen[:n]] = -1.0
        j = int(np.argmax(key))
        if key[j] < 0.0:
            # every panel is at rounding level; nothing left to refine
            return total, tot_err, n, True
        a, b = lo[j], hi[j]
        m = 0.5 * (a + b)
        k21, e, ra = rule(np.array([a, m]), np.array([m, b]))
        lo[j], hi[j] = a, m
        lo[n], hi[n] = m, b
        ests[:, j], errs[:, j], absr[:, j] = k21[:, 0], e[:, 0], ra[:, 0]
        ests[:, n], errs[:, n], absr[:, n] = k21[:, 1], e[:, 1], ra[:, 1]
        frozen[j] = False
        frozen[n] = False
        freeze(j)
        freeze(n)
        n += 1


def population_integrand(w, r, c, nu, tau, k0_scale=1.0):
    """The three convolution integrands in the K-argument variable w.

    Rows: tanh(nu - c w) K0(|w|) Ec(w), the same times w, and
    tanh(nu - c w) |w| K1(|w|) Es(w), where Ec/Es are the cosh/sinh
    mixing factors normalised by cosh(nu*), written through tau = tanh(nu*).
    """
    aw = np.abs(w)
    k0e, k1e = bessel_k01_scaled(aw)
    th = np.tanh(np.clip(nu - c * w, -TANH_CLAMP, TANH_CLAMP))
    ep = 0.5 * (1.0 - tau) * np.exp(r * w - aw)
    em = 0.5 * (1.0 + tau) * np.exp(-r * w - aw)
    g = th * k0_scale * k0e * (ep + em)
    return np.stack([g, g * w, th * aw * k1e * (ep - em)])


def population_integrals(r, c, nu, tau, trunc, abs_tol, rel_tol, max_sub, k0_scale=1.0):
    """Integrate ``population_integrand`` over the real line.

    The range is cut where (1 - |r|)|w| exceeds ``trunc`` and split at 0
    (Bessel singularity) and at nu/c (centre of the tanh step).
    """
    w0 = nu / c if c > 0.0 else 0.0
    span = trunc / (1.0 - abs(r)) + abs(w0)
    cuts = sorted({-span, 0.0, w0, span})
    intervals = list(zip(cuts[:-1], cuts[1:]))
    return adaptive_gk21(
        lambda w: population_integrand(w, r, c, nu, tau, k0_scale),
        intervals, abs_tol, rel_tol, max_sub,
    )


def k0_scalar(x):
    return float(bessel_k01(np.array([x]))[0][0])


def k1_scalar(x):
    return float(bessel_k01(np.array([x]))[1][0])


BACKEND = "python"

__all__ = [
    "BACKEND",
    "EULER_GAMMA",
    "adaptive_gk21",
    "bessel_k01",
    "bessel_k01_scaled",
    "k0_scalar",
    "k1_scalar",
    "population_integrals",
    "population_integrand",
]
