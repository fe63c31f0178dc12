"""Modified Bessel functions K0, K1 and adaptive quadrature.

K0/K1 use the ascending series on (0, 2] and Steed's continued fraction
(Temme's form for order zero) above 2; both are accurate to a few ulp.
Quadrature is a globally adaptive 21-point Gauss-Kronrod bisection.
"""
import contextlib
import contextvars
import math
from dataclasses import dataclass

import numpy as np

from . import _pykernels
from ._backend import BACKEND, kernels

__all__ = [
    "BACKEND",
    "QuadratureError",
    "QuadratureSpec",
    "bessel_k0",
    "bessel_k0e",
    "bessel_k1",
    "bessel_k1e",
    "integrate",
    "k0_scale",
    "perturbed_k0",
]

_K0_SCALE = contextvars.ContextVar("k0_scale", default=1.0)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for ``integrate`` and the population integrals.

    ``truncation_exponent`` is the decay exponent beyond which
    exponentially decaying tails are dropped.
    """

    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 2000
    truncation_exponent: float = 40.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be a positive integer")
        if not self.truncation_exponent >= 30:
            raise ValueError("truncation_exponent must be at least 30")


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its subdivision limit.

    ``estimate`` and ``error`` hold the best value and error bound reached.
    """

    def __init__(self, message, estimate, error, n_panels):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.n_panels = n_panels


def k0_scale():
    """Current multiplicative factor applied to K0 (1.0 unless perturbed)."""
    return _K0_SCALE.get()


@contextlib.contextmanager
def perturbed_k0(scale):
    """Multiply every K0 value by ``scale`` inside the block.

    Sensitivity hook for validation: a small perturbation must be caught by
    the Monte-Carlo oracle checks. Scoped to the current context, so other
    threads are unaffected.
    """
    token = _K0_SCALE.set(float(scale))
    try:
        yield
    finally:
        _K0_SCALE.reset(token)


def _check_domain(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("Bessel K argument must be positive and finite")
    return arr


def _unwrap(x, arr):
    return float(arr.reshape(-1)[0]) if np.ndim(x) == 0 else arr


def bessel_k0(x):
    """K0(x) for positive finite x (scalar or array)."""
    arr = _check_domain(x)
    return _unwrap(x, kernels.bessel_k01(arr)[0] * _K0_SCALE.get())


def bessel_k1(x):
    """K1(x) for positive finite x (scalar or array)."""
    arr = _check_domain(x)
    return _unwrap(x, kernels.bessel_k01(arr)[1])


def bessel_k0e(x):
    """exp(x)·K0(x); does not underflow for large x."""
    arr = _check_domain(x)
    return _unwrap(x, kernels.bessel_k01_scaled(arr)[0] * _K0_SCALE.get())


def bessel_k1e(x):
    """exp(x)·K1(x); does not underflow for large x."""
    arr = _check_domain(x)
    return _unwrap(x, kernels.bessel_k01_scaled(arr)[1])


def _as_vector_fn(f):
    """Wrap f so it maps an array to an array, vectorizing if it is scalar-only."""
    probe = np.array([0.25, 0.5])
    try:
        out = np.asarray(f(probe), dtype=float)
        if out.shape == probe.shape:
            return f
    except (TypeError, ValueError):
        pass
    return np.vectorize(lambda u: float(f(float(u))), otypes=[float])


def integrate(f, lower, upper, spec=QuadratureSpec(), points=(), tail_scale=1.0):
    """Integrate f over (lower, upper); endpoints may be infinite.

    Interior ``points`` (e.g. singularities) become panel boundaries. Each
    semi-infinite tail is mapped to [0, 1) by u = a ± tail_scale·t/(1−t).
    ``f`` may be vectorized; scalar-only callables are wrapped.
    """
    lower = float(lower)
    upper = float(upper)
    if math.isnan(lower) or math.isnan(upper):
        raise ValueError("integration limits must not be NaN")
    if lower == upper:
        return 0.0
    if lower > upper:
        return -integrate(f, upper, lower, spec, points, tail_scale)
    if not tail_scale > 0:
        raise ValueError("tail_scale must be positive")
    g = _as_vector_fn(f)
    cuts = sorted({float(p) for p in points if lower < p < upper and math.isfinite(p)})
    if not cuts and not math.isfinite(lower) and not math.isfinite(upper):
        cuts = [0.0]
    knots = [lower, *cuts, upper]
    pieces = []  # (kind, anchor) and interval in its own variable
    for a, b in zip(knots[:-1], knots[1:]):
        if math.isfinite(a) and math.isfinite(b):
            pieces.append(("finite", 0.0, a, b))
        elif math.isfinite(a):
            pieces.append(("right", a, 0.0, 1.0))
        else:
            pieces.append(("left", b, 0.0, 1.0))

    def mapped(kind, anchor):
        if kind == "finite":
            return lambda u: np.asarray(g(u), dtype=float)
        sgn = 1.0 if kind == "right" else -1.0

        def h(t):
            one_minus = 1.0 - t
            u = anchor + sgn * tail_scale * t / one_minus
            return np.asarray(g(u), dtype=float) * (tail_scale / (one_minus * one_minus))

        return h

    fns = [mapped(kind, anchor) for kind, anchor, _, _ in pieces]
    # one integrand over a concatenated parameter axis: piece k lives on [k, k+1]
    spans = [(a, b) for _, _, a, b in pieces]

    def joined(s):
        out = np.empty_like(s)
        k = np.minimum(np.floor(s).astype(int), len(fns) - 1)
        for j, fn in enumerate(fns):
            m = k == j
            if m.any():
                a, b = spans[j]
                frac = s[m] - j
                out[m] = fn(a + frac * (b - a)) * (b - a)
        return out[None, :]

    intervals = [(float(j), float(j + 1)) for j in range(len(fns))]
    val, err, n, ok = _pykernels.adaptive_gk21(
        joined, intervals, spec.abs_tol, spec.rel_tol, spec.max_subdivisions
    )
    val, err = float(val[0]), float(err[0])
    if not math.isfinite(val):
        raise QuadratureError("integrand produced non-finite values", val, err, n)
    if not ok:
        raise QuadratureError(
            f"no convergence after {n} panels (estimate {val!r}, error {err:.3g})", val, err, n
        )
    return val
