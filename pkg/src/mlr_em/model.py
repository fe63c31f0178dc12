"""Domain types for the symmetric two-component mixed linear regression model.

Regression vectors (θ, θ*) are plain 1-D float ``numpy`` arrays throughout.
"""
import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "Dataset",
    "DegenerateIterateError",
    "EMRUN_COLUMNS",
    "EmRun",
    "GroundTruth",
    "MixingState",
    "SuboptimalityAngles",
    "as_vector",
    "mixing_from_probability",
    "read_dataset_csv",
    "sign",
    "suboptimality",
    "target_mixture",
    "write_dataset_csv",
    "write_emrun",
]


class DegenerateIterateError(ValueError):
    """A vector that must be normalised has zero norm."""


def sign(v):
    """Sign with sgn(0) = +1."""
    return 1.0 if v >= 0 else -1.0


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _unit(v, name):
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DegenerateIterateError(f"{name} has zero norm")
    return v / n, n


@dataclass(frozen=True)
class MixingState:
    """Mixing weights stored through tanh ν = π(1) − π(2).

    Storing tanh ν keeps the degenerate mixtures {1,0}, {0,1} finite.
    """

    tanh_nu: float

    def __post_init__(self):
        t = float(self.tanh_nu)
        if not -1.0 <= t <= 1.0:
            raise ValueError("tanh_nu must lie in [-1, 1]")
        object.__setattr__(self, "tanh_nu", t)

    @classmethod
    def from_nu(cls, nu):
        return cls(math.tanh(nu) if math.isfinite(nu) else math.copysign(1.0, nu))

    @property
    def nu(self):
        t = self.tanh_nu
        if t == 1.0:
            return math.inf
        if t == -1.0:
            return -math.inf
        return math.atanh(t)

    @property
    def p1(self):
        return 0.5 * (1.0 + self.tanh_nu)

    @property
    def p2(self):
        return 0.5 * (1.0 - self.tanh_nu)

    @property
    def probabilities(self):
        return (self.p1, self.p2)

    def l1_from_half(self):
        """‖½ − π‖₁, which equals |tanh ν|."""
        return abs(self.tanh_nu)


def mixing_from_probability(p1):
    """MixingState with π(1) = p1."""
    p1 = float(p1)
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    return MixingState(2.0 * p1 - 1.0)


def target_mixture(pi_star, sign_rho0):
    """The sign-resolved limit ½ − sgn(ρ⁰)(½ − π*)."""
    return MixingState(sign(sign_rho0) * pi_star.tanh_nu)


@dataclass(frozen=True)
class GroundTruth:
    theta_star: np.ndarray
    pi_star: MixingState
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "theta_star", as_vector(self.theta_star, "theta_star"))
        s = float(self.sigma)
        if not (s >= 0.0 and math.isfinite(s)):
            raise ValueError("sigma must be finite and nonnegative")
        object.__setattr__(self, "sigma", s)

    @property
    def d(self):
        return self.theta_star.size

    def snr(self):
        norm = float(np.linalg.norm(self.theta_star))
        return math.inf if self.sigma == 0.0 else norm / self.sigma

    @classmethod
    def from_snr(cls, theta_star, pi_star, snr):
        """σ = ‖θ*‖/snr; snr = inf gives σ = 0."""
        theta_star = as_vector(theta_star, "theta_star")
        sigma = 0.0 if math.isinf(snr) else float(np.linalg.norm(theta_star)) / snr
        return cls(theta_star, pi_star, sigma)


class SuboptimalityAngles(NamedTuple):
    """Angles of an iterate against θ*.

    ``tan_varphi`` is |ρ|/√(1−ρ²) computed from the parallel and orthogonal
    parts directly, so it stays accurate as ρ → ±1.
    """

    rho: float
    varphi: float
    phi: float
    sign_rho: float
    tan_varphi: float


def suboptimality(theta, theta_star):
    """ρ, φ = π/2 − arccos|ρ|, ϕ = 2 arccos|ρ| and sgn ρ."""
    th, _ = _unit(as_vector(theta, "theta"), "theta")
    e1, _ = _unit(as_vector(theta_star, "theta_star"), "theta_star")
    if th.size != e1.size:
        raise ValueError("dimension mismatch")
    c = float(th @ e1)
    rho = min(1.0, max(-1.0, c))
    par = abs(c)
    perp = float(np.linalg.norm(th - c * e1))
    phi = 2.0 * math.atan2(perp, par)
    varphi = 0.5 * math.pi - 0.5 * phi
    tan_varphi = par / perp if perp > 0.0 else math.inf
    return SuboptimalityAngles(rho, varphi, phi, sign(rho), tan_varphi)


@dataclass
class Dataset:
    """n samples (x_i, y_i) with hidden labels z_i ∈ {1, 2}."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.z = np.asarray(self.z, dtype=np.int8)
        if self.x.ndim != 2 or self.x.shape[0] < 1:
            raise ValueError("x must be an (n, d) array with n >= 1")
        n = self.x.shape[0]
        if self.y.shape != (n,) or self.z.shape != (n,):
            raise ValueError("x, y, z disagree on n")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("x has non-finite entries")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]


def _fmt(v):
    return repr(float(v))


def write_dataset_csv(path, ds):
    """Header ``x_0..x_{d-1},y,z``; floats written with shortest round-trip repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{j}" for j in range(ds.d)] + ["y", "z"])
        for xi, yi, zi in zip(ds.x.tolist(), ds.y.tolist(), ds.z.tolist()):
            w.writerow([_fmt(v) for v in xi] + [_fmt(yi), int(zi)])


def read_dataset_csv(path, seed=None):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        d = len(header) - 2
        if d < 1 or header[-2:] != ["y", "z"] or header[:d] != [f"x_{j}" for j in range(d)]:
            raise ValueError(f"unexpected dataset header: {header}")
        rows = [row for row in r if row]
    arr = np.array([[float(v) for v in row[:-1]] for row in rows])
    z = np.array([int(row[-1]) for row in rows], dtype=np.int8)
    return Dataset(arr[:, :d], arr[:, d], z, seed)


@dataclass
class EmRun:
    """A recorded EM trajectory with per-iteration diagnostics.

    Row t describes (θ^t, tanh ν^t); row 0 is the initial point.
    ``theta_rel_err`` uses sgn(ρ^t), ``pi_l1_err`` uses the target mixture
    resolved with sgn(ρ⁰).
    """

    thetas: np.ndarray
    tanh_nus: np.ndarray
    angles: list
    theta_rel_err: np.ndarray
    pi_l1_err: np.ndarray
    terminated_at: int
    termination_reason: str
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_iterates(cls, thetas, tanh_nus, truth, reason, metadata=None):
        """Build a run and its diagnostics; ``truth=None`` leaves them NaN.

        Zero iterates (a degenerate stop) get NaN angles and θ-error 1.
        """
        thetas = np.asarray(thetas, dtype=float)
        tanh_nus = np.asarray(tanh_nus, dtype=float)
        nan_angles = SuboptimalityAngles(math.nan, math.nan, math.nan, math.nan, math.nan)
        if truth is None:
            k = len(thetas)
            return cls(thetas, tanh_nus, [nan_angles] * k, np.full(k, math.nan),
                       np.full(k, math.nan), k - 1, reason, dict(metadata or {}))
        ts = truth.theta_star
        ts_norm = float(np.linalg.norm(ts))
        angles = [suboptimality(th, ts) if np.any(th) else nan_angles for th in thetas]
        s0 = angles[0].sign_rho
        err = np.array([float(np.linalg.norm(th - a.sign_rho * ts)) / ts_norm if np.any(th) else 1.0
                        for th, a in zip(thetas, angles)])
        pi_err = np.abs(tanh_nus - s0 * truth.pi_star.tanh_nu)
        return cls(thetas, tanh_nus, angles, err, pi_err, len(thetas) - 1, reason,
                   dict(metadata or {}))

    @property
    def rho(self):
        return np.array([a.rho for a in self.angles])

    @property
    def varphi(self):
        return np.array([a.varphi for a in self.angles])

    @property
    def phi(self):
        return np.array([a.phi for a in self.angles])

    @property
    def tan_varphi(self):
        return np.array([a.tan_varphi for a in self.angles])

    def rows(self):
        for t, a in enumerate(self.angles):
            yield (t, a.rho, a.varphi, a.phi, self.theta_rel_err[t], self.pi_l1_err[t],
                   self.tanh_nus[t])


EMRUN_COLUMNS = ("t", "rho", "varphi", "phi", "theta_rel_err", "pi_l1_err", "tanh_nu")


def write_emrun(path, run):
    """Write the trajectory CSV and a ``<path>.meta.json`` sidecar."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EMRUN_COLUMNS)
        for row in run.rows():
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    meta = dict(run.metadata)
    meta.update(terminated_at=run.terminated_at, termination_reason=run.termination_reason)
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
