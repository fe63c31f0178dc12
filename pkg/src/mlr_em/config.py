"""Experiment configuration: an INI file with one section per command.

Example::

    [global]
    output_dir = out
    workers = 4

    [convergence]
    d = 50
    snr_list = 1e6, 1e7, 1e8
    trials = 50

Keys omitted from a section take their defaults; unknown keys are errors.
"""
import configparser
import dataclasses
import io
import math
import os
from dataclasses import dataclass, field

__all__ = [
    "ConfigError",
    "ConvergenceConfig",
    "ExperimentConfig",
    "GlobalConfig",
    "MixingConfig",
    "TrajectoryConfig",
    "ValidateConfig",
    "WeightsCompareConfig",
    "dumps",
    "load",
    "loads",
]

SUITES = ("specfun", "population", "diagnostics")


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _check_common(block, name):
    _check(block.d >= 1, f"[{name}] d must be >= 1")
    _check(block.trials >= 1, f"[{name}] trials must be >= 1")
    _check(0 <= block.seed < 2**64, f"[{name}] seed must be a 64-bit unsigned integer")


def _check_snr(v, name):
    _check(v > 0, f"[{name}] snr values must be positive")


def _check_p(p, name):
    _check(0.0 <= p <= 1.0, f"[{name}] pi_star values must lie in [0, 1]")


@dataclass
class GlobalConfig:
    output_dir: str = "out"
    workers: int = 0
    exact_noiseless: bool = False
    quad_abs_tol: float = 1e-13
    quad_rel_tol: float = 1e-11
    quad_max_subdivisions: int = 2000
    quad_truncation_exponent: float = 40.0

    def validate(self):
        _check(self.workers >= 0, "[global] workers must be >= 0 (0 = all cores)")
        _check(self.quad_abs_tol > 0 and self.quad_rel_tol > 0, "[global] quad tolerances must be > 0")
        _check(self.quad_max_subdivisions >= 1, "[global] quad_max_subdivisions must be >= 1")
        _check(self.quad_truncation_exponent >= 30, "[global] quad_truncation_exponent must be >= 30")

    def n_workers(self):
        return self.workers or (os.cpu_count() or 1)


@dataclass
class TrajectoryConfig:
    d: int = 2
    snr: float = 1e8
    n: int = 5000
    trials: int = 60
    iterations: int = 100
    pi_star: float = 0.7
    seed: int = 0

    def validate(self):
        _check_common(self, "trajectory")
        _check(self.d >= 2, "[trajectory] d must be >= 2 for a planar trajectory")
        _check_snr(self.snr, "trajectory")
        _check(self.n >= self.d, "[trajectory] n must be >= d")
        _check(self.iterations >= 1, "[trajectory] iterations must be >= 1")
        _check_p(self.pi_star, "trajectory")


@dataclass
class ConvergenceConfig:
    d: int = 50
    snr_list: list = field(default_factory=lambda: [1e6, 1e7, 1e8])
    varphi0: float = math.atan(1.5)
    n: int = 5000
    trials: int = 50
    iterations: int = 4
    pi_star: float = 0.7
    population_mode: bool = False
    seed: int = 0

    def validate(self):
        _check_common(self, "convergence")
        _check(len(self.snr_list) >= 1, "[convergence] snr_list must not be empty")
        for v in self.snr_list:
            _check_snr(v, "convergence")
        _check(0 < self.varphi0 < math.pi / 2, "[convergence] varphi0 must lie in (0, pi/2)")
        _check(self.n >= self.d, "[convergence] n must be >= d")
        _check(self.iterations >= 2, "[convergence] iterations must be >= 2 (three points to fit)")
        _check_p(self.pi_star, "convergence")


@dataclass
class MixingConfig:
    d: int = 50
    snr_list: list = field(default_factory=lambda: [1e8])
    varphi0: float = 0.3
    n: int = 5000
    trials: int = 50
    iterations: int = 10
    pi_star: float = 0.7
    seed: int = 0

    def validate(self):
        _check_common(self, "mixing")
        _check(len(self.snr_list) >= 1, "[mixing] snr_list must not be empty")
        for v in self.snr_list:
            _check_snr(v, "mixing")
        _check(0 < self.varphi0 <= math.pi / 2, "[mixing] varphi0 must lie in (0, pi/2]")
        _check(self.n >= self.d, "[mixing] n must be >= d")
        _check(self.iterations >= 1, "[mixing] iterations must be >= 1")
        _check_p(self.pi_star, "mixing")


@dataclass
class WeightsCompareConfig:
    d: int = 50
    snr: float = 1e8
    varphi0: float = 0.3
    pi_star_list: list = field(default_factory=lambda: [0.6, 0.8, 1.0])
    n: int = 5000
    trials: int = 50
    iterations: int = 10
    seed: int = 0

    def validate(self):
        _check_common(self, "weights_compare")
        _check_snr(self.snr, "weights_compare")
        _check(0 < self.varphi0 <= math.pi / 2, "[weights_compare] varphi0 must lie in (0, pi/2]")
        _check(len(self.pi_star_list) >= 1, "[weights_compare] pi_star_list must not be empty")
        for p in self.pi_star_list:
            _check_p(p, "weights_compare")
        _check(self.n >= self.d, "[weights_compare] n must be >= d")
        _check(self.iterations >= 1, "[weights_compare] iterations must be >= 1")


@dataclass
class ValidateConfig:
    suites: list = field(default_factory=lambda: list(SUITES))
    mc_draws: int = 2_000_000
    seed: int = 0

    def validate(self):
        _check(len(self.suites) >= 1, "[validate] suites must not be empty")
        for s in self.suites:
            _check(s in SUITES, f"[validate] unknown suite {s!r}; choose from {SUITES}")
        _check(self.mc_draws >= 100, "[validate] mc_draws must be >= 100")
        _check(0 <= self.seed < 2**64, "[validate] seed must be a 64-bit unsigned integer")


SECTIONS = {
    "global": GlobalConfig,
    "trajectory": TrajectoryConfig,
    "convergence": ConvergenceConfig,
    "mixing": MixingConfig,
    "weights_compare": WeightsCompareConfig,
    "validate": ValidateConfig,
}


@dataclass
class ExperimentConfig:
    global_: GlobalConfig = field(default_factory=GlobalConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    mixing: MixingConfig = field(default_factory=MixingConfig)
    weights_compare: WeightsCompareConfig = field(default_factory=WeightsCompareConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)

    def block(self, name):
        return self.global_ if name == "global" else getattr(self, name)

    def check(self):
        for name in SECTIONS:
            self.block(name).validate()
        return self


def _parse_value(text, default, key):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            try:
                return int(text, 0)
            except ValueError:
                v = float(text)
                if not v.is_integer():
                    raise
                return int(v)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            items = [t.strip() for t in text.split(",") if t.strip()]
            if default and isinstance(default[0], str):
                return items
            return [float(t) for t in items]
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from exc


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_format_value(x) for x in v)
    return str(v)


def loads(text):
    """Parse INI text into a validated ExperimentConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        block = cfg.block(section)
        names = {f.name for f in dataclasses.fields(block)}
        for key, raw in parser.items(section):
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            setattr(block, key, _parse_value(raw, getattr(block, key), f"{section}.{key}"))
    return cfg.check()


def load(path):
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dumps(cfg):
    """Serialise every key of every section (``loads(dumps(c)) == c``)."""
    parser = configparser.ConfigParser(interpolation=None)
    for name in SECTIONS:
        block = cfg.block(name)
        parser[name] = {f.name: _format_value(getattr(block, f.name)) for f in dataclasses.fields(block)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
