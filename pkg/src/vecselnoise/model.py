"""Model parameters, derived rates and the small-amplitude validity check.

All rates are expressed in units of the a-mode decay rate (``kappa_a = 1``).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path


class ParameterError(ValueError):
    """Raised for parameter sets that violate the model invariants."""


class ConfigError(ValueError):
    """Malformed configuration file; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


class NumericalError(RuntimeError):
    """Base class for solver failures (non-convergence, instability, singularity)."""


class HierarchyWarning(UserWarning):
    """Rate hierarchy of a class-A laser is not satisfied."""


# defaults reproduce the symmetric reference configuration
@dataclass(frozen=True)
class ModelParams:
    kappa_a: float = 1.0
    kappa_b: float = 1.0
    kappa_ap: float = 0.5
    kappa_bp: float = 0.5
    omega_ap: float = 0.0
    omega_bp: float = 0.0
    g_a: float = 0.1
    g_b: float = 0.1
    gamma_2: float = 10.0
    gamma_1: float = 1.0e4
    gamma_perp: float = 1.0e3
    gamma_c: float = 1.0e2
    nu: float = 0.0
    xi_a: float = 0.8
    xi_b: float = 0.8
    R_a: float = 5.05e5
    p: float = 0.0
    # sign of the (kappa_xp + i omega_xp) circular-component coupling per mode
    dichroism_sign_a: int = 1
    dichroism_sign_b: int = -1

    def __post_init__(self):
        validate_params(self)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def with_pump_ratio(self, ratio: float) -> "ModelParams":
        """Copy with ``R_a`` set to ``ratio`` times the a-mode threshold."""
        return self.replace(R_a=ratio * threshold_rate(self, "a"))

    @property
    def pump_ratio(self) -> float:
        return self.R_a / threshold_rate(self, "a")


RATE_FIELDS = (
    "kappa_a", "kappa_b", "kappa_ap", "kappa_bp", "g_a", "g_b",
    "gamma_2", "gamma_1", "gamma_perp", "gamma_c",
)


def validate_params(params: ModelParams) -> None:
    for name in RATE_FIELDS:
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            raise ParameterError(f"{name} must be a positive finite rate, got {value!r}")
    for name in ("omega_ap", "omega_bp", "nu"):
        if not math.isfinite(getattr(params, name)):
            raise ParameterError(f"{name} must be finite")
    if params.kappa_a <= params.kappa_ap:
        raise ParameterError("kappa_a must exceed kappa_ap (threshold degenerates)")
    if params.kappa_b <= params.kappa_bp:
        raise ParameterError("kappa_b must exceed kappa_bp (threshold degenerates)")
    for name in ("xi_a", "xi_b"):
        value = getattr(params, name)
        if not (0.0 < value <= 1.0):
            raise ParameterError(f"{name} must lie in (0, 1], got {value!r}")
    if not (0.0 <= params.p <= 1.0):
        raise ParameterError(f"p must lie in [0, 1], got {params.p!r}")
    if not (math.isfinite(params.R_a) and params.R_a >= 0):
        raise ParameterError(f"R_a must be non-negative, got {params.R_a!r}")
    for name in ("dichroism_sign_a", "dichroism_sign_b"):
        if getattr(params, name) not in (1, -1):
            raise ParameterError(f"{name} must be +1 or -1")


def hierarchy_violations(params: ModelParams, factor: float = 5.0) -> list[str]:
    """List violated orderings of kappa, kappa_p << gamma_2 << gamma_perp, gamma_1.

    ``factor`` is the minimum ratio counted as "much larger".
    """
    slow = max(params.kappa_a, params.kappa_b, params.kappa_ap, params.kappa_bp)
    out = []
    if not params.gamma_2 >= factor * slow:
        out.append(f"gamma_2={params.gamma_2:g} is not >> modal rates ({slow:g})")
    for name in ("gamma_perp", "gamma_1"):
        value = getattr(params, name)
        if not value >= factor * params.gamma_2:
            out.append(f"{name}={value:g} is not >> gamma_2={params.gamma_2:g}")
    return out


def check_hierarchy(params: ModelParams, factor: float = 5.0) -> bool:
    problems = hierarchy_violations(params, factor)
    for msg in problems:
        warnings.warn(msg, HierarchyWarning, stacklevel=2)
    return not problems


@dataclass(frozen=True)
class DerivedRates:
    d: float
    r_a: float
    r_b: float
    c_a: float
    c_b: float
    zeta_ab: float
    zeta_ba: float
    R_b: float
    R_1: float
    R_2: float
    R_3: float
    R: float


def derive_rates(params: ModelParams) -> DerivedRates:
    validate_params(params)
    d = params.gamma_2 * (1.0 + params.nu**2 / params.gamma_perp**2)
    ga2, gb2 = params.g_a**2, params.g_b**2
    R_a = params.R_a
    R_3 = math.sqrt(params.xi_a) * R_a
    R_b = R_3 / math.sqrt(params.xi_b)
    R_1 = R_a - R_3
    R_2 = R_b - R_3
    return DerivedRates(
        d=d,
        r_a=2.0 * ga2 * R_a / params.gamma_perp,
        r_b=2.0 * gb2 * R_b / params.gamma_perp,
        c_a=ga2 / params.gamma_perp,
        c_b=gb2 / params.gamma_perp,
        zeta_ab=params.xi_a * gb2 / ga2,
        zeta_ba=params.xi_b * ga2 / gb2,
        R_b=R_b,
        R_1=R_1,
        R_2=R_2,
        R_3=R_3,
        R=R_1 + R_2 + R_3,
    )


def threshold_rate(params: ModelParams, mode: str) -> float:
    d = params.gamma_2 * (1.0 + params.nu**2 / params.gamma_perp**2)
    if mode == "a":
        return d * params.gamma_perp * (params.kappa_a - params.kappa_ap) / params.g_a**2
    if mode == "b":
        return d * params.gamma_perp * (params.kappa_b - params.kappa_bp) / params.g_b**2
    raise ValueError(f"unknown mode {mode!r}")


VALIDITY_LIMIT = 0.1


@dataclass(frozen=True)
class ValidityReport:
    ratio_a: float
    ratio_b: float
    limit: float = VALIDITY_LIMIT

    @property
    def valid(self) -> bool:
        return self.ratio_a <= self.limit and self.ratio_b <= self.limit

    def lines(self) -> list[str]:
        flag = "ok" if self.valid else "VIOLATED"
        return [
            f"saturation ratio a = {self.ratio_a:.6g}",
            f"saturation ratio b = {self.ratio_b:.6g}",
            f"small-amplitude condition (limit {self.limit:g}): {flag}",
        ]


def check_validity(params: ModelParams, steady, derived: DerivedRates | None = None) -> ValidityReport:
    """Ratio c_x (I_x + zeta_xy I_y) / d for each mode.

    ``steady`` only needs ``I_a`` and ``I_b`` attributes.
    """
    dr = derived if derived is not None else derive_rates(params)
    ratio_a = dr.c_a * (steady.I_a + dr.zeta_ab * steady.I_b) / dr.d
    ratio_b = dr.c_b * (steady.I_b + dr.zeta_ba * steady.I_a) / dr.d
    return ValidityReport(ratio_a, ratio_b)


# ---------------------------------------------------------------- config files

PARAM_KEYS = tuple(f.name for f in dataclasses.fields(ModelParams))


@dataclass
class ParsedConfig:
    params: ModelParams
    values: dict = field(default_factory=dict)


def _parse_value(key: str, raw: str, lineno: int):
    if key.startswith("dichroism_sign"):
        table = {"plus": 1, "+1": 1, "1": 1, "minus": -1, "-1": -1}
        if raw.lower() not in table:
            raise ConfigError(f"{key} must be plus or minus, got {raw!r}", lineno)
        return table[raw.lower()]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"value for {key!r} is not a number: {raw!r}", lineno) from None


def parse_config_text(text: str) -> ParsedConfig:
    """Parse ``key = value`` lines; ``pump_ratio`` may replace ``R_a``."""
    values: dict[str, float] = {}
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in PARAM_KEYS and key != "pump_ratio":
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", lineno)
        seen[key] = lineno
        values[key] = _parse_value(key, raw, lineno)
    if "pump_ratio" in values and "R_a" in values:
        raise ConfigError("give either R_a or pump_ratio, not both", seen["pump_ratio"])
    kwargs = {k: v for k, v in values.items() if k != "pump_ratio"}
    try:
        params = ModelParams(**kwargs)
        if "pump_ratio" in values:
            params = params.with_pump_ratio(values["pump_ratio"])
    except ParameterError as exc:
        raise ParameterError(str(exc)) from None
    return ParsedConfig(params, values)


def load_config(path: str | Path) -> ParsedConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def format_params(params: ModelParams) -> list[str]:
    out = []
    for name in PARAM_KEYS:
        value = getattr(params, name)
        out.append(f"{name} = {value!r}" if isinstance(value, int) else f"{name} = {value:.17g}")
    return out
