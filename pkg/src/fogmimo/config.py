"""Plain-text experiment configuration.

One ``key = value`` pair per line; ``#`` starts a comment. Lengths are in
km, densities in points per km^2. Sweep axes are given as
``sweep.<key> = v1, v2, ...`` and expand to their cartesian product in file
order. Exactly one of ``lambda_u`` and ``load_ratio`` (``lambda / lambda_a``,
so that ``lambda_u = Q * load_ratio * lambda_a``) must be set.
"""

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

from .errors import ConfigError, ParameterError
from .geometry import DiskPair, Window
from .phy_channel import DEFAULT_SE_CAP, NoisePower

OUTPUT_GROUPS = ("fog_analytic", "fog_sim", "cell_analytic", "cell_sim", "copilot")
THETA_SOURCES = ("auto", "closed_form", "semi_analytic")


@dataclass(frozen=True)
class SystemConfig:
    lambda_a: float
    eta: float
    lambda_u: Optional[float] = None
    load_ratio: Optional[float] = None
    q_count: int = 40
    qprime: int = 20
    l_pilots: int = 60
    n_p: int = 60
    r_in: Optional[float] = None
    epsilon: float = 0.0
    m_antennas: float = math.inf
    sigma2_n: float = 0.0
    ps_fog: float = 1.0
    pu: float = 1.0
    c_shape: float = 3.575
    seed: int = 0
    trials: int = 100
    half_width: Optional[float] = None
    boundary: str = "torus"
    guard_margin: float = 0.0
    trust_mode: str = "geometric"
    fading_draws: int = 1
    theta_source: str = "auto"
    theta_trials: int = 20000
    theta_resolution: int = 4096
    se_cap: float = DEFAULT_SE_CAP
    n_max: Optional[int] = None
    min_distance: float = 0.0
    workers: int = 1
    outputs: Tuple[str, ...] = ()
    sweep: Tuple[Tuple[str, Tuple[float, ...]], ...] = field(default=())

    @property
    def user_density(self):
        if self.lambda_u is not None:
            return self.lambda_u
        return self.q_count * self.load_ratio * self.lambda_a

    @property
    def ratio(self):
        """``lambda / lambda_a`` with ``lambda = lambda_u / Q``."""
        if self.lambda_a == 0:
            return math.nan
        return self.user_density / self.q_count / self.lambda_a

    @property
    def disks(self):
        if self.r_in is None:
            raise ParameterError("r_in is required for the fog system")
        return DiskPair.from_epsilon(self.r_in, self.epsilon)

    @property
    def noise(self):
        return NoisePower(self.sigma2_n, self.ps_fog, self.pu)

    def window(self):
        if self.half_width is None:
            return None
        return Window(self.half_width, self.boundary, self.guard_margin)

    def set(self, key, value):
        """Copy with one key replaced; ``value`` is text or already typed."""
        if key not in _SPECS:
            raise ConfigError(f"unknown key {key!r}")
        if isinstance(value, str):
            value = _SPECS[key].parse(value)
        other = "load_ratio" if key == "lambda_u" else "lambda_u" if key == "load_ratio" else None
        changes = {key: value}
        if other is not None:
            changes[other] = None
        cfg = replace(self, **changes)
        validate(cfg)
        return cfg


# --- value types ------------------------------------------------------------------

class _Spec:
    def __init__(self, kind, choices=None, optional=False, inf_ok=False):
        self.kind = kind
        self.choices = choices
        self.optional = optional
        self.inf_ok = inf_ok

    def parse(self, text):
        text = text.strip()
        if self.optional and text == "auto":
            return None
        if self.kind == "str":
            if self.choices and text not in self.choices:
                raise ValueError(f"expected one of {', '.join(self.choices)}")
            return text
        if self.kind == "list":
            items = tuple(t.strip() for t in text.split(",") if t.strip())
            bad = [t for t in items if t not in self.choices]
            if bad:
                raise ValueError(f"unknown output group {bad[0]!r}")
            return items
        if self.kind == "int":
            value = float(text)
            if value != int(value):
                raise ValueError("expected an integer")
            return int(value)
        value = float(text)
        if math.isinf(value) and not self.inf_ok:
            raise ValueError("must be finite")
        if math.isnan(value):
            raise ValueError("must be a number")
        return value

    def emit(self, value):
        if value is None:
            return "auto"
        if self.kind == "list":
            return ", ".join(value)
        if self.kind == "float":
            return repr(float(value))
        return str(value)


_SPECS = {
    "lambda_a": _Spec("float"),
    "eta": _Spec("float"),
    "lambda_u": _Spec("float", optional=True),
    "load_ratio": _Spec("float", optional=True),
    "q_count": _Spec("int"),
    "qprime": _Spec("int"),
    "l_pilots": _Spec("int"),
    "n_p": _Spec("int"),
    "r_in": _Spec("float", optional=True),
    "epsilon": _Spec("float"),
    "m_antennas": _Spec("float", inf_ok=True),
    "sigma2_n": _Spec("float"),
    "ps_fog": _Spec("float"),
    "pu": _Spec("float"),
    "c_shape": _Spec("float"),
    "seed": _Spec("int"),
    "trials": _Spec("int"),
    "half_width": _Spec("float", optional=True),
    "boundary": _Spec("str", ("torus", "guard")),
    "guard_margin": _Spec("float"),
    "trust_mode": _Spec("str", ("geometric", "signal_level")),
    "fading_draws": _Spec("int"),
    "theta_source": _Spec("str", THETA_SOURCES),
    "theta_trials": _Spec("int"),
    "theta_resolution": _Spec("int"),
    "se_cap": _Spec("float"),
    "n_max": _Spec("int", optional=True),
    "min_distance": _Spec("float"),
    "workers": _Spec("int"),
    "outputs": _Spec("list", OUTPUT_GROUPS),
}

KEYS = tuple(_SPECS)
SWEEPABLE = tuple(k for k, s in _SPECS.items() if s.kind in ("float", "int"))
REQUIRED = ("lambda_a", "eta", "lambda_u | load_ratio")


def _check(cfg):
    """Yield ``(key, message)`` for every violated invariant."""
    if cfg.lambda_a < 0:
        yield "lambda_a", "density must be non-negative"
    if cfg.lambda_u is not None and cfg.lambda_u < 0:
        yield "lambda_u", "density must be non-negative"
    if cfg.load_ratio is not None and cfg.load_ratio < 0:
        yield "load_ratio", "density ratio must be non-negative"
    if (cfg.lambda_u is None) == (cfg.load_ratio is None):
        yield "lambda_u", "set exactly one of lambda_u and load_ratio"
    if not cfg.eta > 1:
        yield "eta", "pathloss exponent must exceed 1"
    if cfg.q_count < 1:
        yield "q_count", "Q must be at least 1"
    if cfg.qprime < 2 or cfg.qprime % 2:
        yield "qprime", "Q' must be an even integer >= 2"
    if cfg.l_pilots < 1:
        yield "l_pilots", "L must be at least 1"
    if not 0 < cfg.n_p <= cfg.l_pilots:
        yield "n_p", "need 0 < N_p <= L"
    if cfg.r_in is not None and not cfg.r_in > 0:
        yield "r_in", "r_in must be positive"
    if cfg.epsilon < 0:
        yield "epsilon", "epsilon must be non-negative (r_out >= r_in)"
    m = cfg.m_antennas
    if not (math.isinf(m) and m > 0) and not (m >= 1 and m == int(m)):
        yield "m_antennas", "M must be a positive integer or inf"
    if cfg.sigma2_n < 0:
        yield "sigma2_n", "noise variance must be non-negative"
    for key in ("ps_fog", "pu", "c_shape", "se_cap"):
        if not getattr(cfg, key) > 0:
            yield key, "must be positive"
    for key in ("trials", "fading_draws", "theta_trials", "theta_resolution", "workers"):
        if getattr(cfg, key) < 1:
            yield key, "must be at least 1"
    if cfg.half_width is not None and not cfg.half_width > 0:
        yield "half_width", "must be positive"
    if cfg.guard_margin < 0:
        yield "guard_margin", "must be non-negative"
    if cfg.boundary == "torus" and cfg.guard_margin != 0:
        yield "guard_margin", "a torus window has no guard margin"
    if cfg.n_max is not None and cfg.n_max < 1:
        yield "n_max", "must be at least 1"
    if cfg.min_distance < 0:
        yield "min_distance", "must be non-negative"


def validate(cfg, lines=None):
    for key, message in _check(cfg):
        raise ConfigError(f"{key}: {message}", None if lines is None else lines.get(key))
    return cfg


def parse_config(text):
    """Parse and validate a configuration document."""
    values = {}
    lines = {}
    sweep = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("sweep."):
            axis = key[len("sweep."):]
            if axis not in SWEEPABLE:
                raise ConfigError(f"cannot sweep {axis!r}", number)
            if any(a == axis for a, _ in sweep):
                raise ConfigError(f"duplicate sweep axis {axis!r}", number)
            try:
                sweep.append((axis, parse_sweep_values(axis, value)))
            except ValueError as exc:
                raise ConfigError(f"sweep.{axis}: {exc}", number) from None
            lines[key] = number
            continue
        if key not in _SPECS:
            raise ConfigError(f"unknown key {key!r}", number)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", number)
        try:
            values[key] = _SPECS[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", number) from None
        lines[key] = number
    missing = [k for k in ("lambda_a", "eta") if k not in values]
    if "lambda_u" not in values and "load_ratio" not in values:
        missing.append("lambda_u | load_ratio")
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)} "
                          f"(required: {', '.join(REQUIRED)})")
    cfg = SystemConfig(**values, sweep=tuple(sweep))
    return validate(cfg, lines)


def parse_sweep_values(axis, text):
    spec = _SPECS[axis]
    values = tuple(spec.parse(t) for t in text.split(",") if t.strip())
    if not values:
        raise ValueError("no values")
    return values


def emit_config(cfg):
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    out = []
    for f in fields(SystemConfig):
        if f.name == "sweep":
            continue
        value = getattr(cfg, f.name)
        if f.name in ("lambda_u", "load_ratio") and value is None:
            continue
        out.append(f"{f.name} = {_SPECS[f.name].emit(value)}")
    for axis, values in cfg.sweep:
        spec = _SPECS[axis]
        out.append(f"sweep.{axis} = {', '.join(spec.emit(v) for v in values)}")
    return "\n".join(out) + "\n"


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
