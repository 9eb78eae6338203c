"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` and blank lines are ignored; a ``#`` after a value
starts a comment. Unknown keys, repeated keys and unparsable values are
errors that name the offending line.

Keys (defaults in brackets):

mode            track-density | track-regression | track-grid | rate-fit |
                drift-sweep | cesaro-compare | verify-lemmas   [track-density]
scenario        drifting-normal | normal-mixture | normal-2d | uniform |
                triangular | regression-sine | regression-linear  [drifting-normal]
drift           drift size: mean step (linear) or density drift cap (oscillate)  [0]
drift_mode      linear | oscillate   [linear]
amplitude       oscillation amplitude of the mean   [1]
kernel          box | epanechnikov | gaussian   [gaussian]
rho, theta      const:<v> or pow:<scale>,<exponent>   [const:0.1, const:0.5]
auto            drift:<delta> | stationary; overrides rho and theta
rho_scale       scale of rho_t for auto = stationary   [1]
theta_scale     scale of theta_t for auto = stationary   [1]
bounds          lower,upper for density estimates   [0,1]
query           query points; ',' between 1-D points, ';' between 2-D points  [0]
steps           number of steps T   [1000]
replicas        number of replicas R   [1]
seed            base seed   [0]
batch           samples per step   [1]
grid            a,b,M for track-grid   [-4,4,40]
normalized      true | false, unit-mass constraint for track-grid   [true]
deltas          drift caps for drift-sweep   [1e-2,3e-3,1e-3,3e-4,1e-4]
ks              multiples of 1/rho for cesaro-compare   [1,2,4,8,16]
window          t_lo,t_hi for rate-fit   [100,T]
burn_factor     burn-in multiple of 1/rho for drift-sweep   [5]
constraint      box:<lo>,<hi> | ball:<radius> for regression   [box:-2,2]
amplitudes      regression amplitudes, one per output   [1]
noise           half-width of triangular output noise   [0.5]
eps, omega      relative amplitude oscillation and its frequency   [0, 0]
input_std       standard deviation of the regression input   [1]
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

MODES = (
    "track-density",
    "track-regression",
    "track-grid",
    "rate-fit",
    "drift-sweep",
    "cesaro-compare",
    "verify-lemmas",
)
SCENARIOS = (
    "drifting-normal",
    "normal-mixture",
    "normal-2d",
    "uniform",
    "triangular",
    "regression-sine",
    "regression-linear",
)


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


def _pair(text):
    v = _floats(text)
    if len(v) != 2:
        raise ValueError("expected two comma-separated numbers")
    return v


def _window(text):
    # empty means the default window [100, T]
    return _pair(text) if text.strip() else ()


def _grid(text):
    a, b, m = text.split(",")
    return float(a), float(b), int(m)


def _queries(text):
    pts = []
    for chunk in text.split(";"):
        pts.append(_floats(chunk))
    return tuple(pts)


@dataclass
class ExperimentConfig:
    mode: str = "track-density"
    scenario: str = "drifting-normal"
    drift: float = 0.0
    drift_mode: str = "linear"
    amplitude: float = 1.0
    kernel: str = "gaussian"
    rho: str = "const:0.1"
    theta: str = "const:0.5"
    auto: str = ""
    rho_scale: float = 1.0
    theta_scale: float = 1.0
    bounds: tuple = (0.0, 1.0)
    query: tuple = ((0.0,),)
    steps: int = 1000
    replicas: int = 1
    seed: int = 0
    batch: int = 1
    grid: tuple = (-4.0, 4.0, 40)
    normalized: bool = True
    deltas: tuple = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
    ks: tuple = (1.0, 2.0, 4.0, 8.0, 16.0)
    window: tuple = ()
    burn_factor: float = 5.0
    constraint: str = "box:-2,2"
    amplitudes: tuple = (1.0,)
    noise: float = 0.5
    eps: float = 0.0
    omega: float = 0.0
    input_std: float = 1.0
    explicit: set = field(default_factory=set, repr=False, compare=False)

    def echo(self) -> list[tuple[str, str]]:
        """Every setting as (key, text), in declaration order."""
        out = []
        for f in fields(self):
            if f.name == "explicit":
                continue
            v = getattr(self, f.name)
            out.append((f.name, _format(v)))
        return out


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ";".join(",".join(_format(c) for c in p) for p in v)
        return ",".join(_format(c) for c in v)
    return str(v)


_PARSERS = {
    "mode": _choice(MODES),
    "scenario": _choice(SCENARIOS),
    "drift": float,
    "drift_mode": _choice(("linear", "oscillate")),
    "amplitude": float,
    "kernel": str,
    "rho": str,
    "theta": str,
    "auto": str,
    "rho_scale": float,
    "theta_scale": float,
    "bounds": _pair,
    "query": _queries,
    "steps": _positive_int,
    "replicas": _positive_int,
    "seed": int,
    "batch": _positive_int,
    "grid": _grid,
    "normalized": _bool,
    "deltas": _floats,
    "ks": _floats,
    "window": _window,
    "burn_factor": float,
    "constraint": str,
    "amplitudes": _floats,
    "noise": float,
    "eps": float,
    "omega": float,
    "input_std": float,
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{source}:{lineno}"
        if not sep or not key:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if key not in _PARSERS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: key {key!r} already set on line {seen[key]}")
        try:
            parsed = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
        setattr(cfg, key, parsed)
        cfg.explicit.add(key)
        seen[key] = lineno
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
