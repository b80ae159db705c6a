"""
Synthetic directional trend data.

Observations are y_i = Omega(mu_i) z_i with z_i Fisher-Langevin around the
north pole nu0 = (0, 0, 1) and mu_i a known trend on the sphere.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field

from .errors import DomainError, TrendInputError, TrendRangeError
from .geometry import TWO_PI, UNIT_TOLERANCE, directions_from_polar, wrap_longitude
from .model import DirectionData, MeanField

logger = logging.getLogger(__name__)

NU0 = np.array([0.0, 0.0, 1.0])
POLE_EPSILON = 1e-12
STABLE_KAPPA = 300.0
ORACLE_SEED = 0x5EED
ORACLE_DRAWS = 1_000_000
RANGE_PROBE_POINTS = 10_000

TrendFunction = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Fisher-Langevin sampling and rotations
# ---------------------------------------------------------------------------

def fisher_langevin_directions(kappa: float, u1, u2) -> np.ndarray:
    """
    Inverse-CDF Fisher-Langevin draws about nu0, one row per (u1, u2) pair.

    delta = log(1 + (e^{2 kappa} - 1) u1), cos(theta) = delta/kappa - 1 and
    phi = 2 pi u2. Above kappa = 300 delta is evaluated as
    2 kappa + log(u1 + (1 - u1) e^{-2 kappa}) to avoid overflow.
    """
    if not kappa > 0:
        raise TrendInputError(f"kappa must be positive, got {kappa!r}")
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if kappa <= STABLE_KAPPA:
        delta = np.log1p(np.expm1(2.0 * kappa) * u1)
    else:
        with np.errstate(divide='ignore'):
            delta = 2.0 * kappa + np.logaddexp(np.log(u1), np.log1p(-u1) - 2.0 * kappa)
    cos_theta = np.clip(delta / kappa - 1.0, -1.0, 1.0)
    sin_theta = np.sqrt(1.0 - cos_theta * cos_theta)
    phi = TWO_PI * u2
    return np.stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta], axis=-1)


def sample_fisher_langevin(kappa: float, u1: float, u2: float) -> np.ndarray:
    """Single Fisher-Langevin direction from two uniform variates in [0, 1]."""
    if not (0.0 <= u1 <= 1.0 and 0.0 <= u2 <= 1.0):
        raise TrendInputError(f"uniform variates must lie in [0, 1], got ({u1!r}, {u2!r})")
    return fisher_langevin_directions(kappa, u1, u2)


def rotation_to(mu) -> np.ndarray:
    """
    Rotation Omega(mu) = (nu0 + mu)(nu0 + mu)'/(1 + nu0'mu) - I carrying nu0 to mu.

    For mu at the south pole (1 + nu0'mu <= 1e-12) the fixed rotation
    diag(1, -1, -1) is returned.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (3,):
        raise DomainError(f"expected a 3-vector, got shape {mu.shape}")
    if abs(np.linalg.norm(mu) - 1.0) > UNIT_TOLERANCE:
        raise DomainError(f"mean direction must be a unit vector, got norm {np.linalg.norm(mu):.12g}")
    s = 1.0 + mu[2]
    if s <= POLE_EPSILON:
        return np.diag([1.0, -1.0, -1.0])
    v = NU0 + mu
    return np.outer(v, v) / s - np.eye(3)


def rotate_about(mu: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Rows Omega(mu_i) z_i, renormalized to absorb rounding."""
    Y = np.empty_like(Z)
    for i in range(mu.shape[0]):
        Y[i] = rotation_to(mu[i]) @ Z[i]
    return Y / np.linalg.norm(Y, axis=1)[:, None]


# ---------------------------------------------------------------------------
# Random streams and oracle
# ---------------------------------------------------------------------------

def make_stream(seed: int, replication: int = 0) -> np.random.Generator:
    """Independent generator for one replication of one seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, replication]))


@lru_cache(maxsize=32)
def resultant_length_oracle(kappa: float, draws: int = ORACLE_DRAWS) -> float:
    """Monte Carlo resultant length lambda = E[z3] for Fisher-Langevin(kappa)."""
    rng = np.random.default_rng(np.random.SeedSequence([ORACLE_SEED, draws]))
    u1 = rng.random(draws)
    z = fisher_langevin_directions(kappa, u1, np.zeros(draws))
    lam = float(np.mean(z[:, 2]))
    logger.debug("oracle lambda(kappa=%g) = %.8f from %d draws", kappa, lam, draws)
    return lam


# ---------------------------------------------------------------------------
# Trends
# ---------------------------------------------------------------------------

@dataclass
class TrendSpec:
    """
    Trend t -> (theta, phi) = (f(t), g(t)) on [0, 1].

    With wrap enabled a negative or excessive colatitude is mapped back
    through (theta, phi) ~ (-theta, phi + pi) and the longitude is reduced
    modulo 2 pi.
    """
    label: str
    f: TrendFunction
    g: TrendFunction
    wrap: bool = False
    description: str = ''
    notes: List[str] = field(default_factory=list)

    def polar(self, t) -> Tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        theta = np.broadcast_to(np.asarray(self.f(t), dtype=float), t.shape).copy()
        phi = np.broadcast_to(np.asarray(self.g(t), dtype=float), t.shape).copy()
        if self.wrap:
            negative = theta < 0
            theta[negative] = -theta[negative]
            phi[negative] += math.pi
            beyond = theta > math.pi
            theta[beyond] = TWO_PI - theta[beyond]
            phi[beyond] += math.pi
            phi = np.asarray(wrap_longitude(phi))
        return theta, phi

    def check_range(self, points: int = RANGE_PROBE_POINTS) -> None:
        theta, phi = self.polar(np.linspace(0.0, 1.0, points))
        _check_polar_range(self.label, theta, phi)


def _check_polar_range(label: str, theta: np.ndarray, phi: np.ndarray) -> None:
    if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(phi)):
        raise TrendRangeError(f"trend {label!r} produced non-finite angles")
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise TrendRangeError(f"trend {label!r}: colatitude outside [0, pi]")
    if np.any(phi < 0) or np.any(phi >= TWO_PI):
        raise TrendRangeError(f"trend {label!r}: longitude outside [0, 2*pi)")


def trend_times(p: int) -> np.ndarray:
    """Design points i/(p + 1), i = 1..p."""
    return np.arange(1, p + 1, dtype=float) / (p + 1)


def trend_directions(spec: TrendSpec, p: int) -> np.ndarray:
    """Unit rows polar_to_cartesian(f(i/(p+1)), g(i/(p+1))), i = 1..p."""
    if p < 1:
        raise TrendInputError(f"p must be at least 1, got {p}")
    theta, phi = spec.polar(trend_times(p))
    _check_polar_range(spec.label, theta, phi)
    return directions_from_polar(theta, phi)


def _jumps_colatitude(t: np.ndarray) -> np.ndarray:
    edges = [0.15, 0.3, 0.45, 0.65, 0.8]
    levels = np.array([0.2, 0.1, 0.4, 0.2, 0.3, 0.4]) * math.pi
    return levels[np.searchsorted(edges, t, side='left')]


def builtin_trends() -> List[TrendSpec]:
    """Wobble, Bat and Jumps."""
    return [
        TrendSpec(
            'wobble',
            lambda t: 0.3 * math.pi * (t + 0.2 + 0.15 * np.sin(36.0 * math.pi * t)),
            lambda t: 4.0 * math.pi * t,
            wrap=True,
            description='wobbly spiral away from the north pole',
            notes=['longitude 4*pi*t reduced modulo 2*pi'],
        ),
        TrendSpec(
            'bat',
            lambda t: 0.8 * math.pi * (t - 0.5),
            lambda t: 4.0 * math.pi * np.sin(6.0 * math.pi * t),
            wrap=True,
            description='oscillation crossing the north pole',
            notes=[
                'negative colatitude (-theta, phi) read as (theta, phi + pi)',
                'longitude 4*pi*sin(6*pi*t) reduced modulo 2*pi',
            ],
        ),
        TrendSpec(
            'jumps',
            _jumps_colatitude,
            lambda t: 2.0 * math.pi * t,
            wrap=True,
            description='piecewise constant colatitude with jumps',
            notes=['longitude 2*pi*t reduced modulo 2*pi'],
        ),
    ]


def get_trend(name: str) -> TrendSpec:
    trends = {spec.label: spec for spec in builtin_trends()}
    if name not in trends:
        raise TrendInputError(f"unknown trend {name!r} (expected one of {', '.join(trends)})")
    return trends[name]


_EXPRESSION_NAMESPACE = {
    'np': np, 'pi': math.pi,
    'sin': np.sin, 'cos': np.cos, 'tan': np.tan, 'exp': np.exp, 'log': np.log,
    'sqrt': np.sqrt, 'abs': np.abs, 'where': np.where, 'clip': np.clip, 'floor': np.floor,
}


def _compile_expression(expression: str, name: str) -> TrendFunction:
    try:
        code = compile(expression, f'<trend {name}>', 'eval')
    except SyntaxError as e:
        raise TrendInputError(f"trend expression {name}={expression!r} is not valid: {e.msg}") from e
    for identifier in code.co_names:
        if identifier not in _EXPRESSION_NAMESPACE and identifier != 't':
            raise TrendInputError(f"trend expression {name} uses unknown name {identifier!r}")

    def evaluate(t: np.ndarray) -> np.ndarray:
        return eval(code, {'__builtins__': {}, **_EXPRESSION_NAMESPACE}, {'t': t})

    return evaluate


def load_trend_file(path: Union[str, Path]) -> TrendSpec:
    """
    Trend from a YAML file with keys label, f, g and optional wrap/description.

    f and g are numpy expressions in t, e.g. ``f: 0.25*pi + 0.1*sin(2*pi*t)``.
    """
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as fh:
        data = yaml.safe_load(fh) or {}
    missing = [key for key in ('f', 'g') if key not in data]
    if missing:
        raise TrendInputError(f"{path}: missing keys {missing}")
    spec = TrendSpec(
        label=str(data.get('label', path.stem)),
        f=_compile_expression(str(data['f']), 'f'),
        g=_compile_expression(str(data['g']), 'g'),
        wrap=bool(data.get('wrap', False)),
        description=str(data.get('description', '')),
    )
    try:
        spec.check_range()
    except (TypeError, ValueError, ArithmeticError) as e:
        if isinstance(e, TrendInputError):
            raise
        raise TrendInputError(f"{path}: trend could not be evaluated: {e}") from e
    return spec


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

class SimulationConfig(BaseModel):
    """Simulation settings."""
    p: int = Field(default=150, ge=2, description="Sequence length")
    kappa: float = Field(default=200.0, gt=0, description="Fisher-Langevin precision")
    seed: int = Field(default=1, ge=0, lt=2 ** 64, description="Master seed")
    oracle_draws: int = Field(default=ORACLE_DRAWS, ge=1000, description="Draws for the lambda oracle")


def generate_dataset(
    spec: TrendSpec,
    cfg: SimulationConfig,
    replication: int = 0
) -> Tuple[DirectionData, MeanField]:
    """
    Observations y_i = Omega(mu_i) z_i around the trend and the matching truth.

    Draws come from the substream (cfg.seed, replication) and are consumed
    in order of i; times are 1..p.
    """
    mu = trend_directions(spec, cfg.p)
    rng = make_stream(cfg.seed, replication)
    uniforms = rng.random((cfg.p, 2))
    Z = fisher_langevin_directions(cfg.kappa, uniforms[:, 0], uniforms[:, 1])
    Y = rotate_about(mu, Z)
    lam = resultant_length_oracle(float(cfg.kappa), cfg.oracle_draws)
    times = np.arange(1, cfg.p + 1, dtype=float)
    return DirectionData(Y, times), MeanField(mu, lam)


def simulation_metadata(spec: TrendSpec, cfg: SimulationConfig) -> Dict:
    """Provenance written next to simulated data."""
    lam = resultant_length_oracle(float(cfg.kappa), cfg.oracle_draws)
    return {
        'trend': spec.label,
        'description': spec.description,
        'wrapping': list(spec.notes),
        'p': cfg.p,
        'kappa': cfg.kappa,
        'seed': cfg.seed,
        'oracle_draws': cfg.oracle_draws,
        'oracle_seed': ORACLE_SEED,
        'lambda': lam,
        'gamma2': 1.0 - lam ** 2,
        'rng': 'numpy PCG64 via SeedSequence([seed, replication])',
    }
