"""
Candidate smoother families.

A family maps a parameter t in [0,1]^k to a symmetric p x p smoother A(t).
Families built from one fixed symmetric operator also expose that operator's
eigenbasis and the map t -> eigenvalues of A(t), which lets the selector
score a whole grid without forming A(t).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solveh_banded

from .errors import ConvergenceError, PenaltyError, TrendInputError
from .geometry import ROW_EPSILON, normalize_rows
from .model import SpectralSmoother, _as_matrix, _check_smoother

logger = logging.getLogger(__name__)

DEFAULT_PENALTY_SCALE = 1000.0
SYMMETRY_TOLERANCE = 1e-10
ROUNDING_FLOOR = 32.0 * np.finfo(float).eps


@dataclass
class FitResult:
    """Fitted means AY and fitted directions (unit rows of AY)."""
    M_hat: np.ndarray
    D_hat: np.ndarray
    t_selected: Optional[Tuple[float, ...]] = None
    estimated_risk: Optional[float] = None
    label: str = ''
    grid_step: Optional[float] = None
    trace: Optional[float] = None


class SmootherFamily:
    """
    Parameterized family t -> A(t) of symmetric smoothers.

    Args:
        label: Human readable name, also the CLI token
        dim_t: Parameter dimension k (0 for a single fixed matrix)
        evaluator: Callable mapping a length-k array to a p x p matrix
        p: Matrix size
        smoothing_direction: Per coordinate +1 if increasing t smooths more, -1 otherwise
        basis: Optional shared eigenbasis V (p x p); then A(t) = V diag(coefficients(t)) V'
        coefficient_map: Callable t -> eigenvalues of A(t) in the shared basis
        sp_bound: Known bound on the spectral norm of A(t)
        lipschitz: Bound on |A(t) - A(t')|_sp / |t - t'| per coordinate
        params: Provenance written to report.json
    """

    def __init__(
        self,
        label: str,
        dim_t: int,
        evaluator: Callable[[np.ndarray], np.ndarray],
        p: int,
        smoothing_direction: Optional[Sequence[int]] = None,
        basis: Optional[np.ndarray] = None,
        coefficient_map: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        sp_bound: Optional[float] = None,
        lipschitz: Optional[float] = None,
        params: Optional[Dict] = None
    ):
        self.label = label
        self.dim_t = dim_t
        self.p = p
        self._evaluator = evaluator
        self.smoothing_direction = tuple(smoothing_direction or (1,) * dim_t)
        if len(self.smoothing_direction) != dim_t:
            raise TrendInputError("smoothing_direction needs one entry per parameter")
        self.basis = basis
        self.coefficient_map = coefficient_map
        self.sp_bound = sp_bound
        self.lipschitz = lipschitz
        self.params = dict(params or {})

    def __repr__(self) -> str:
        return f"SmootherFamily({self.label!r}, k={self.dim_t}, p={self.p})"

    @property
    def is_fixed(self) -> bool:
        return self.dim_t == 0

    @property
    def has_shared_basis(self) -> bool:
        return self.basis is not None and self.coefficient_map is not None

    def _check_t(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)) if self.dim_t else np.zeros(0)
        if t.shape != (self.dim_t,):
            raise TrendInputError(f"{self.label}: expected {self.dim_t} parameters, got {t.shape}")
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise TrendInputError(f"{self.label}: parameters {t.tolist()} outside [0, 1]")
        return t

    def __call__(self, t=()) -> np.ndarray:
        return self._evaluator(self._check_t(t))

    def coefficients(self, t=()) -> np.ndarray:
        """Eigenvalues of A(t) in the shared basis."""
        if not self.has_shared_basis:
            raise TrendInputError(f"{self.label} has no shared eigenbasis")
        return self.coefficient_map(self._check_t(t))

    def probe(self, points_per_axis: int = 11) -> Dict[str, float]:
        """Max asymmetry and max spectral norm of A(t) over a probe grid."""
        axes = [np.linspace(0.0, 1.0, points_per_axis)] * self.dim_t
        grid = np.array(np.meshgrid(*axes, indexing='ij')).reshape(self.dim_t, -1).T if self.dim_t else [()]
        asymmetry = 0.0
        norm = 0.0
        for t in grid:
            A = self(t)
            asymmetry = max(asymmetry, float(np.max(np.abs(A - A.T))))
            norm = max(norm, float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (A + A.T))))))
        return {'max_asymmetry': asymmetry, 'max_spectral_norm': norm}


class ShrinkageFamily(SmootherFamily):
    """
    Stein-type shrinkage family sum_k a_k P_k over the eigenspaces of a penalty.

    The parameter is the coefficient vector a itself, one entry per
    eigenspace, so the estimated risk is minimized in closed form rather
    than on a grid.
    """

    def __init__(self, label: str, spectral: SpectralSmoother, params: Optional[Dict] = None):
        self.spectral = spectral
        dim = len(spectral.bases)

        def evaluate(t: np.ndarray) -> np.ndarray:
            return spectral.with_coefficients(t).assemble()

        super().__init__(
            label, dim, evaluate, spectral.p,
            smoothing_direction=(-1,) * dim,
            sp_bound=1.0,
            params=params,
        )


# ---------------------------------------------------------------------------
# Running averages
# ---------------------------------------------------------------------------

def _require_size(p: int, minimum: int, what: str) -> None:
    if p < minimum:
        raise TrendInputError(f"{what} needs p >= {minimum}, got p={p}")


def span3_running_average(p: int) -> np.ndarray:
    """Span-3 running average with reflection at both ends."""
    _require_size(p, 3, "span-3 running average")
    A = (np.eye(p) + np.eye(p, k=1) + np.eye(p, k=-1)) / 3.0
    A[0, 0] = A[-1, -1] = 2.0 / 3.0
    return A


def odd_span_weighted_average(p: int, weights: Sequence[float]) -> np.ndarray:
    """
    Weighted running average of span 2h+1 with boundary reflection.

    Args:
        p: Number of observations
        weights: Center-out weights w_0..w_h with w_0 + 2*sum(w_1..w_h) = 1

    Returns:
        Symmetric p x p matrix; indices falling off either end are mirrored
        back (-1 -> 0, p -> p-1) and their weight accumulated.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise TrendInputError("weights must be a non-empty list")
    if np.any(w < 0):
        raise TrendInputError(f"weights must be non-negative, got {w.tolist()}")
    total = w[0] + 2.0 * w[1:].sum()
    if abs(total - 1.0) > 1e-12:
        raise TrendInputError(f"weights sum to {total!r}, expected w0 + 2*sum(w1..wh) = 1")
    h = w.size - 1
    if 2 * h + 1 > p:
        raise TrendInputError(f"span {2 * h + 1} exceeds p={p}")

    A = np.zeros((p, p))
    for i in range(p):
        for j in range(-h, h + 1):
            k = i + j
            if k < 0:
                k = -k - 1
            elif k >= p:
                k = 2 * p - k - 1
            A[i, k] += w[abs(j)]
    return A


def _neighbor_operator(p: int) -> np.ndarray:
    """Ones on the off-diagonals, reflected corners: the derivative of A(s) in t2."""
    T = np.eye(p, k=1) + np.eye(p, k=-1)
    T[0, 0] = T[-1, -1] = 1.0
    return T


def weighted_running_average(p: int, s: float) -> np.ndarray:
    """Span-3 weighted average with (t1, t2) = (1 - s, s/2)."""
    _require_size(p, 3, "weighted running average")
    return (1.0 - s) * np.eye(p) + 0.5 * s * _neighbor_operator(p)


def weighted_running_average_family(p: int) -> SmootherFamily:
    """One-parameter family of span-3 weighted running averages; s = 2/3 is span3."""
    _require_size(p, 3, "weighted running average")
    neighbor_values, basis = np.linalg.eigh(_neighbor_operator(p))

    def evaluate(t: np.ndarray) -> np.ndarray:
        return weighted_running_average(p, float(t[0]))

    def coefficient_map(t: np.ndarray) -> np.ndarray:
        s = float(t[0])
        return (1.0 - s) + 0.5 * s * neighbor_values

    return SmootherFamily(
        'runw', 1, evaluate, p,
        basis=basis,
        coefficient_map=coefficient_map,
        sp_bound=math.sqrt(5.0),
        lipschitz=2.0,
        params={'kind': 'weighted_running_average'},
    )


def fixed_family(A: np.ndarray, label: str, params: Optional[Dict] = None) -> SmootherFamily:
    """Zero-parameter family holding a single smoother."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise TrendInputError(f"smoother must be square, got shape {A.shape}")
    if np.max(np.abs(A - A.T)) > SYMMETRY_TOLERANCE:
        raise TrendInputError(f"{label}: smoother is not symmetric")
    return SmootherFamily(label, 0, lambda t: A, A.shape[0], params=params)


# ---------------------------------------------------------------------------
# Difference penalties and spectral norm
# ---------------------------------------------------------------------------

def _first_difference(g: int) -> np.ndarray:
    return np.eye(g - 1, g) - np.eye(g - 1, g, k=1)


def difference_matrix(p: int, d: int) -> np.ndarray:
    """
    d-th difference matrix of shape (p - d) x p.

    Delta_1 = Dif(p), Delta_d = Dif(p - d + 1) Delta_{d-1}, where Dif(g) has
    1 on the diagonal and -1 on the superdiagonal.
    """
    if not (1 <= d <= p - 1):
        raise TrendInputError(f"difference order d={d} outside [1, {p - 1}]")
    D = _first_difference(p)
    for order in range(2, d + 1):
        D = _first_difference(p - order + 1) @ D
    return D


def penalty_matrix(p: int, d: int) -> np.ndarray:
    """Delta_d' Delta_d."""
    D = difference_matrix(p, d)
    return D.T @ D


@dataclass
class PowerIterationResult:
    value: float
    vector: np.ndarray
    iterations: int
    converged: bool


def _start_vector(n: int) -> np.ndarray:
    x = np.ones(n) + 0.5 * (-1.0) ** np.arange(n)
    return x / np.linalg.norm(x)


def power_iteration(
    S: np.ndarray,
    max_iter: int = 10_000,
    tol: float = 1e-12,
    squarings: int = 8
) -> PowerIterationResult:
    """
    Largest |eigenvalue| of a symmetric matrix by power iteration.

    The iteration runs on the normalized power S^(2^squarings), which widens
    the gap between the two leading eigenvalues; the estimate |S x| is taken
    on S itself. Successive changes of the estimate shrink geometrically, so
    the remaining error is bounded by change / (1 - rate). Stops once that
    bound is at most tol relative on two consecutive steps, or the change is
    at rounding level.

    Args:
        S: Symmetric matrix
        max_iter: Iteration cap
        tol: Relative tolerance on the remaining error of the estimate
        squarings: Number of repeated squarings before iterating

    Returns:
        PowerIterationResult
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise TrendInputError(f"expected a square matrix, got shape {S.shape}")
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOLERANCE * max(1.0, np.max(np.abs(S))):
        raise TrendInputError("power iteration expects a symmetric matrix")
    n = S.shape[0]
    x = _start_vector(n)
    if not np.any(S):
        return PowerIterationResult(0.0, x, 0, True)

    T = S / np.max(np.abs(S))
    for _ in range(squarings):
        T = T @ T
        T = 0.5 * (T + T.T)
        T /= np.max(np.abs(T))

    estimate = float(np.linalg.norm(S @ x))
    previous_change = None
    settled = 0
    for iteration in range(1, max_iter + 1):
        y = T @ x
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            break
        x = y / y_norm
        new_estimate = float(np.linalg.norm(S @ x))
        scale = max(1.0, new_estimate)
        change = abs(new_estimate - estimate)
        estimate = new_estimate
        if change <= ROUNDING_FLOOR * scale:
            return PowerIterationResult(estimate, x, iteration, True)
        if previous_change is not None and change < previous_change:
            remaining = change / (1.0 - change / previous_change)
            settled = settled + 1 if remaining <= tol * scale else 0
        else:
            settled = 0
        if settled >= 2:
            return PowerIterationResult(estimate, x, iteration, True)
        previous_change = change
    return PowerIterationResult(estimate, x, max_iter, False)


def spectral_norm(S: np.ndarray, max_iter: int = 10_000, tol: float = 1e-12) -> float:
    """
    Spectral norm of a symmetric matrix.

    Raises:
        ConvergenceError: if power iteration hits max_iter
    """
    result = power_iteration(S, max_iter=max_iter, tol=tol)
    if not result.converged:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} iterations "
            f"(last estimate {result.value:.12g})"
        )
    logger.debug("spectral norm %.12g after %d iterations", result.value, result.iterations)
    return result.value


# ---------------------------------------------------------------------------
# Penalized least squares
# ---------------------------------------------------------------------------

def _bandwidth(Q: np.ndarray) -> int:
    rows, cols = np.nonzero(Q)
    return int(np.max(np.abs(rows - cols))) if rows.size else 0


def _lower_bands(S: np.ndarray, bandwidth: int) -> np.ndarray:
    """Lower banded storage used by scipy.linalg.solveh_banded."""
    p = S.shape[0]
    ab = np.zeros((bandwidth + 1, p))
    for k in range(bandwidth + 1):
        ab[k, :p - k] = np.diagonal(S, offset=-k)
    return ab


def _check_penalty(Q: np.ndarray, index: int) -> None:
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise PenaltyError(f"penalty {index} must be square, got shape {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q))))
    if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOLERANCE * scale:
        raise PenaltyError(f"penalty {index} is not symmetric")
    rng = np.random.default_rng(0)
    probes = np.column_stack([_start_vector(Q.shape[0]), rng.standard_normal((Q.shape[0], 16))])
    rayleigh = np.einsum('ij,ij->j', probes, Q @ probes) / np.einsum('ij,ij->j', probes, probes)
    if np.min(rayleigh) < -1e-10 * scale:
        raise PenaltyError(
            f"penalty {index} is not positive semi-definite "
            f"(Rayleigh quotient {np.min(rayleigh):.3e})"
        )


def multi_penalty_pls_family(
    p: int,
    penalties: Sequence[np.ndarray],
    c: float = DEFAULT_PENALTY_SCALE,
    label: Optional[str] = None,
    params: Optional[Dict] = None
) -> SmootherFamily:
    """
    Penalized least squares family A(t) = (I + c sum_i t_i Q_i)^{-1}.

    Each penalty is rescaled to unit spectral norm. A(t) Y minimizes
    |Y - M|^2 + tr(M' Q(t) M); it is computed by a (banded) Cholesky solve
    against the identity, never by explicit inversion.
    """
    if c <= 0:
        raise TrendInputError(f"penalty scale c must be positive, got {c}")
    if not penalties:
        raise TrendInputError("at least one penalty is required")
    normalized = []
    for index, Q in enumerate(penalties):
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (p, p):
            raise PenaltyError(f"penalty {index} has shape {Q.shape}, expected {(p, p)}")
        _check_penalty(Q, index)
        norm = spectral_norm(Q)
        if norm == 0.0:
            raise PenaltyError(f"penalty {index} is zero")
        Q = Q / norm
        normalized.append(0.5 * (Q + Q.T))

    k = len(normalized)
    bandwidth = max(_bandwidth(Q) for Q in normalized)
    banded = bandwidth <= max(1, p // 4)
    identity = np.eye(p)

    def evaluate(t: np.ndarray) -> np.ndarray:
        system = identity + c * sum(ti * Q for ti, Q in zip(t, normalized))
        if banded:
            X = solveh_banded(_lower_bands(system, bandwidth), identity, lower=True)
        else:
            X = cho_solve(cho_factor(system, lower=True), identity)
        return 0.5 * (X + X.T)

    basis = None
    coefficient_map = None
    if k == 1:
        penalty_values, basis = np.linalg.eigh(normalized[0])
        penalty_values = np.clip(penalty_values, 0.0, 1.0)

        def coefficient_map(t: np.ndarray) -> np.ndarray:
            return 1.0 / (1.0 + c * float(t[0]) * penalty_values)

    info = {'kind': 'pls', 'c': c, 'penalties': k}
    info.update(params or {})
    return SmootherFamily(
        label or f"mpls:k={k},c={c:g}", k, evaluate, p,
        basis=basis,
        coefficient_map=coefficient_map,
        sp_bound=1.0,
        lipschitz=c,
        params=info,
    )


def pls_family(p: int, d: int, c: float = DEFAULT_PENALTY_SCALE) -> SmootherFamily:
    """d-th difference PLS family A(t) = (I + c t D'D / |D'D|_sp)^{-1}, t in [0, 1]."""
    if c <= 0:
        raise TrendInputError(f"penalty scale c must be positive, got {c}")
    return multi_penalty_pls_family(
        p, [penalty_matrix(p, d)], c,
        label=f"pls:d={d},c={c:g}",
        params={'d': d},
    )


def shrinkage_family(p: int, d: int, cluster_tol: float = 1e-9) -> ShrinkageFamily:
    """Shrinkage over the eigenspaces of the d-th difference penalty."""
    spectral = SpectralSmoother.from_matrix(penalty_matrix(p, d), cluster_tol=cluster_tol)
    return ShrinkageFamily(f"shrink:d={d}", spectral, params={'kind': 'shrinkage', 'd': d})


# ---------------------------------------------------------------------------
# Fitting and CLI tokens
# ---------------------------------------------------------------------------

def apply_smoother(A: np.ndarray, Y, epsilon: float = ROW_EPSILON) -> FitResult:
    """Fitted means AY and their rescaled rows."""
    Y = _as_matrix(Y)
    A = _check_smoother(A, Y.shape[0])
    M_hat = A @ Y
    return FitResult(M_hat=M_hat, D_hat=normalize_rows(M_hat, epsilon), trace=float(np.trace(A)))


def _parse_options(text: str) -> Dict[str, str]:
    options = {}
    for part in filter(None, text.split(',')):
        if '=' not in part:
            raise TrendInputError(f"family option {part!r} must look like key=value")
        key, value = part.split('=', 1)
        options[key.strip()] = value.strip()
    return options


def parse_family(token: str, p: int, default_c: float = DEFAULT_PENALTY_SCALE) -> SmootherFamily:
    """
    Build a family from a CLI token.

    Tokens: run3 | runw | runw:w=W0+W1+... | pls:d=D[,c=C] | mpls:d=D1+D2[,c=C] | shrink:d=D
    """
    name, _, rest = token.strip().partition(':')
    options = _parse_options(rest)
    try:
        if name == 'run3':
            return fixed_family(span3_running_average(p), 'run3', {'kind': 'running_average', 'span': 3})
        if name == 'runw':
            if 'w' not in options:
                return weighted_running_average_family(p)
            weights = [float(w) for w in options['w'].split('+')]
            return fixed_family(
                odd_span_weighted_average(p, weights), token.strip(),
                {'kind': 'running_average', 'span': 2 * len(weights) - 1, 'weights': weights},
            )
        if name == 'pls':
            return pls_family(p, int(options.get('d', 2)), float(options.get('c', default_c)))
        if name == 'mpls':
            orders = [int(d) for d in options.get('d', '1+2').split('+')]
            c = float(options.get('c', default_c))
            return multi_penalty_pls_family(
                p, [penalty_matrix(p, d) for d in orders], c,
                label=f"mpls:d={'+'.join(map(str, orders))},c={c:g}",
                params={'d': orders},
            )
        if name == 'shrink':
            return shrinkage_family(p, int(options.get('d', 2)))
    except ValueError as e:
        if isinstance(e, TrendInputError):
            raise
        raise TrendInputError(f"invalid family token {token!r}: {e}") from e
    raise TrendInputError(f"unknown family {name!r} (expected run3, runw, pls, mpls or shrink)")

