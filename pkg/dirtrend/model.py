"""
Data model, loss, risk and estimated risk for directional trend estimators.

Observations are the rows of a p x q matrix Y of unit vectors. A candidate
estimator is a symmetric p x p matrix A; the fitted means are AY. The risk of
A depends on the unknown model only through the mean matrix M and the
dispersion gamma^2 = tr(Sigma).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, InvalidProjectionError, TrendInputError
from .geometry import UNIT_TOLERANCE

logger = logging.getLogger(__name__)

CLUSTER_TOLERANCE = 1e-9


@dataclass
class DirectionData:
    """
    Observed directions, one unit row per time point.

    Attributes:
        Y: p x q matrix of unit rows; norms within 1e-8 of one are renormalized
        times: optional covariate values, non-decreasing
    """
    Y: np.ndarray
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim != 2:
            raise TrendInputError(f"data matrix must be 2-D, got shape {self.Y.shape}")
        if self.Y.shape[0] < 2:
            raise TrendInputError("at least two observations are needed")
        if not np.all(np.isfinite(self.Y)):
            raise TrendInputError("data matrix contains non-finite values")
        norms = np.linalg.norm(self.Y, axis=1)
        worst = int(np.argmax(np.abs(norms - 1.0)))
        if abs(norms[worst] - 1.0) > UNIT_TOLERANCE:
            raise TrendInputError(
                f"row {worst} has norm {norms[worst]:.12g}; observations must be unit vectors"
            )
        self.Y = self.Y / norms[:, None]
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)
            if self.times.shape != (self.Y.shape[0],):
                raise DimensionMismatchError(
                    f"{self.times.shape[0]} time stamps for {self.Y.shape[0]} observations"
                )
            if np.any(np.diff(self.times) < 0):
                raise TrendInputError("time stamps must be sorted in ascending order")

    @property
    def p(self) -> int:
        return self.Y.shape[0]

    @property
    def q(self) -> int:
        return self.Y.shape[1]


@dataclass
class MeanField:
    """
    Synthetic ground truth: mean directions mu_i and resultant length lambda.

    The mean vectors are m_i = lambda * mu_i and gamma^2 = 1 - lambda^2.
    """
    mu: np.ndarray
    lam: float
    gamma2: float = field(init=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.ndim != 2:
            raise TrendInputError(f"mean directions must be 2-D, got shape {self.mu.shape}")
        if not (0.0 < self.lam <= 1.0):
            raise TrendInputError(f"resultant length {self.lam!r} outside (0, 1]")
        norms = np.linalg.norm(self.mu, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
            raise TrendInputError("mean directions must be unit vectors")
        self.gamma2 = 1.0 - self.lam ** 2

    @property
    def M(self) -> np.ndarray:
        return self.lam * self.mu

    @property
    def p(self) -> int:
        return self.mu.shape[0]


Matrix = Union[np.ndarray, DirectionData, MeanField]


def _as_matrix(obj: Matrix) -> np.ndarray:
    if isinstance(obj, DirectionData):
        return obj.Y
    if isinstance(obj, MeanField):
        return obj.M
    return np.asarray(obj, dtype=float)


def _check_smoother(A: np.ndarray, p: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (p, p):
        raise DimensionMismatchError(f"smoother has shape {A.shape}, data has {p} rows")
    return A


def extrinsic_loss(A: np.ndarray, Y: Matrix, M: Matrix) -> float:
    """Loss p^{-1} |AY - M|^2 of the fitted means AY."""
    Y = _as_matrix(Y)
    M = _as_matrix(M)
    if Y.shape != M.shape:
        raise DimensionMismatchError(f"data shape {Y.shape} != mean shape {M.shape}")
    p = Y.shape[0]
    A = _check_smoother(A, p)
    residual = A @ Y - M
    return float(np.sum(residual * residual) / p)


def true_risk(A: np.ndarray, M: Matrix, gamma2: Optional[float] = None) -> float:
    """
    Risk p^{-1}[gamma^2 tr(A^2) + tr((I - A)^2 MM')] of a symmetric smoother.

    Args:
        A: p x p symmetric smoother
        M: MeanField, or a mean matrix together with gamma2
        gamma2: dispersion; taken from M when M is a MeanField
    """
    if gamma2 is None:
        if not isinstance(M, MeanField):
            raise TrendInputError("gamma2 is required when M is a plain matrix")
        gamma2 = M.gamma2
    if not np.isfinite(gamma2):
        raise TrendInputError("gamma2 must be finite")
    M = _as_matrix(M)
    p = M.shape[0]
    A = _check_smoother(A, p)
    bias = M - A @ M
    return float((gamma2 * np.sum(A * A) + np.sum(bias * bias)) / p)


def gamma2_hat(Y: Matrix, order: int = 1) -> float:
    """
    First-difference estimator of the dispersion gamma^2.

    [2(p-1)]^{-1} sum_{i>=2} |y_i - y_{i-1}|^2; consistent when successive mean
    directions vary slowly.

    Args:
        Y: time-ordered observations
        order: difference order; only first differences are implemented
    """
    if order != 1:
        raise NotImplementedError(f"gamma2_hat supports order=1 only, got order={order}")
    Y = _as_matrix(Y)
    p = Y.shape[0]
    if p < 2:
        raise TrendInputError("gamma2_hat needs at least two observations")
    diffs = np.diff(Y, axis=0)
    return float(np.sum(diffs * diffs) / (2.0 * (p - 1)))


def estimated_risk(A: np.ndarray, Y: Matrix, gamma2hat: float) -> float:
    """
    Estimated risk p^{-1}[|Y - AY|^2 + (2 tr(A) - p) gamma2hat].

    Written as rss/p + (2 tr(A)/p - 1) gamma2hat so that A = I returns
    gamma2hat exactly. The value can be negative.
    """
    Y = _as_matrix(Y)
    p = Y.shape[0]
    A = _check_smoother(A, p)
    residual = Y - A @ Y
    rss = float(np.sum(residual * residual))
    return rss / p + (2.0 * float(np.trace(A)) / p - 1.0) * gamma2hat


def estimated_risk_bias_form(A: np.ndarray, Y: Matrix, gamma2hat: float) -> float:
    """Estimated risk as p^{-1}[g tr(A^2) + tr((I - A)^2 (YY' - g I))]."""
    Y = _as_matrix(Y)
    p = Y.shape[0]
    A = _check_smoother(A, p)
    complement = np.eye(p) - A
    residual = complement @ Y
    # tr((I-A)^2 YY') = |(I-A)Y|^2 and tr((I-A)^2) = |I-A|^2 for symmetric A
    corrected = np.sum(residual * residual) - gamma2hat * np.sum(complement * complement)
    return float((gamma2hat * np.sum(A * A) + corrected) / p)


@dataclass
class SpectralSmoother:
    """
    Spectral representation A = sum_k a_k P_k.

    Each eigenprojection is stored through an orthonormal basis V_k of its
    range (P_k = V_k V_k'), so p x p projections are only formed on request.
    """
    eigenvalues: np.ndarray
    bases: List[np.ndarray]

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if len(self.bases) != self.eigenvalues.shape[0]:
            raise InvalidProjectionError(
                f"{self.eigenvalues.shape[0]} eigenvalues for {len(self.bases)} projections"
            )

    @classmethod
    def from_matrix(cls, A: np.ndarray, cluster_tol: float = CLUSTER_TOLERANCE) -> 'SpectralSmoother':
        """Eigendecomposition of a symmetric matrix, grouping eigenvalues within cluster_tol."""
        A = np.asarray(A, dtype=float)
        values, vectors = np.linalg.eigh(0.5 * (A + A.T))
        groups = []
        start = 0
        for i in range(1, values.shape[0] + 1):
            if i == values.shape[0] or values[i] - values[i - 1] > cluster_tol:
                groups.append((start, i))
                start = i
        eigenvalues = np.array([values[a:b].mean() for a, b in groups])
        bases = [vectors[:, a:b] for a, b in groups]
        return cls(eigenvalues, bases)

    @classmethod
    def from_projections(
        cls,
        eigenvalues: Sequence[float],
        projections: Sequence[np.ndarray],
        tol: float = 1e-8
    ) -> 'SpectralSmoother':
        """Build from explicit eigenprojections after checking their invariants."""
        projections = [np.asarray(P, dtype=float) for P in projections]
        _check_projections(projections, tol)
        bases = []
        for P in projections:
            values, vectors = np.linalg.eigh(0.5 * (P + P.T))
            bases.append(vectors[:, values > 0.5])
        return cls(np.asarray(eigenvalues, dtype=float), bases)

    @property
    def p(self) -> int:
        return self.bases[0].shape[0]

    @property
    def counts(self) -> np.ndarray:
        """tr(P_k) for every k."""
        return np.array([V.shape[1] for V in self.bases], dtype=float)

    @property
    def complete(self) -> bool:
        return int(self.counts.sum()) == self.p

    def projection(self, k: int) -> np.ndarray:
        V = self.bases[k]
        return V @ V.T

    @property
    def projections(self) -> List[np.ndarray]:
        return [self.projection(k) for k in range(len(self.bases))]

    def energies(self, X: np.ndarray) -> np.ndarray:
        """|P_k X|^2 for every k."""
        return np.array([float(np.sum((V.T @ X) ** 2)) for V in self.bases])

    def assemble(self) -> np.ndarray:
        A = np.zeros((self.p, self.p))
        for a, V in zip(self.eigenvalues, self.bases):
            A += a * (V @ V.T)
        return A

    def with_coefficients(self, coefficients: Sequence[float]) -> 'SpectralSmoother':
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != self.eigenvalues.shape:
            raise DimensionMismatchError(
                f"{coefficients.shape[0]} coefficients for {self.eigenvalues.shape[0]} eigenspaces"
            )
        return SpectralSmoother(coefficients, list(self.bases))

    def validate(self, tol: float = 1e-8) -> None:
        _check_projections(self.projections, tol)


def _check_projections(projections: Sequence[np.ndarray], tol: float) -> None:
    if not projections:
        raise InvalidProjectionError("no projections given")
    p = projections[0].shape[0]
    for k, P in enumerate(projections):
        if P.shape != (p, p):
            raise InvalidProjectionError(f"projection {k} has shape {P.shape}")
        if np.max(np.abs(P - P.T)) > tol:
            raise InvalidProjectionError(f"projection {k} is not symmetric")
        if np.max(np.abs(P @ P - P)) > tol:
            raise InvalidProjectionError(f"projection {k} is not idempotent")
    for j in range(len(projections)):
        for k in range(j + 1, len(projections)):
            if np.max(np.abs(projections[j] @ projections[k])) > tol:
                raise InvalidProjectionError(f"projections {j} and {k} are not orthogonal")


@dataclass
class RiskBreakdown:
    """
    Per-eigenspace risk terms.

    Attributes:
        tau: variance terms tau_k
        w: bias terms w_k (or their estimates)
        a_opt: shrinkage coefficients minimizing the total for fixed projections
        coefficients: eigenvalues a_k the total was evaluated at
        total: sum_k a_k^2 tau_k + (1 - a_k)^2 w_k
    """
    tau: np.ndarray
    w: np.ndarray
    a_opt: np.ndarray
    coefficients: np.ndarray
    total: float

    def evaluate(self, coefficients: Sequence[float]) -> float:
        a = np.asarray(coefficients, dtype=float)
        return float(np.sum(a * a * self.tau + (1.0 - a) ** 2 * self.w))

    @property
    def minimum(self) -> float:
        """Total at a = a_opt, i.e. sum_k tau_k a_opt_k."""
        return float(np.sum(self.tau * self.a_opt))


def _shrinkage(tau: np.ndarray, w: np.ndarray) -> np.ndarray:
    denom = tau + w
    out = np.zeros_like(w)
    positive = (w > 0) & (denom > 0)
    out[positive] = w[positive] / denom[positive]
    return out


def spectral_risk(spec: SpectralSmoother, M: Matrix, gamma2: Optional[float] = None) -> RiskBreakdown:
    """
    Risk of sum_k a_k P_k through its eigenspace terms.

    tau_k = gamma^2 tr(P_k)/p, w_k = |P_k M|^2/p, oracle a_k = w_k/(tau_k + w_k).
    """
    if gamma2 is None:
        if not isinstance(M, MeanField):
            raise TrendInputError("gamma2 is required when M is a plain matrix")
        gamma2 = M.gamma2
    M = _as_matrix(M)
    p = M.shape[0]
    if spec.p != p:
        raise DimensionMismatchError(f"smoother acts on {spec.p} rows, mean matrix has {p}")
    tau = gamma2 * spec.counts / p
    w = spec.energies(M) / p
    a = spec.eigenvalues
    total = float(np.sum(a * a * tau + (1.0 - a) ** 2 * w))
    return RiskBreakdown(tau, w, _shrinkage(tau, w), a.copy(), total)


def spectral_estimated_risk(spec: SpectralSmoother, Y: Matrix, gamma2hat: float) -> RiskBreakdown:
    """
    Estimated risk of sum_k a_k P_k through its eigenspace terms.

    The bias term is estimated by w_k = |P_k Y|^2/p - tau_k, since
    E|P_k Y|^2/p = w_k + tau_k. The shrinkage coefficient is set to 0 when
    that estimate is negative.
    """
    Y = _as_matrix(Y)
    p = Y.shape[0]
    if spec.p != p:
        raise DimensionMismatchError(f"smoother acts on {spec.p} rows, data has {p}")
    tau = gamma2hat * spec.counts / p
    w = spec.energies(Y) / p - tau
    a = spec.eigenvalues
    total = float(np.sum(a * a * tau + (1.0 - a) ** 2 * w))
    return RiskBreakdown(tau, w, _shrinkage(tau, w), a.copy(), total)


def shrinkage_smoother(spec: SpectralSmoother, Y: Matrix, gamma2hat: float) -> np.ndarray:
    """Adaptive Stein-type shrinkage sum_k a_k P_k with estimated coefficients."""
    breakdown = spectral_estimated_risk(spec, Y, gamma2hat)
    logger.debug("shrinkage coefficients: %s", np.round(breakdown.a_opt, 4).tolist())
    return spec.with_coefficients(breakdown.a_opt).assemble()
