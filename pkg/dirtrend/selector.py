"""
Adaptive selection: minimize estimated risk over a family's parameter box.

The box [0,1]^k is scanned on a regular grid, optionally refined one axis
at a time inside the best grid cell. The same minimizer also produces the
oracle parameter when the true means are known.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, model_validator
from scipy.optimize import minimize_scalar

from .errors import TrendInputError
from .families import (
    FitResult,
    ShrinkageFamily,
    SmootherFamily,
    apply_smoother,
    span3_running_average,
)
from .geometry import ROW_EPSILON
from .model import (
    Matrix,
    MeanField,
    _as_matrix,
    estimated_risk,
    extrinsic_loss,
    gamma2_hat,
    spectral_estimated_risk,
    spectral_risk,
    true_risk,
)

logger = logging.getLogger(__name__)

MAX_FAMILY_DIMENSION = 3
DENSE_GRID_WARNING = 100_000


class SelectionConfig(BaseModel):
    """Grid search settings."""
    grid_points_per_axis: int = Field(default=201, ge=2, description="Grid points per parameter axis")
    refine: bool = Field(default=True, description="Bounded scalar refinement inside the best cell")
    refine_tolerance: float = Field(default=1e-6, gt=0, description="Parameter tolerance of the refinement")
    max_workers: int = Field(default=4, ge=1, description="Threads for dense grid evaluation")
    tie_tolerance: float = Field(default=1e-12, ge=0, description="Risk difference treated as a tie")
    row_epsilon: float = Field(default=ROW_EPSILON, gt=0, description="Degenerate fitted row threshold")


class _RiskObjective:
    """
    Estimated or true risk of A(t) as a function of t.

    With a shared eigenbasis the risk only needs the eigenvalues of A(t) and
    the energies |v_j' X|^2, so A(t) is never formed.
    """

    def __init__(self, family: SmootherFamily, target: np.ndarray, noise: float, estimated: bool):
        self.family = family
        self.target = target
        self.noise = noise
        self.estimated = estimated
        self.p = target.shape[0]
        self._energy = None
        if family.has_shared_basis:
            Z = family.basis.T @ target
            self._energy = np.sum(Z * Z, axis=1)

    @property
    def shared(self) -> bool:
        return self._energy is not None

    def from_coefficients(self, a: np.ndarray) -> float:
        bias = float(np.sum((1.0 - a) ** 2 * self._energy)) / self.p
        if self.estimated:
            return bias + (2.0 * float(np.sum(a)) / self.p - 1.0) * self.noise
        return bias + self.noise * float(np.sum(a * a)) / self.p

    def __call__(self, t) -> float:
        if self.shared:
            return self.from_coefficients(self.family.coefficients(t))
        A = self.family(t)
        if self.estimated:
            return estimated_risk(A, self.target, self.noise)
        return true_risk(A, self.target, self.noise)


def _grid(k: int, n: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, n)
    return np.array(list(itertools.product(axis, repeat=k)), dtype=float).reshape(-1, k)


def _evaluate_grid(objective: _RiskObjective, points: np.ndarray, max_workers: int) -> np.ndarray:
    """Risk at every grid point, indexed by grid position."""
    values = np.empty(len(points))
    if objective.shared or max_workers == 1 or len(points) == 1:
        for i, t in enumerate(points):
            values[i] = objective(t)
        return values

    if len(points) > DENSE_GRID_WARNING:
        logger.warning("%s: %d dense grid evaluations; consider a coarser grid",
                       objective.family.label, len(points))
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_idx = {executor.submit(objective, t): i for i, t in enumerate(points)}
        for future in as_completed(future_to_idx):
            values[future_to_idx[future]] = future.result()
    return values


def _pick_grid_minimum(values: np.ndarray, points: np.ndarray, direction: Sequence[int], tolerance: float) -> int:
    """Grid index of the minimum; ties go to the strongest smoothing, then the lowest index."""
    best = float(np.min(values))
    tied = np.flatnonzero(values <= best + tolerance * max(1.0, abs(best)))
    if tied.size == 1:
        return int(tied[0])
    strength = points[tied] @ np.asarray(direction, dtype=float)
    return int(tied[int(np.argmax(strength))])


def _refine(objective: _RiskObjective, t: np.ndarray, value: float, step: float, tolerance: float) -> Tuple[np.ndarray, float]:
    """One bounded scalar minimization per axis inside the grid cell around t."""
    t = t.copy()
    for axis in range(t.shape[0]):
        lower = max(0.0, t[axis] - step)
        upper = min(1.0, t[axis] + step)

        def along(s: float, axis=axis) -> float:
            trial = t.copy()
            trial[axis] = s
            return objective(trial)

        result = minimize_scalar(along, bounds=(lower, upper), method='bounded',
                                 options={'xatol': tolerance})
        if result.success and float(result.fun) < value:
            t[axis] = float(result.x)
            value = float(result.fun)
    return t, value


def _minimize(objective: _RiskObjective, cfg: SelectionConfig) -> Tuple[np.ndarray, float, Optional[float]]:
    family = objective.family
    k = family.dim_t
    if k == 0:
        t = np.zeros(0)
        return t, objective(t), None
    if k > MAX_FAMILY_DIMENSION:
        raise TrendInputError(f"{family.label}: grid search supports k <= {MAX_FAMILY_DIMENSION}, got k={k}")

    points = _grid(k, cfg.grid_points_per_axis)
    values = _evaluate_grid(objective, points, cfg.max_workers)
    index = _pick_grid_minimum(values, points, family.smoothing_direction, cfg.tie_tolerance)
    t = points[index].copy()
    value = float(values[index])
    step = 1.0 / (cfg.grid_points_per_axis - 1)
    if cfg.refine:
        t, value = _refine(objective, t, value, step, cfg.refine_tolerance)
    return t, value, step


def minimize_estimated_risk(
    family: SmootherFamily,
    Y: Matrix,
    gamma2hat: float,
    cfg: Optional[SelectionConfig] = None
) -> Tuple[Tuple[float, ...], FitResult]:
    """
    Adaptive parameter t_hat = argmin R_hat(A(t)) and the resulting fit.

    Args:
        family: Candidate family (k <= 3, or a shrinkage family)
        Y: Observations
        gamma2hat: Dispersion estimate
        cfg: Grid settings

    Returns:
        (t_hat, FitResult) where the fit carries A(t_hat) Y, its unit rows
        and R_hat(A(t_hat))
    """
    cfg = cfg or SelectionConfig()
    Y = _as_matrix(Y)
    if family.p != Y.shape[0]:
        raise TrendInputError(f"{family.label} acts on {family.p} rows, data has {Y.shape[0]}")

    if isinstance(family, ShrinkageFamily):
        breakdown = spectral_estimated_risk(family.spectral, Y, gamma2hat)
        t = breakdown.a_opt
        value = breakdown.evaluate(t)
        step = None
    else:
        t, value, step = _minimize(_RiskObjective(family, Y, gamma2hat, estimated=True), cfg)

    A = family(t)
    fit = apply_smoother(A, Y, cfg.row_epsilon)
    fit.t_selected = tuple(float(x) for x in t)
    fit.estimated_risk = float(value)
    fit.label = family.label
    fit.grid_step = step
    logger.info("%s: t_hat=%s R_hat=%.6g", family.label,
                [round(x, 6) for x in fit.t_selected[:MAX_FAMILY_DIMENSION]], value)
    return fit.t_selected, fit


def oracle_parameter(
    family: SmootherFamily,
    M: Matrix,
    cfg: Optional[SelectionConfig] = None,
    gamma2: Optional[float] = None
) -> Tuple[Tuple[float, ...], float]:
    """Oracle parameter t_tilde = argmin R(A(t)) for known means; returns (t_tilde, risk)."""
    cfg = cfg or SelectionConfig()
    if gamma2 is None:
        if not isinstance(M, MeanField):
            raise TrendInputError("gamma2 is required when M is a plain matrix")
        gamma2 = M.gamma2
    if isinstance(family, ShrinkageFamily):
        breakdown = spectral_risk(family.spectral, M, gamma2)
        return tuple(float(x) for x in breakdown.a_opt), breakdown.minimum

    t, value, _ = _minimize(_RiskObjective(family, _as_matrix(M), gamma2, estimated=False), cfg)
    return tuple(float(x) for x in t), float(value)


class RiskEntry(BaseModel):
    """One row of a risk table."""
    label: str
    kind: str = Field(description="adaptive, fixed, shrinkage or naive")
    params: Dict[str, Any] = Field(default_factory=dict)
    t_hat: Optional[List[float]] = None
    grid_step: Optional[float] = None
    estimated_risk: float
    trace: Optional[float] = Field(default=None, description="tr(A), effective degrees of freedom")
    true_risk: Optional[float] = None
    loss: Optional[float] = None
    oracle_t: Optional[List[float]] = None
    oracle_risk: Optional[float] = None


class RiskReport(BaseModel):
    """Estimated risks of the competing estimators, smallest first in ranking."""
    gamma2hat: float = Field(ge=0)
    naive_risk: float
    entries: List[RiskEntry]
    ranking: List[str]
    gamma2: Optional[float] = None

    _fits: Dict[str, FitResult] = PrivateAttr(default_factory=dict)

    @model_validator(mode='after')
    def check_consistency(self) -> 'RiskReport':
        if self.naive_risk != self.gamma2hat:
            raise ValueError("naive risk must equal gamma2hat")
        by_label = {entry.label: entry for entry in self.entries}
        if len(by_label) != len(self.entries):
            raise ValueError("entry labels must be unique")
        if sorted(self.ranking) != sorted(by_label):
            raise ValueError("ranking must list every entry exactly once")
        risks = [by_label[label].estimated_risk for label in self.ranking]
        if any(b < a for a, b in zip(risks, risks[1:])):
            raise ValueError("ranking must be sorted by estimated risk")
        return self

    def entry(self, label: str) -> RiskEntry:
        for entry in self.entries:
            if entry.label == label:
                return entry
        raise KeyError(label)

    @property
    def best_label(self) -> str:
        return self.ranking[0]

    def fit(self, label: Optional[str] = None) -> FitResult:
        """Fit of the given entry (default: the winner)."""
        return self._fits[label or self.best_label]


def _entry_for(family: SmootherFamily, t_hat, fit: FitResult) -> RiskEntry:
    if isinstance(family, ShrinkageFamily):
        kind, t_list, step = 'shrinkage', None, None
    elif family.is_fixed:
        kind, t_list, step = 'fixed', None, None
    else:
        kind, t_list, step = 'adaptive', list(t_hat), fit.grid_step
    return RiskEntry(
        label=family.label,
        kind=kind,
        params=dict(family.params),
        t_hat=t_list,
        grid_step=step,
        estimated_risk=fit.estimated_risk,
        trace=fit.trace,
    )


def risk_table(
    families: Sequence[SmootherFamily],
    Y: Matrix,
    cfg: Optional[SelectionConfig] = None,
    truth: Optional[MeanField] = None,
    progress: Optional[Callable[[str], None]] = None
) -> RiskReport:
    """
    Estimated-risk comparison of adaptive fits from several families.

    gamma2hat is computed once. The span-3 running average (when p >= 3 and
    not already listed) and the naive estimator A = I are appended. With a
    known truth, entries also carry true risk, loss and the oracle.
    """
    if not families:
        raise TrendInputError("at least one smoother family is required")
    cfg = cfg or SelectionConfig()
    Y = _as_matrix(Y)
    p = Y.shape[0]
    g = gamma2_hat(Y)
    logger.info("risk table: p=%d, %d families, gamma2hat=%.6g", p, len(families), g)

    candidates = list(families)
    labels = [family.label for family in candidates]
    if len(set(labels)) != len(labels):
        raise TrendInputError(f"duplicate family labels: {labels}")
    if p >= 3 and 'run3' not in labels:
        candidates.append(SmootherFamily(
            'run3', 0, lambda t, A=span3_running_average(p): A, p,
            params={'kind': 'running_average', 'span': 3},
        ))

    entries = []
    fits = {}
    for family in candidates:
        if progress:
            progress(family.label)
        t_hat, fit = minimize_estimated_risk(family, Y, g, cfg)
        entry = _entry_for(family, t_hat, fit)
        if truth is not None:
            A = family(t_hat)
            entry.true_risk = true_risk(A, truth)
            entry.loss = extrinsic_loss(A, Y, truth)
            if not family.is_fixed:
                oracle_t, oracle_risk = oracle_parameter(family, truth, cfg)
                entry.oracle_t = None if isinstance(family, ShrinkageFamily) else list(oracle_t)
                entry.oracle_risk = oracle_risk
        entries.append(entry)
        fits[family.label] = fit

    naive = RiskEntry(label='naive', kind='naive', params={'kind': 'identity'},
                      estimated_risk=g, trace=float(p))
    if truth is not None:
        naive.true_risk = truth.gamma2
        naive.loss = extrinsic_loss(np.eye(p), Y, truth)
    entries.append(naive)
    fits['naive'] = FitResult(M_hat=Y.copy(), D_hat=Y.copy(), estimated_risk=g,
                              label='naive', trace=float(p))

    order = sorted(range(len(entries)), key=lambda i: (entries[i].estimated_risk, i))
    report = RiskReport(
        gamma2hat=g,
        naive_risk=g,
        entries=entries,
        ranking=[entries[i].label for i in order],
        gamma2=None if truth is None else truth.gamma2,
    )
    report._fits = fits
    return report
