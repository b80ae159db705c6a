"""
Repeated simulate-and-select runs on a known trend.

Each replication draws its own substream of the master seed, so the
summary does not depend on how replications are scheduled on the pool.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .errors import TrendInputError
from .families import SmootherFamily
from .selector import RiskReport, SelectionConfig, risk_table
from .synthetic import SimulationConfig, TrendSpec, generate_dataset, resultant_length_oracle

logger = logging.getLogger(__name__)


class FamilySummary(BaseModel):
    label: str
    mean_estimated_risk: float
    median_estimated_risk: float
    mean_true_risk: float
    mean_loss: float
    mean_adaptation_gap: Optional[float] = Field(default=None, description="mean |R(A_hat) - R(A_tilde)|")
    median_adaptation_gap: Optional[float] = None
    mean_plugin_gap: float = Field(description="mean |R_hat(A_hat) - loss(A_hat)|")
    median_plugin_gap: float
    wins: int = Field(ge=0, description="replications ranking this estimator first")


class ExperimentSummary(BaseModel):
    trend: str
    p: int
    kappa: float
    seed: int
    replications: int = Field(ge=1)
    gamma2: float
    gamma2hat: List[float]
    families: List[FamilySummary]

    def family(self, label: str) -> FamilySummary:
        for summary in self.families:
            if summary.label == label:
                return summary
        raise KeyError(label)


def _summarize(label: str, reports: Sequence[RiskReport]) -> FamilySummary:
    entries = [report.entry(label) for report in reports]
    estimated = np.array([e.estimated_risk for e in entries])
    true = np.array([e.true_risk for e in entries])
    loss = np.array([e.loss for e in entries])
    plugin = np.abs(estimated - loss)
    adaptation = None
    if all(e.oracle_risk is not None for e in entries):
        adaptation = np.abs(true - np.array([e.oracle_risk for e in entries]))
    return FamilySummary(
        label=label,
        mean_estimated_risk=float(np.mean(estimated)),
        median_estimated_risk=float(np.median(estimated)),
        mean_true_risk=float(np.mean(true)),
        mean_loss=float(np.mean(loss)),
        mean_adaptation_gap=None if adaptation is None else float(np.mean(adaptation)),
        median_adaptation_gap=None if adaptation is None else float(np.median(adaptation)),
        mean_plugin_gap=float(np.mean(plugin)),
        median_plugin_gap=float(np.median(plugin)),
        wins=sum(report.best_label == label for report in reports),
    )


def run_replication(
    trend: TrendSpec,
    sim_cfg: SimulationConfig,
    families: Sequence[SmootherFamily],
    sel_cfg: SelectionConfig,
    replication: int
) -> RiskReport:
    """Simulate one dataset and tabulate estimated and true risks."""
    data, truth = generate_dataset(trend, sim_cfg, replication)
    return risk_table(families, data, sel_cfg, truth=truth)


def run_experiment(
    trend: TrendSpec,
    sim_cfg: SimulationConfig,
    families: Sequence[SmootherFamily],
    sel_cfg: Optional[SelectionConfig] = None,
    replications: int = 10,
    max_workers: int = 4
) -> ExperimentSummary:
    """
    Repeat simulate -> risk_table over replications 0..n-1 of sim_cfg.seed.

    Returns:
        ExperimentSummary with per-family averages and win counts
    """
    if replications < 1:
        raise TrendInputError(f"replications must be at least 1, got {replications}")
    if not families:
        raise TrendInputError("at least one smoother family is required")
    sel_cfg = (sel_cfg or SelectionConfig()).model_copy(update={'max_workers': 1})
    resultant_length_oracle(float(sim_cfg.kappa), sim_cfg.oracle_draws)

    reports: List[Optional[RiskReport]] = [None] * replications
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_idx = {
            executor.submit(run_replication, trend, sim_cfg, families, sel_cfg, r): r
            for r in range(replications)
        }
        for future in as_completed(future_to_idx):
            r = future_to_idx[future]
            reports[r] = future.result()
            logger.info("replication %d/%d done: best=%s", r + 1, replications, reports[r].best_label)

    labels = [entry.label for entry in reports[0].entries]
    return ExperimentSummary(
        trend=trend.label,
        p=sim_cfg.p,
        kappa=sim_cfg.kappa,
        seed=sim_cfg.seed,
        replications=replications,
        gamma2=reports[0].gamma2,
        gamma2hat=[report.gamma2hat for report in reports],
        families=[_summarize(label, reports) for label in labels],
    )
