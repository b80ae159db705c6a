"""
Report generation for trend fits.
Produces report.json, simulation.json and experiment.json.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

from . import __version__
from .experiment import ExperimentSummary
from .selector import RiskReport, SelectionConfig


def create_risk_report(
    report: RiskReport,
    selection: SelectionConfig,
    input_path: Optional[str] = None,
    penalty_scale: Optional[float] = None
) -> dict:
    """
    Create the report.json structure.

    Args:
        report: Risk table from risk_table()
        selection: Grid configuration used
        input_path: Input CSV as given on the command line
        penalty_scale: Default c applied to PLS tokens without c=

    Returns:
        Report dictionary
    """
    data = {
        "software": {"name": "dirtrend", "version": __version__},
        "input": input_path,
        "selection": selection.model_dump(exclude={'max_workers'}),
        "penalty_scale": penalty_scale,
        "gamma2hat": report.gamma2hat,
        "naive_risk": report.naive_risk,
        "winner": report.best_label,
        "ranking": list(report.ranking),
        "entries": [],
    }
    if report.gamma2 is not None:
        data["gamma2"] = report.gamma2

    for entry in report.entries:
        data["entries"].append(entry.model_dump(exclude_none=True))
    return data


def create_experiment_report(summary: ExperimentSummary, selection: SelectionConfig) -> dict:
    data = summary.model_dump()
    data["software"] = {"name": "dirtrend", "version": __version__}
    data["selection"] = selection.model_dump(exclude={'max_workers'})
    return data


def save_json(output_dir: Path, name: str, data: Dict[str, Any]) -> Path:
    """Write data as indented JSON into output_dir/name."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / name
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
        f.write('\n')
    return path


def generate_risk_summary(report_data: dict) -> str:
    """
    Generate a human-readable risk table.

    Returns:
        Summary string
    """
    by_label = {entry["label"]: entry for entry in report_data["entries"]}
    with_truth = "true_risk" in by_label[report_data["winner"]]
    header = f"  {'estimator':<24} {'R_hat':>10}"
    if with_truth:
        header += f" {'true risk':>10} {'loss':>10} {'oracle':>10}"
    lines = [
        "Risk Summary:",
        f"  gamma2hat: {report_data['gamma2hat']:.6f}",
        "",
        header,
    ]
    for label in report_data["ranking"]:
        entry = by_label[label]
        line = f"  {label:<24} {entry['estimated_risk']:>10.6f}"
        if with_truth:
            oracle = entry.get("oracle_risk")
            line += f" {entry['true_risk']:>10.6f} {entry['loss']:>10.6f}"
            line += f" {oracle:>10.6f}" if oracle is not None else f" {'-':>10}"
        if entry.get("t_hat"):
            line += "  t_hat=" + ",".join(f"{t:.4f}" for t in entry["t_hat"])
        lines.append(line)
    lines.append(f"\nWinner: {report_data['winner']}")
    return "\n".join(lines)


def generate_experiment_summary(summary: ExperimentSummary) -> str:
    lines = [
        f"Experiment Summary: {summary.trend}, p={summary.p}, kappa={summary.kappa:g}, "
        f"{summary.replications} replications (seed {summary.seed})",
        f"  gamma2 (oracle): {summary.gamma2:.6f}",
        "",
        f"  {'estimator':<24} {'mean R_hat':>10} {'mean risk':>10} {'|R-R_or|':>10} {'|R_hat-L|':>10} {'wins':>5}",
    ]
    for family in sorted(summary.families, key=lambda f: f.mean_estimated_risk):
        gap = family.mean_adaptation_gap
        gap_text = f"{gap:>10.6f}" if gap is not None else f"{'-':>10}"
        lines.append(
            f"  {family.label:<24} {family.mean_estimated_risk:>10.6f} {family.mean_true_risk:>10.6f} "
            f"{gap_text} {family.mean_plugin_gap:>10.6f} {family.wins:>5}"
        )
    return "\n".join(lines)
