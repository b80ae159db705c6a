"""
Pipeline orchestrator for trend fitting.
Coordinates ingest, candidate families, risk tables, simulation and plots.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from .errors import TrendInputError
from .experiment import run_experiment
from .families import SmootherFamily, parse_family
from .ingest import export_data, ingest_csv, load_optional, write_direction_csv
from .model import DirectionData
from .plotting import PlotSpec, render_lambert_svg, series_from_directions
from .report import (
    create_experiment_report,
    create_risk_report,
    generate_experiment_summary,
    generate_risk_summary,
    save_json,
)
from .selector import RiskReport, SelectionConfig, risk_table
from .synthetic import (
    SimulationConfig,
    TrendSpec,
    generate_dataset,
    get_trend,
    load_trend_file,
    simulation_metadata,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class TrendBuilder:
    """Runs the fit / risks / simulate / plot / experiment pipelines."""

    def __init__(self, config: Optional[dict] = None):
        """
        Initialize builder with configuration.

        Args:
            config: Configuration dictionary (optional)
        """
        # Start with defaults and merge any provided overrides to avoid missing keys
        self.config = self._default_config()
        if config:
            self._merge_config(config)

    @staticmethod
    def _default_config() -> dict:
        """Return default configuration."""
        return {
            'families': ['run3', 'pls:d=1,c=1000', 'pls:d=2,c=1000'],
            'penalty_scale': 1000.0,
            'degrees': False,
            'selection': {
                'grid_points_per_axis': 201,
                'refine': True,
                'refine_tolerance': 1e-6,
                'max_workers': 4,
                'tie_tolerance': 1e-12,
            },
            'geometry': {
                'row_epsilon': 1e-10,
            },
            'simulation': {
                'trend': 'wobble',
                'p': 150,
                'kappa': 200.0,
                'seed': 1,
                'oracle_draws': 1000000,
                'replications': 10,
            },
            'plot': {
                'width_px': 640,
                'height_px': 640,
                'connect': True,
            },
            'logging': {
                'level': 'INFO',
                'log_dir': 'logs',
            },
        }

    def _merge_config(self, custom_config: dict) -> None:
        """Recursively merge custom configuration into defaults."""
        def _merge(dst: dict, src: dict) -> None:
            for k, v in src.items():
                if isinstance(v, dict) and isinstance(dst.get(k), dict):
                    _merge(dst[k], v)
                else:
                    dst[k] = v
        _merge(self.config, custom_config)

    # -- typed views -----------------------------------------------------

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(row_epsilon=self.config['geometry']['row_epsilon'], **self.config['selection'])

    def simulation_config(self) -> SimulationConfig:
        sim = self.config['simulation']
        return SimulationConfig(p=sim['p'], kappa=sim['kappa'], seed=sim['seed'],
                                oracle_draws=sim['oracle_draws'])

    def families_for(self, p: int, tokens: Optional[List[str]] = None) -> List[SmootherFamily]:
        tokens = tokens or self.config['families']
        if not tokens:
            raise TrendInputError("at least one smoother family is required")
        return [parse_family(token, p, float(self.config['penalty_scale'])) for token in tokens]

    def trend(self, name: Optional[str] = None, trend_file: Optional[PathLike] = None) -> TrendSpec:
        if trend_file is not None:
            return load_trend_file(trend_file)
        return get_trend(name or self.config['simulation']['trend'])

    def _plot(self, output_path: Path, title: str, *named) -> Path:
        plot_cfg = self.config['plot']
        spec = PlotSpec(
            series=series_from_directions(named),
            width_px=int(plot_cfg['width_px']),
            height_px=int(plot_cfg['height_px']),
            connect=bool(plot_cfg['connect']),
            title=title,
        )
        render_lambert_svg(spec, output_path)
        return output_path

    # -- pipelines -------------------------------------------------------

    def _risk_table(self, data: DirectionData, tokens: Optional[List[str]]) -> RiskReport:
        families = self.families_for(data.p, tokens)
        print(f"\n📐 Selecting among {len(families)} families (grid {self.config['selection']['grid_points_per_axis']}/axis)...")
        return risk_table(families, data, self.selection_config(),
                          progress=lambda label: print(f"  ✓ {label}"))

    def risks(self, input_path: PathLike, output_dir: PathLike, tokens: Optional[List[str]] = None) -> Dict[str, Path]:
        """Risk table only: writes report.json."""
        print("\n📥 Loading input...")
        data = ingest_csv(input_path, self.config['degrees'])
        print(f"  ✓ Loaded {data.p} directions")

        report = self._risk_table(data, tokens)
        report_data = create_risk_report(report, self.selection_config(), str(input_path),
                                         float(self.config['penalty_scale']))
        report_path = save_json(output_dir, 'report.json', report_data)
        print("\n" + generate_risk_summary(report_data))
        print(f"  ✓ Saved {report_path}")
        return {'report': report_path}

    def fit(self, input_path: PathLike, output_dir: PathLike, tokens: Optional[List[str]] = None) -> Dict[str, Path]:
        """Risk table, fitted directions of the winner and an overlay plot."""
        print("\n📥 Loading input...")
        data = ingest_csv(input_path, self.config['degrees'])
        print(f"  ✓ Loaded {data.p} directions")

        report = self._risk_table(data, tokens)
        fit = report.fit()
        logger.info("fit %s: winner %s", input_path, report.best_label)
        output_dir = Path(output_dir)

        print("\n📋 Writing outputs...")
        report_data = create_risk_report(report, self.selection_config(), str(input_path),
                                         float(self.config['penalty_scale']))
        report_path = save_json(output_dir, 'report.json', report_data)
        fitted_path = write_direction_csv(output_dir / 'fitted.csv', data.times, fit.D_hat, self.config['degrees'])
        plot_path = self._plot(output_dir / 'plot.svg', f"fit: {report.best_label}",
                               ('data', data.Y), (report.best_label, fit.D_hat))
        print("  ✓ Saved report.json, fitted.csv, plot.svg")

        print("\n" + "=" * 50)
        print("✅ FIT COMPLETE")
        print("=" * 50)
        print(generate_risk_summary(report_data))
        return {'report': report_path, 'fitted': fitted_path, 'plot': plot_path}

    def simulate(
        self,
        output_dir: PathLike,
        trend_name: Optional[str] = None,
        trend_file: Optional[PathLike] = None
    ) -> Dict[str, Path]:
        """Synthetic observations and true mean directions in the ingest schema."""
        spec = self.trend(trend_name, trend_file)
        cfg = self.simulation_config()
        print(f"\n🎲 Simulating {spec.label}: p={cfg.p}, kappa={cfg.kappa:g}, seed={cfg.seed}")
        data, truth = generate_dataset(spec, cfg)
        logger.info("simulated %s with p=%d kappa=%g seed=%d", spec.label, cfg.p, cfg.kappa, cfg.seed)

        output_dir = Path(output_dir)
        degrees = self.config['degrees']
        data_path = export_data(output_dir / 'data.csv', data, degrees)
        truth_path = write_direction_csv(output_dir / 'truth.csv', data.times, truth.mu, degrees)
        meta_path = save_json(output_dir, 'simulation.json', simulation_metadata(spec, cfg))
        print(f"  ✓ Saved data.csv, truth.csv ({cfg.p} rows), simulation.json")
        print(f"  ✓ lambda={truth.lam:.6f}, gamma2={truth.gamma2:.6f}")
        return {'data': data_path, 'truth': truth_path, 'metadata': meta_path}

    def plot(
        self,
        input_path: PathLike,
        output_dir: PathLike,
        fitted_path: Optional[PathLike] = None,
        truth_path: Optional[PathLike] = None
    ) -> Dict[str, Path]:
        """Lambert plot of data with optional fitted and true series."""
        degrees = self.config['degrees']
        data = ingest_csv(input_path, degrees)
        fitted = load_optional(fitted_path, degrees)
        truth = load_optional(truth_path, degrees)
        named = [('data', data.Y)]
        if truth is not None:
            named.append(('truth', truth.Y))
        if fitted is not None:
            named.append(('fit', fitted.Y))
        plot_path = self._plot(Path(output_dir) / 'plot.svg', Path(input_path).stem, *named)
        print(f"  ✓ Saved {plot_path}")
        return {'plot': plot_path}

    def experiment(
        self,
        output_dir: PathLike,
        trend_name: Optional[str] = None,
        trend_file: Optional[PathLike] = None,
        tokens: Optional[List[str]] = None
    ) -> Dict[str, Path]:
        """Repeated simulate-and-select; writes experiment.json."""
        spec = self.trend(trend_name, trend_file)
        sim_cfg = self.simulation_config()
        replications = int(self.config['simulation']['replications'])
        sel_cfg = self.selection_config()
        families = self.families_for(sim_cfg.p, tokens)
        print(f"\n🔁 Experiment {spec.label}: p={sim_cfg.p}, kappa={sim_cfg.kappa:g}, "
              f"{replications} replications")
        summary = run_experiment(spec, sim_cfg, families, sel_cfg, replications,
                                 max_workers=sel_cfg.max_workers)
        path = save_json(output_dir, 'experiment.json', create_experiment_report(summary, sel_cfg))
        print("\n" + generate_experiment_summary(summary))
        print(f"  ✓ Saved {path}")
        return {'experiment': path}


def cmd_fit(input_path: PathLike, families: Optional[List[str]], config: Optional[dict], output_dir: PathLike) -> Dict[str, Path]:
    """Convenience function: fit from a CSV file."""
    return TrendBuilder(config).fit(input_path, output_dir, families)


def cmd_risks(input_path: PathLike, families: Optional[List[str]], config: Optional[dict], output_dir: PathLike) -> Dict[str, Path]:
    return TrendBuilder(config).risks(input_path, output_dir, families)


def cmd_simulate(
    output_dir: PathLike,
    trend_name: Optional[str] = None,
    trend_file: Optional[PathLike] = None,
    config: Optional[dict] = None
) -> Dict[str, Path]:
    return TrendBuilder(config).simulate(output_dir, trend_name, trend_file)


def cmd_plot(
    input_path: PathLike,
    output_dir: PathLike,
    fitted_path: Optional[PathLike] = None,
    truth_path: Optional[PathLike] = None,
    config: Optional[dict] = None
) -> Dict[str, Path]:
    return TrendBuilder(config).plot(input_path, output_dir, fitted_path, truth_path)


def cmd_experiment(
    output_dir: PathLike,
    trend_name: Optional[str] = None,
    trend_file: Optional[PathLike] = None,
    families: Optional[List[str]] = None,
    config: Optional[dict] = None
) -> Dict[str, Path]:
    return TrendBuilder(config).experiment(output_dir, trend_name, trend_file, families)
