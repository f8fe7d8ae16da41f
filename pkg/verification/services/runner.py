"""
Experiment runner: executes a configured check over its exponent fan-out,
appends one JSON record per report to the results log and writes
plot-ready CSV tables.
"""
import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from django.conf import settings
from django.utils import timezone

from .config import ExperimentConfig
from .convolution import Scheme, SpaceTimeField
from .grid import SemigroupKind
from .inequalities import (
    RatioReport, check_corollary, check_horizon_sweep, check_isometry, check_k_reduction,
    check_kunita, check_lemma1, check_lemma2, check_lemma3, check_multiplier_isomorphism,
    check_partition, check_prop1, check_quadratic_variation, check_reduction, check_theorem,
    failed_report,
)
from .levy import symmetric_atoms
from .recipes import random_decay_field

logger = logging.getLogger(__name__)

LOG_NAME = 'reports.jsonl'


def _partition(config, kind, p, k, params):
    return check_partition(config.grid, params['profile'])


def _lemma1(config, kind, p, k, params):
    return check_lemma1(config.grid, params['j_range'], params['t_list'], kind, params['scaled'],
                        tuple(params['fit_window']), params['r_squared_min'],
                        params['collapse_tolerance'])


def _lemma2(config, kind, p, k, params):
    return check_lemma2(config.grid, params['j_range'], params['t_list'], params['trials'], p,
                        config.seed, kind, params['scaled'], params['inputs'])


def _lemma3(config, kind, p, k, params):
    return check_lemma3(p, params['j_count'], config.time.horizon, config.time.steps,
                        params['trials'], params['index_mode'], config.seed, params['c'],
                        refine=params['refine'])


def _prop1(config, kind, p, k, params):
    return check_prop1(config.build_field(), p, params['homogeneous'], kind, params['refine'])


def _reduction(config, kind, p, k, params):
    return check_reduction(config.build_field(), p, kind)


def _theorem(config, kind, p, k, params):
    return check_theorem(config.build_field(), config.measure(), k, p, params['homogeneous'],
                         config.samples, config.seed, kind, Scheme(config.scheme), config.workers)


def _corollary(config, kind, p, k, params):
    return check_corollary(config.build_field(), config.measure(), k, p, params['norm_pair'],
                           config.samples, config.seed, kind, Scheme(config.scheme),
                           config.workers, params['embedding_trials'])


def _isometry(config, kind, p, k, params):
    return check_isometry(config.build_field(), config.measure(), config.samples, config.seed,
                          kind, Scheme(config.scheme), config.workers)


def _kunita_configs(config: ExperimentConfig, count: int, slope: float):
    """Random (g, nu) pairs: time-constant random fields and symmetric atoms."""
    rng = np.random.default_rng(config.seed)
    configs = []
    for _ in range(count):
        frame = random_decay_field(config.grid, slope, rng)
        nu = symmetric_atoms(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
        configs.append((SpaceTimeField.constant(config.time, frame), nu))
    return configs


def _kunita(config, kind, p, k, params):
    return check_kunita(_kunita_configs(config, params['configs'], params['slope']), p,
                        config.samples, config.seed, kind, Scheme(config.scheme), config.workers)


def _k_reduction(config, kind, p, k, params):
    return check_k_reduction(config.build_field(), config.measure(), k, p, params['homogeneous'],
                             config.samples, config.seed, kind, Scheme(config.scheme),
                             config.workers)


def _quadratic_variation(config, kind, p, k, params):
    return check_quadratic_variation(config.build_field(), p, kind, params['refine'])


def _isomorphism(config, kind, p, k, params):
    return check_multiplier_isomorphism(config.grid, params['ks'], params['ss'], config.ps,
                                        params['trials'], config.seed)


def _horizon_sweep(config, kind, p, k, params):
    frame = config.build_field().frame(0)
    return check_horizon_sweep(frame, p, params['horizons'], config.time.steps,
                               params['homogeneous'], kind)


RUNNERS: Dict[str, Callable[..., RatioReport]] = {
    'partition': _partition,
    'lemma1': _lemma1,
    'lemma2': _lemma2,
    'lemma3': _lemma3,
    'prop1': _prop1,
    'reduction': _reduction,
    'theorem': _theorem,
    'corollary': _corollary,
    'isometry': _isometry,
    'kunita': _kunita,
    'k_reduction': _k_reduction,
    'quadratic_variation': _quadratic_variation,
    'isomorphism': _isomorphism,
    'horizon_sweep': _horizon_sweep,
}


@dataclass
class RunResult:
    reports: List[RatioReport]
    records: List[dict]
    log_path: Path

    @property
    def exit_status(self) -> int:
        return 0 if all(report.passed for report in self.reports) else 1


def output_dir(config: ExperimentConfig, out: Optional[str] = None) -> Path:
    """--out, then the config's output_path, then LEVY_HEAT_OUTPUT_DIR."""
    chosen = out or config.output_path or getattr(settings, 'LEVY_HEAT_OUTPUT_DIR', 'results')
    return Path(chosen)


def _run_label(config: ExperimentConfig, run: dict) -> dict:
    kind: SemigroupKind = run['kind']
    label = {'check': config.check, 'kind': kind.label}
    if 'p' in config.spec.exponents:
        label['p'] = run['p']
    if 'k' in config.spec.exponents:
        label['k'] = run['k']
    return label


def run(config: ExperimentConfig, out: Optional[str] = None) -> RunResult:
    """
    Run every (kind, p, k) combination of the configured check and append
    the records to <out>/reports.jsonl.

    A check whose preconditions fail is recorded as a failed report and
    makes the exit status nonzero.
    """
    directory = output_dir(config, out)
    directory.mkdir(parents=True, exist_ok=True)
    log_path = directory / LOG_NAME
    runner = RUNNERS[config.check]

    reports, records = [], []
    for combination in config.fan_out():
        label = _run_label(config, combination)
        logger.info("running %s", label)
        try:
            report = runner(config, combination['kind'], combination['p'], combination['k'],
                            config.check_params)
        except ValueError as e:
            logger.warning("check %s failed its preconditions: %s", label, e)
            report = failed_report(config.check, e, label)
        reports.append(report)
        records.append({
            'experiment': config.name,
            'run': label,
            'seed': config.seed,
            'config': config.to_dict(),
            'created': timezone.now().isoformat(),
            **report.to_record(),
        })

    with log_path.open('a') as log:
        for record in records:
            log.write(json.dumps(record, sort_keys=True) + '\n')
    logger.info("appended %d records to %s", len(records), log_path)
    return RunResult(reports, records, log_path)


def _format_number(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return '-'
    return f"{value:.4g}"


def format_summary(records: Iterable[dict]) -> str:
    """Plain-text table: one line per record."""
    header = f"{'check':<20} {'run':<36} {'lhs':>11} {'rhs':>11} {'ratio':>11}  verdict"
    lines = [header, '-' * len(header)]
    for record in records:
        run_label = ' '.join(f"{k}={v}" for k, v in record['run'].items() if k != 'check')
        lines.append(
            f"{record['name']:<20} {run_label:<36} {_format_number(record['lhs']):>11} "
            f"{_format_number(record['rhs']):>11} {_format_number(record['ratio']):>11}  "
            f"{record['verdict']}"
        )
    return '\n'.join(lines)


def read_records(log_path) -> List[dict]:
    path = Path(log_path)
    if not path.exists():
        return []
    with path.open() as log:
        return [json.loads(line) for line in log if line.strip()]


# Plot tables: selector -> (header, rows-from-record)

def _decay_rows(record: dict) -> List[list]:
    if record['name'] != 'lemma1':
        return []
    return [[row['scaled_time'], row['kernel_l1'], row['j']] for row in record.get('series', [])]


def _refinement_rows(record: dict) -> List[list]:
    return [[record['name'], level, ratio] for level, ratio in record.get('refinement', [])]


def _ratio_vs_p_rows(record: dict) -> List[list]:
    p = record.get('run', {}).get('p')
    if p is None:
        return []
    return [[record['name'], record['run'].get('kind', 'heat'), p, record['ratio']]]


PLOT_TABLES = {
    'lemma1': (['scaled_time', 'kernel_l1', 'j'], _decay_rows),
    'refinement': (['check', 'level', 'ratio'], _refinement_rows),
    'ratio_vs_p': (['check', 'kind', 'p', 'ratio'], _ratio_vs_p_rows),
}


def emit_plot_data(records: Iterable[dict], selector: str, out_dir) -> Path:
    """
    Write <out_dir>/<selector>.csv. An empty selection still writes the header.

    lemma1: scaled_time, kernel_l1, j (decay curves)
    refinement: check, level, ratio (one row per refinement level)
    ratio_vs_p: check, kind, p, ratio
    """
    if selector not in PLOT_TABLES:
        raise ValueError(f"unknown selector '{selector}'; available: {', '.join(sorted(PLOT_TABLES))}")
    header, rows_for = PLOT_TABLES[selector]
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{selector}.csv"
    count = 0
    with path.open('w', newline='') as table:
        writer = csv.writer(table)
        writer.writerow(header)
        for record in records:
            for row in rows_for(record):
                writer.writerow(row)
                count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path
