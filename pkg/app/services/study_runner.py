"""
Study harness: scaled presets for the four sweeps, seeded trial fan-out over a
worker pool, and the aggregate / plot-data / timeline / summary outputs.

Output layout under <out>/<study>/:

    <MOD>-<value>/<trial>.csv    per-trial timeline (metrics.CSV_COLUMNS)
    <MOD>-<value>/<trial>.json   per-trial ledger document
    aggregate.csv                mean and stddev of every summary metric
    plot_data.csv                long format: modality, x, metric, y, y_std
    timeline.csv                 mean collected targets vs iteration
    summary.json                 aggregate plus trend statistics
"""

import csv
import logging
import math
import os
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Tuple

from app.errors import ConfigurationError
from app.schemas import RosterEntrySchema, StudySpec, WorldConfig
from app.services.metrics import (
    MAX_LEVEL, MetricsLedger, export, mean_std, r_squared, spearman
)
from app.services.sar_world import run_trial
from app.utils import ensure_dir, write_json

logger = logging.getLogger(__name__)

SUMMARY_METRICS = (
    'stop_iteration', 'collected', 'queries', 'effective', 'eq_percent',
    'upd_q', 'upd_eu', 'upd_ebu', 'upd_total',
) + tuple(f'level_{i}' for i in range(MAX_LEVEL + 1))

TIMELINE_POINTS = 200

STUDY_MODALITIES = {
    'modality-compare': ['QRA', 'QRU', 'EU', 'EBU'],
    'comm-range': ['QRA', 'QRU', 'EU', 'EBU'],
    'opportunities': ['QRU', 'EU', 'EBU'],
    'buffer-duration': ['EBU'],
}


def _roster(ignorant: int, multi: int) -> List[RosterEntrySchema]:
    return [RosterEntrySchema(modality='QRU', knowledge='I', count=ignorant),
            RosterEntrySchema(modality='QRU', knowledge='M', count=multi)]


FULL_SCALE = 1.0
DESK_SCALE = 0.25

FULL_TRIALS = 20
FULL_COMM_RANGES = [100, 200, 500, 800, 1000]
FULL_OPPORTUNITIES = [10, 25, 50, 100]

# The two documented buffer sweeps; other scales stretch the nearer one
BUFFER_SWEEPS = {
    FULL_SCALE: [200, 500, 1000, 2000, 5000, 10000, 15000],
    DESK_SCALE: [100, 250, 500, 1000, 2500],
}

# Power laws through both documented points: the desk setup keeps 2/5 of the
# targets and 1/5 of the iterations of the full one
TARGET_EXPONENT = math.log(10 / 25) / math.log(DESK_SCALE)
ITERATION_EXPONENT = math.log(20000 / 100000) / math.log(DESK_SCALE)
T_M_RATIO = 5000 / 100000


def _scaled_iterations(scale: float) -> int:
    return max(1, round(WorldConfig().iterations * scale ** ITERATION_EXPONENT))


def scaled_base(scale: float) -> WorldConfig:
    """The full-scale base config shrunk (or grown) by `scale`.

    Lengths and the roster scale with sqrt(scale), so comm range over arena
    side stays fixed; targets and iterations follow the power laws above and
    t_m stays at the same fraction of the iterations.
    """
    full = WorldConfig()
    linear = math.sqrt(scale)
    side = round(full.arena[0] * linear, 1)
    robots = max(2, round(full.robot_count() * linear))
    per_colour = max(1, round(full.targets[0] * scale ** TARGET_EXPONENT))
    iterations = _scaled_iterations(scale)
    return WorldConfig(
        arena=(side, side), roster=_roster(robots - 1, 1), targets=(per_colour,) * 4,
        zone_radius=min(full.zone_radius, side / 4), comm_range=round(full.comm_range * linear, 1),
        iterations=iterations, t_m=max(1, round(iterations * T_M_RATIO)),
    )


def scaled_sweeps(scale: float, base: WorldConfig) -> Dict[str, List[Any]]:
    linear = math.sqrt(scale)
    per_colour = base.targets[0] / WorldConfig().targets[0]

    if scale in BUFFER_SWEEPS:
        buffers = BUFFER_SWEEPS[scale]
    else:
        anchor = DESK_SCALE if scale < math.sqrt(DESK_SCALE * FULL_SCALE) else FULL_SCALE
        stretch = base.iterations / _scaled_iterations(anchor)
        buffers = [max(1, round(t * stretch)) for t in BUFFER_SWEEPS[anchor]]

    return {
        'modality-compare': [base.comm_range],
        'comm-range': [round(r * linear, 1) for r in FULL_COMM_RANGES],
        'opportunities': [(max(1, round(n * per_colour)),) * 4 for n in FULL_OPPORTUNITIES],
        'buffer-duration': list(buffers),
    }


def preset_study(study: str, scale: float = DESK_SCALE, trials: Optional[int] = None,
                 seed: Optional[int] = None) -> StudySpec:
    """Build the StudySpec of a named study at any positive scale factor.

    Scale 1.0 is the full setup (20 trials) and 0.25 the desk-scale one
    (5 trials); trial counts scale linearly.
    """
    if study not in STUDY_MODALITIES:
        raise ConfigurationError(f'unknown study {study!r}', path='study')
    if not scale > 0:
        raise ConfigurationError(f'scale must be positive, got {scale}', path='scale')
    base = scaled_base(scale)
    sweeps = scaled_sweeps(scale, base)
    if seed is not None:
        base = base.model_copy(update={'seed': seed})
    default_trials = max(1, round(FULL_TRIALS * scale))
    return StudySpec(study=study, modalities=STUDY_MODALITIES[study], sweep=sweeps[study],
                     trials=trials or default_trials, base=base, scale=scale)


def sweep_label(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return '-'.join(_number(v) for v in value)
    return _number(value)


def sweep_x(value: Any) -> float:
    """Numeric x coordinate of a sweep point; target tuples map to their total"""
    if isinstance(value, (list, tuple)):
        return float(sum(value))
    return float(value)


def _number(value: Any) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _run_job(job: Tuple[str, Any, int, WorldConfig]) -> Tuple[str, Any, int, MetricsLedger]:
    modality, value, trial_index, cfg = job
    return modality, value, trial_index, run_trial(cfg)


def trial_jobs(spec: StudySpec) -> List[Tuple[str, Any, int, WorldConfig]]:
    return [
        (modality, value, k, spec.trial_config(modality, value, k))
        for modality in spec.modalities
        for value in spec.sweep
        for k in range(spec.trials)
    ]


def run_study(spec: StudySpec, out_dir: str, jobs: int = 1) -> Dict:
    """Run every (modality, sweep value, trial) and write the study outputs.

    Args:
        spec: validated study description
        out_dir: root output directory; results go to <out_dir>/<study>/
        jobs: number of worker processes (outputs do not depend on it)

    Returns:
        The summary document also written to summary.json
    """
    work = trial_jobs(spec)
    study_dir = ensure_dir(os.path.join(out_dir, spec.study))
    logger.info(f"Study {spec.study}: {len(work)} trials on {jobs} worker(s) -> {study_dir}")

    if jobs > 1:
        with Pool(processes=jobs) as pool:
            results = list(pool.imap(_run_job, work))
    else:
        results = [_run_job(job) for job in work]

    grouped: Dict[Tuple[str, str], List[MetricsLedger]] = {}
    for modality, value, k, ledger in results:
        point_dir = os.path.join(study_dir, f'{modality}-{sweep_label(value)}')
        export(ledger, 'csv', os.path.join(point_dir, f'{k}.csv'))
        export(ledger, 'json', os.path.join(point_dir, f'{k}.json'))
        grouped.setdefault((modality, sweep_label(value)), []).append(ledger)
        logger.debug(f"{modality} {sweep_label(value)} trial {k}: stop={ledger.stop_iteration}")

    rows = aggregate(spec, grouped)
    write_aggregate(rows, os.path.join(study_dir, 'aggregate.csv'))
    write_plot_data(rows, os.path.join(study_dir, 'plot_data.csv'))
    write_timeline(spec, grouped, os.path.join(study_dir, 'timeline.csv'))

    summary = {
        'study': spec.study,
        'scale': spec.scale,
        'trials': spec.trials,
        'modalities': list(spec.modalities),
        'sweep': [sweep_label(v) for v in spec.sweep],
        'base': spec.base.to_dict(),
        'aggregate': rows,
        'trends': trends(spec, rows),
    }
    write_json(os.path.join(study_dir, 'summary.json'), summary)
    logger.info(f"Study {spec.study} finished")
    return summary


def aggregate(spec: StudySpec, grouped: Dict[Tuple[str, str], List[MetricsLedger]]) -> List[Dict]:
    """One row per (modality, sweep point): mean and stddev of each summary metric"""
    rows = []
    for modality in spec.modalities:
        for value in spec.sweep:
            ledgers = grouped[(modality, sweep_label(value))]
            summaries = [ledger.summary() for ledger in ledgers]
            row = {'modality': modality, 'sweep': sweep_label(value), 'x': sweep_x(value),
                   'trials': len(ledgers)}
            for metric in SUMMARY_METRICS:
                mean, std = mean_std([s[metric] for s in summaries])
                row[f'{metric}_mean'] = mean
                row[f'{metric}_std'] = std
            rows.append(row)
    return rows


def _aggregate_columns() -> List[str]:
    columns = ['modality', 'sweep', 'x', 'trials']
    for metric in SUMMARY_METRICS:
        columns += [f'{metric}_mean', f'{metric}_std']
    return columns


def write_aggregate(rows: List[Dict], path: str):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=_aggregate_columns(), lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)


def write_plot_data(rows: List[Dict], path: str):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('modality', 'x', 'metric', 'y', 'y_std'))
        for row in rows:
            for metric in SUMMARY_METRICS:
                writer.writerow((row['modality'], row['x'], metric,
                                 row[f'{metric}_mean'], row[f'{metric}_std']))


def write_timeline(spec: StudySpec, grouped: Dict[Tuple[str, str], List[MetricsLedger]], path: str):
    """Mean collected count vs iteration; a stopped trial keeps its final count"""
    stride = max(1, spec.base.iterations // TIMELINE_POINTS)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('modality', 'sweep', 'iter', 'collected_mean'))
        for modality in spec.modalities:
            for value in spec.sweep:
                ledgers = grouped[(modality, sweep_label(value))]
                series = [[row[-1] for row in ledger.timeline] for ledger in ledgers]
                last = max((len(s) for s in series), default=0)
                for iteration in range(stride, last + 1, stride):
                    counts = [s[min(iteration, len(s)) - 1] if s else 0 for s in series]
                    writer.writerow((modality, sweep_label(value), iteration,
                                     sum(counts) / len(counts)))


def trends(spec: StudySpec, rows: List[Dict]) -> Dict[str, Dict[str, Optional[float]]]:
    """Per-modality trend statistics across the sweep"""
    roster = spec.base.robot_count()
    result = {}
    for modality in spec.modalities:
        series = [row for row in rows if row['modality'] == modality]
        xs = [row['x'] for row in series]
        totals = [row['upd_total_mean'] for row in series]
        mean_total = sum(totals) / len(totals)
        deviation = max(abs(t - mean_total) for t in totals) / mean_total if mean_total else 0.0
        drift = 0.0
        for i in range(MAX_LEVEL + 1):
            levels = [row[f'level_{i}_mean'] for row in series]
            drift = max(drift, (max(levels) - min(levels)) / roster)
        result[modality] = {
            'r2_upd_total': r_squared(xs, totals),
            'rho_upd_ebu': spearman(xs, [row['upd_ebu_mean'] for row in series]),
            'rho_upd_q': spearman(xs, [row['upd_q_mean'] for row in series]),
            'upd_total_deviation': deviation,
            'level_drift': drift,
        }
    return result
