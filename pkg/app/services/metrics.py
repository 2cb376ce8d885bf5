"""
Metrics ledger for one trial: query/update counters, effective-query
percentage, the collection timeline and knowledge-level histograms.
"""

import csv
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.models import UpdateSource
from app.utils import ensure_dir, write_json

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('iter', 'queries', 'effective', 'upd_q', 'upd_eu', 'upd_ebu', 'collected')
MAX_LEVEL = 4


@dataclass(frozen=True)
class MetricsEvent:
    iteration: int
    robot_id: int
    kind: str  # 'query' | 'effective' | 'update'
    source: Optional[str] = None


class MetricsLedger:
    """Append-only event log with running counters"""

    def __init__(self, robot_ids: Iterable[int] = (), config_echo: Dict = None):
        self.events: List[MetricsEvent] = []
        self.queries = 0
        self.effective = 0
        self.responses_delivered = 0
        self.updates = {source: 0 for source in UpdateSource}
        self.per_robot: Dict[int, Dict[str, int]] = {rid: _robot_counters() for rid in robot_ids}
        self.timeline: List[tuple] = []
        self.initial_levels: List[int] = [0] * (MAX_LEVEL + 1)
        self.final_levels: List[int] = [0] * (MAX_LEVEL + 1)
        self.initial_knowledge: Dict[int, int] = {}
        self.final_knowledge: Dict[int, int] = {}
        self.knowledge: Dict[int, Dict] = {}
        self.stop_iteration: Optional[int] = None
        self.collected = 0
        self.config_echo = config_echo or {}

    def __repr__(self):
        return f'<MetricsLedger q={self.queries} eff={self.effective} upd={self.total_updates}>'

    def _robot(self, robot_id: int) -> Dict[str, int]:
        return self.per_robot.setdefault(robot_id, _robot_counters())

    def record_query(self, robot_id: int, iteration: int):
        self.events.append(MetricsEvent(iteration, robot_id, 'query'))
        self.queries += 1
        self._robot(robot_id)['queries'] += 1

    def record_effective(self, robot_id: int, iteration: int):
        self.events.append(MetricsEvent(iteration, robot_id, 'effective'))
        self.effective += 1
        self._robot(robot_id)['effective'] += 1

    def record_update(self, robot_id: int, iteration: int, source: UpdateSource):
        self.events.append(MetricsEvent(iteration, robot_id, 'update', source.value))
        self.updates[source] += 1
        self._robot(robot_id)[source.value] += 1
        logger.debug(f"Iteration {iteration}: robot {robot_id} updated via {source.value}")

    def record_response(self):
        self.responses_delivered += 1

    def sample(self, iteration: int, collected: int):
        """Append one cumulative timeline row"""
        self.collected = collected
        self.timeline.append((
            iteration, self.queries, self.effective,
            self.updates[UpdateSource.QUERY], self.updates[UpdateSource.EU],
            self.updates[UpdateSource.EBU], collected
        ))

    @property
    def total_updates(self) -> int:
        return sum(self.updates.values())

    def recount(self) -> Dict[str, int]:
        """Counters recomputed from the event log alone"""
        counts = {'queries': 0, 'effective': 0, 'Q': 0, 'EU': 0, 'EBU': 0}
        for event in self.events:
            if event.kind == 'update':
                counts[event.source] += 1
            elif event.kind == 'query':
                counts['queries'] += 1
            else:
                counts['effective'] += 1
        return counts

    def counters(self) -> Dict[str, int]:
        return {
            'queries': self.queries,
            'effective': self.effective,
            'Q': self.updates[UpdateSource.QUERY],
            'EU': self.updates[UpdateSource.EU],
            'EBU': self.updates[UpdateSource.EBU],
        }

    def summary(self) -> Dict:
        """Scalar read-outs aggregated across trials"""
        return {
            'stop_iteration': self.stop_iteration,
            'collected': self.collected,
            'queries': self.queries,
            'effective': self.effective,
            'eq_percent': eq_percent(self),
            'responses': self.responses_delivered,
            'upd_q': self.updates[UpdateSource.QUERY],
            'upd_eu': self.updates[UpdateSource.EU],
            'upd_ebu': self.updates[UpdateSource.EBU],
            'upd_total': self.total_updates,
            **{f'level_{i}': count for i, count in enumerate(self.final_levels)},
        }

    def to_dict(self) -> Dict:
        return {
            'summary': self.summary(),
            'per_robot': {str(rid): counts for rid, counts in sorted(self.per_robot.items())},
            'initial_levels': list(self.initial_levels),
            'final_levels': list(self.final_levels),
            'initial_knowledge': {str(k): v for k, v in sorted(self.initial_knowledge.items())},
            'final_knowledge': {str(k): v for k, v in sorted(self.final_knowledge.items())},
            'knowledge': {str(k): v for k, v in sorted(self.knowledge.items())},
            'config': self.config_echo,
        }


def _robot_counters() -> Dict[str, int]:
    return {'queries': 0, 'effective': 0, 'Q': 0, 'EU': 0, 'EBU': 0}


def eq_percent(ledger: MetricsLedger) -> float:
    """Fraction of posted queries that received a response; 1.0 when none were posted"""
    if ledger.queries == 0:
        return 1.0
    return ledger.effective / ledger.queries


def knowledge_levels(robots) -> List[int]:
    """Histogram over levels 0..4 of distinct target colours each robot knows"""
    histogram = [0] * (MAX_LEVEL + 1)
    for robot in robots:
        histogram[min(len(robot.kb.colors()), MAX_LEVEL)] += 1
    return histogram


class LedgerDocument(BaseModel):
    """Schema of the JSON export"""
    model_config = ConfigDict(extra='forbid')

    summary: Dict[str, Optional[float]]
    per_robot: Dict[str, Dict[str, int]]
    initial_levels: List[int]
    final_levels: List[int]
    initial_knowledge: Dict[str, int]
    final_knowledge: Dict[str, int]
    knowledge: Dict[str, Dict[str, List[Any]]]
    config: Dict


def export(ledger: MetricsLedger, fmt: str, path: str):
    """Write the ledger as CSV (timeline) or JSON (summary, histograms, final knowledge, config echo)"""
    if fmt == 'csv':
        ensure_dir(os.path.dirname(path))
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CSV_COLUMNS)
            writer.writerows(ledger.timeline)
    elif fmt == 'json':
        document = ledger.to_dict()
        LedgerDocument.model_validate(document)
        write_json(path, document)
    else:
        raise ValueError(f'unknown export format {fmt!r}')
    logger.debug(f"Exported ledger to {path}")


# Trend statistics used by study summaries

def mean_std(values: Sequence[float]) -> tuple:
    data = np.asarray([v for v in values if v is not None], dtype=float)
    if data.size == 0:
        return (None, None)
    std = float(data.std(ddof=1)) if data.size > 1 else 0.0
    return (float(data.mean()), std)


def r_squared(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of the least-squares line through (x, y)"""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.size < 2:
        return 1.0
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(((ys - (slope * xs + intercept)) ** 2).sum())
    total = float(((ys - ys.mean()) ** 2).sum())
    if total == 0.0:
        return 1.0
    return 1.0 - residual / total


def _ranks(values: Sequence[float]) -> np.ndarray:
    data = np.asarray(values, dtype=float)
    ranks = np.empty(data.size)
    ranks[data.argsort(kind='mergesort')] = np.arange(1, data.size + 1)
    for value in np.unique(data):
        tied = data == value
        ranks[tied] = ranks[tied].mean()
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation; 0.0 when either side is constant"""
    rx, ry = _ranks(x), _ranks(y)
    if rx.size < 2 or rx.std() == 0 or ry.std() == 0:
        return 0.0
    return float(np.corrcoef(rx, ry)[0, 1])
