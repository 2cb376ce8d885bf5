"""
Scripted, fully connected micro-scenarios with exact expected counters.

Robot 0 (or the named responder) is the only one with prior knowledge; the
others face one colour at scheduled iterations.
"""

from typing import Dict, Optional

from app.services.metrics import MetricsLedger
from app.services.sar_world import ScriptedWorld

COLOR = 'red'
SPACING = 10


def repeated_occurrences(modality: str, robots: int = 3, occurrences: int = 10,
                         color: str = COLOR) -> ScriptedWorld:
    """Every ignorant robot faces `color` `occurrences` times, SPACING iterations apart.

    QRA robots query on every occurrence; retaining modalities query once.
    """
    roster = [(modality, 'M')] + [(modality, 'I')] * (robots - 1)
    schedule = {
        rid: {SPACING * (k + 1) + rid: color for k in range(occurrences)}
        for rid in range(1, robots)
    }
    return ScriptedWorld.create(roster, schedule)


def propagation(group_size: int, color: str = COLOR) -> ScriptedWorld:
    """One knowledgeable QRU robot; each other robot faces `color` twice"""
    roster = [('QRU', 'M')] + [('QRU', 'I')] * (group_size - 1)
    schedule = {
        rid: {SPACING * rid: color, SPACING * (group_size + rid): color}
        for rid in range(1, group_size)
    }
    return ScriptedWorld.create(roster, schedule)


def overheard_exchange(observer_faces_at: Optional[int] = None, t_m: int = 5000,
                       color: str = COLOR) -> ScriptedWorld:
    """u (0) queries, v (1) answers, w1 (2, EU) and w2 (3, EBU) overhear.

    With `observer_faces_at` set, w2 meets `color` at that iteration.
    """
    roster = [('QRU', 'I'), ('QRU', 'M'), ('EU', 'I'), ('EBU', 'I')]
    schedule: Dict[int, Dict[int, str]] = {0: {5: color}}
    if observer_faces_at is not None:
        schedule[3] = {observer_faces_at: color}
    return ScriptedWorld.create(roster, schedule, t_m=t_m)


def horizon(world: ScriptedWorld) -> int:
    """Enough iterations for the last scheduled occurrence to be answered"""
    last = max((it for events in world.schedule.values() for it in events), default=0)
    return last + SPACING


def run(world: ScriptedWorld) -> MetricsLedger:
    return world.run(horizon(world))
