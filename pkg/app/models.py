from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Tuple

COLORS = ('red', 'green', 'yellow', 'blue')

# Prior-knowledge classes: I knows nothing, M knows every colour, R/G/Y/B one each
KNOWLEDGE_CLASSES = {
    'I': (),
    'M': COLORS,
    'R': ('red',),
    'G': ('green',),
    'Y': ('yellow',),
    'B': ('blue',),
}


class NodeStatus(Enum):
    """Result of one tick of one node"""
    RUNNING = 'running'
    SUCCESS = 'success'
    FAILURE = 'failure'


class NodeKind(Enum):
    """Node kinds; the value is the stringBT tag"""
    SELECTOR = 'SEL'
    SEQUENCE = 'SEQ'
    PARALLEL = 'PAR'
    DECORATOR = 'DEC'
    CONDITION = 'COND'
    ACTION = 'ACT'
    SLOT = 'SLOT'


COMPOSITE_KINDS = (NodeKind.SELECTOR, NodeKind.SEQUENCE, NodeKind.PARALLEL)
LEAF_KINDS = (NodeKind.CONDITION, NodeKind.ACTION)


class ModalityKind(Enum):
    """Knowledge-transfer modality, fixed per robot for a whole trial"""
    QRA = 'QRA'
    QRU = 'QRU'
    EU = 'EU'
    EBU = 'EBU'

    @property
    def retains(self) -> bool:
        return self is not ModalityKind.QRA

    @property
    def eavesdrops(self) -> bool:
        return self in (ModalityKind.EU, ModalityKind.EBU)


class UpdateSource(Enum):
    """Where an n_u event came from"""
    QUERY = 'Q'
    EU = 'EU'
    EBU = 'EBU'


@dataclass(frozen=True)
class BtNode:
    """Behavior-tree AST node.

    `name` holds the decorator policy, condition id or action id; slots carry
    their segment label in `label`. Nodes are immutable values so trees can be
    shared between the live tree and the stringBT form without copying.
    """
    kind: NodeKind
    name: str = ''
    params: Tuple[str, ...] = ()
    children: Tuple['BtNode', ...] = ()
    label: Optional[str] = None

    def __repr__(self):
        return f'<BtNode {self.kind.value}:{self.name or self.label or ""} children={len(self.children)}>'

    def walk(self) -> Iterator['BtNode']:
        """Pre-order traversal"""
        yield self
        for child in self.children:
            yield from child.walk()


def selector(*children: BtNode, label: str = None) -> BtNode:
    return BtNode(NodeKind.SELECTOR, children=tuple(children), label=label)


def sequence(*children: BtNode, label: str = None) -> BtNode:
    return BtNode(NodeKind.SEQUENCE, children=tuple(children), label=label)


def parallel(*children: BtNode, label: str = None) -> BtNode:
    return BtNode(NodeKind.PARALLEL, children=tuple(children), label=label)


def decorator(policy: str, child: BtNode, *params, label: str = None) -> BtNode:
    return BtNode(NodeKind.DECORATOR, name=policy, params=tuple(str(p) for p in params),
                  children=(child,), label=label)


def condition(condition_id: str, *params, label: str = None) -> BtNode:
    return BtNode(NodeKind.CONDITION, name=condition_id, params=tuple(str(p) for p in params), label=label)


def action(action_id: str, *params, label: str = None) -> BtNode:
    return BtNode(NodeKind.ACTION, name=action_id, params=tuple(str(p) for p in params), label=label)


def slot(label: str, *children: BtNode) -> BtNode:
    return BtNode(NodeKind.SLOT, children=tuple(children), label=label)


@dataclass(frozen=True)
class ConditionSequence:
    """Ordered, non-empty list of (condition-id, params); the unit of queryable knowledge"""
    items: Tuple[Tuple[str, Tuple[str, ...]], ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError('A condition sequence needs at least one condition')

    @classmethod
    def of(cls, *items) -> 'ConditionSequence':
        """Build from (id, params...) tuples, e.g. of(('target_in_range', 'red'))"""
        return cls(tuple((item[0], tuple(str(p) for p in item[1:])) for item in items))

    @classmethod
    @lru_cache(maxsize=None)
    def for_target(cls, color: str) -> 'ConditionSequence':
        return cls.of(('target_in_range', color))

    @classmethod
    def from_strings(cls, texts: List[str]) -> 'ConditionSequence':
        """Inverse of to_strings"""
        items = []
        for text in texts:
            name, _, rest = text.partition('(')
            params = tuple(p for p in rest.rstrip(')').split(',') if p)
            items.append((name, params))
        return cls(tuple(items))

    def to_nodes(self) -> List[BtNode]:
        return [condition(name, *params) for name, params in self.items]

    def to_strings(self) -> List[str]:
        return [f"{name}({','.join(params)})" for name, params in self.items]

    def colors(self) -> List[str]:
        """Target colours referenced by the sequence's parameters"""
        return [p for _, params in self.items for p in params if p in COLORS]

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __str__(self):
        return ' & '.join(self.to_strings())


@dataclass
class EavesdropMessage:
    """m_eve: an overheard response kept in a robot's message buffer"""
    sequence: ConditionSequence
    action: BtNode
    timer: int
    source_iteration: int = 0


@dataclass(frozen=True)
class Query:
    """Broadcast request for the knowledge subtree matching `sequence`"""
    sender: int
    sequence: ConditionSequence
    iteration: int

    def to_trace(self) -> Dict:
        return {
            'iter': self.iteration,
            'kind': 'query',
            'from': self.sender,
            'to': None,
            'seq': self.sequence.to_strings(),
            'payload': None
        }


@dataclass(frozen=True)
class Response:
    """Addressed reply carrying the knowledge subtree as canonical stringBT"""
    sender: int
    recipient: int
    sequence: ConditionSequence
    action_text: str
    iteration: int

    def to_trace(self) -> Dict:
        return {
            'iter': self.iteration,
            'kind': 'response',
            'from': self.sender,
            'to': self.recipient,
            'seq': self.sequence.to_strings(),
            'payload': self.action_text
        }


class TargetStatus(Enum):
    FREE = 'free'
    CARRIED = 'carried'
    COLLECTED = 'collected'


@dataclass
class Target:
    """A stationary coloured cube waiting to be carried to its zone"""
    id: int
    color: str
    x: float
    y: float
    status: TargetStatus = TargetStatus.FREE
    carried_by: Optional[int] = None
    collected_at: Optional[int] = None

    def __repr__(self):
        return f'<Target {self.id}: {self.color} {self.status.value}>'

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'color': self.color,
            'x': round(self.x, 6),
            'y': round(self.y, 6),
            'status': self.status.value,
            'carried_by': self.carried_by,
            'collected_at': self.collected_at
        }


@dataclass
class Obstacle:
    """Static disc"""
    x: float
    y: float
    radius: float


@dataclass
class RosterEntry:
    modality: ModalityKind
    knowledge: str
    count: int = 1

    def colors(self) -> Tuple[str, ...]:
        return KNOWLEDGE_CLASSES[self.knowledge]

