"""
Behavior-tree tick engine, node registry and the per-robot blackboard.

Node semantics:
    Selector   first non-Failure child wins (left to right)
    Sequence   first non-Success child wins (left to right)
    Parallel   every child ticked once, always Success
    Decorator  `invert` or `cooldown(k)` over its single child
    Condition  Success iff the registered predicate holds, never Running
    Action     registered routine; Running while in progress
    Slot       selector over merged children, Failure while empty
"""

import logging
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, Optional, Set, Tuple

from app.errors import ConfigurationError
from app.models import BtNode, NodeKind, NodeStatus, COMPOSITE_KINDS, LEAF_KINDS

logger = logging.getLogger(__name__)

ConditionFn = Callable[['Blackboard', Tuple[str, ...]], bool]
ActionFn = Callable[['Blackboard', Tuple[str, ...]], NodeStatus]

DECORATOR_POLICIES = ('invert', 'cooldown')

# Keys starting with this prefix hold engine/action progress state and bypass the schema
RESERVED_PREFIX = '_'


class Blackboard:
    """Key/value state manager for one robot.

    Reads of keys that were never written are configuration errors: a
    condition reading a missing key means the tree and the sensor layer
    disagree about the schema.
    """

    def __init__(self, schema: Iterable[str] = (), values: Dict[str, Any] = None):
        self.schema = frozenset(schema)
        self._data: Dict[str, Any] = {}
        self._timers: Set[str] = set()
        for key, value in (values or {}).items():
            self.set(key, value)

    def get(self, key: str) -> Any:
        try:
            return self._data[key]
        except KeyError:
            raise ConfigurationError('missing blackboard key', path=key) from None

    def get_reserved(self, key: str, default: Any = None) -> Any:
        return self._data.get(key, default)

    def set(self, key: str, value: Any):
        if self.schema and key not in self.schema and not key.startswith(RESERVED_PREFIX):
            raise ConfigurationError('key not in blackboard schema', path=key)
        self._data[key] = value

    def update(self, values: Dict[str, Any]):
        for key, value in values.items():
            self.set(key, value)

    def start_timer(self, key: str, iterations: int):
        """Reserved countdown that tick_timers decrements once per robot iteration"""
        self.set(key, iterations)
        self._timers.add(key)

    def tick_timers(self):
        for key in tuple(self._timers):
            remaining = self._data[key] - 1
            if remaining > 0:
                self._data[key] = remaining
            else:
                del self._data[key]
                self._timers.discard(key)

    def snapshot(self) -> Dict[str, Any]:
        return dict(self._data)

    def __repr__(self):
        return f'<Blackboard {len(self._data)} keys>'


class NodeRegistry:
    """Condition and action routines addressable by id from stringBT"""

    def __init__(self):
        self.conditions: Dict[str, Tuple[ConditionFn, Tuple[str, ...]]] = {}
        self.actions: Dict[str, ActionFn] = {}

    def condition(self, condition_id: str, reads: Iterable[str] = ()):
        """Decorator registering a condition predicate and the blackboard keys it reads"""
        def register(fn: ConditionFn) -> ConditionFn:
            self.conditions[condition_id] = (fn, tuple(reads))
            return fn
        return register

    def action(self, action_id: str):
        """Decorator registering an action routine"""
        def register(fn: ActionFn) -> ActionFn:
            self.actions[action_id] = fn
            return fn
        return register

    def condition_reads(self, condition_id: str) -> Tuple[str, ...]:
        return self.conditions[condition_id][1]


class TreeEngine:
    """Ticks trees against a blackboard using the routines of a NodeRegistry"""

    def __init__(self, registry: NodeRegistry):
        self.registry = registry

    def tick(self, node: BtNode, bb: Blackboard) -> NodeStatus:
        kind = node.kind

        if kind is NodeKind.SELECTOR or kind is NodeKind.SLOT:
            for child in node.children:
                status = self.tick(child, bb)
                if status is not NodeStatus.FAILURE:
                    return status
            return NodeStatus.FAILURE

        if kind is NodeKind.SEQUENCE:
            for child in node.children:
                status = self.tick(child, bb)
                if status is not NodeStatus.SUCCESS:
                    return status
            return NodeStatus.SUCCESS

        if kind is NodeKind.PARALLEL:
            for child in node.children:
                self.tick(child, bb)
            return NodeStatus.SUCCESS

        if kind is NodeKind.DECORATOR:
            return self._tick_decorator(node, bb)

        if kind is NodeKind.CONDITION:
            if self.evaluate_condition(node.name, node.params, bb):
                return NodeStatus.SUCCESS
            return NodeStatus.FAILURE

        return self.execute_action(node.name, node.params, bb)

    def evaluate_condition(self, condition_id: str, params: Tuple[str, ...], bb: Blackboard) -> bool:
        entry = self.registry.conditions.get(condition_id)
        if entry is None:
            raise ConfigurationError('unknown condition id', path=condition_id)
        return bool(entry[0](bb, params))

    def execute_action(self, action_id: str, params: Tuple[str, ...], bb: Blackboard) -> NodeStatus:
        fn = self.registry.actions.get(action_id)
        if fn is None:
            raise ConfigurationError('unknown action id', path=action_id)
        return fn(bb, params)

    def _tick_decorator(self, node: BtNode, bb: Blackboard) -> NodeStatus:
        child = node.children[0]

        if node.name == 'invert':
            status = self.tick(child, bb)
            if status is NodeStatus.SUCCESS:
                return NodeStatus.FAILURE
            if status is NodeStatus.FAILURE:
                return NodeStatus.SUCCESS
            return status

        if node.name == 'cooldown':
            key = cooldown_key(child)
            if bb.get_reserved(key, 0) > 0:
                return NodeStatus.FAILURE
            status = self.tick(child, bb)
            period = int(node.params[0]) if node.params else 0
            if status is NodeStatus.SUCCESS and period > 0:
                bb.start_timer(key, period)
            return status

        raise ConfigurationError('unknown decorator policy', path=node.name)

    def validate(self, root: BtNode, schema: Optional[Iterable[str]] = None):
        """Structural and registry validation; raises ConfigurationError on the first problem"""
        schema = frozenset(schema) if schema is not None else None
        for node in root.walk():
            if node.kind in LEAF_KINDS and node.children:
                raise ConfigurationError('leaf node with children', path=node.name)
            if node.kind is NodeKind.DECORATOR:
                if len(node.children) != 1:
                    raise ConfigurationError('decorator needs exactly one child', path=node.name)
                if node.name not in DECORATOR_POLICIES:
                    raise ConfigurationError('unknown decorator policy', path=node.name)
            if node.kind is NodeKind.CONDITION:
                if node.name not in self.registry.conditions:
                    raise ConfigurationError('unknown condition id', path=node.name)
                if schema is not None:
                    missing = [k for k in self.registry.condition_reads(node.name) if k not in schema]
                    if missing:
                        raise ConfigurationError(f'reads keys outside the schema: {missing}', path=node.name)
            if node.kind is NodeKind.ACTION and node.name not in self.registry.actions:
                raise ConfigurationError('unknown action id', path=node.name)
            if node.kind not in COMPOSITE_KINDS + LEAF_KINDS + (NodeKind.DECORATOR, NodeKind.SLOT):
                raise ConfigurationError('unknown node kind', path=str(node.kind))


@lru_cache(maxsize=256)
def cooldown_key(child: BtNode) -> str:
    """Reserved key holding a cooldown decorator's remaining iterations.

    Derived from the child's canonical text so the timer survives the tree
    being recompiled after a merge. The owner of the blackboard advances it
    with `Blackboard.tick_timers` once per iteration; the decorator only
    reads and restarts it.
    """
    from app.services.string_bt import serialize
    return f'{RESERVED_PREFIX}cooldown:{serialize(child)}'
