"""
Per-robot knowledge: the L_ks / L_ka lists, the update process that merges
new knowledge into the control tree, and the timed eavesdrop buffer.
"""

import logging
from typing import Dict, List, Optional, Tuple

from app.errors import ConfigurationError
from app.models import BtNode, ConditionSequence, EavesdropMessage
from app.services.string_bt import ControlTree, make_knowledge_subtree, merge, parse, serialize

logger = logging.getLogger(__name__)


class KnowledgeBase:
    """Index-aligned known condition sequences (L_ks) and action subtrees (L_ka)"""

    def __init__(self, known_sequences: List[ConditionSequence] = None, known_actions: List[BtNode] = None):
        self.known_sequences: List[ConditionSequence] = list(known_sequences or [])
        self.known_actions: List[BtNode] = list(known_actions or [])
        if len(self.known_sequences) != len(self.known_actions):
            raise ValueError('L_ks and L_ka must stay index-aligned')

    def __len__(self):
        return len(self.known_sequences)

    def __repr__(self):
        return f'<KnowledgeBase {len(self)} entries>'

    def knows(self, s_q: ConditionSequence) -> bool:
        return s_q in self.known_sequences

    def lookup(self, s_q: ConditionSequence) -> Optional[BtNode]:
        try:
            return self.known_actions[self.known_sequences.index(s_q)]
        except ValueError:
            return None

    def with_entry(self, s_q: ConditionSequence, action_node: BtNode) -> 'KnowledgeBase':
        return KnowledgeBase(self.known_sequences + [s_q], self.known_actions + [action_node])

    def colors(self) -> List[str]:
        """Distinct target colours this robot holds knowledge for"""
        seen: List[str] = []
        for s_q in self.known_sequences:
            for color in s_q.colors():
                if color not in seen:
                    seen.append(color)
        return seen

    def to_dict(self) -> Dict:
        return {
            'sequences': [s_q.to_strings() for s_q in self.known_sequences],
            'actions': [serialize(node) for node in self.known_actions]
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'KnowledgeBase':
        return cls([ConditionSequence.from_strings(s) for s in data['sequences']],
                   [parse(text) for text in data['actions']])


def knows(kb: KnowledgeBase, s_q: ConditionSequence) -> bool:
    return kb.knows(s_q)


def lookup(kb: KnowledgeBase, s_q: ConditionSequence) -> Optional[BtNode]:
    return kb.lookup(s_q)


def apply_update(kb: KnowledgeBase, control: ControlTree, s_q: ConditionSequence,
                 action_node: BtNode, engine=None,
                 schema=None) -> Tuple[KnowledgeBase, ControlTree, bool]:
    """Merge Sequence(s_q, action) into the NK region unless s_q is already known.

    When an engine is given the action subtree is validated against its
    registry first; an invalid subtree is rejected with no state change.
    """
    if kb.knows(s_q):
        return kb, control, False

    if engine is not None:
        try:
            engine.validate(action_node, schema)
        except ConfigurationError as e:
            logger.warning(f"Rejected knowledge subtree for {s_q}: {e}")
            return kb, control, False

    updated = merge(control, make_knowledge_subtree(s_q, action_node))
    return kb.with_entry(s_q, action_node), updated, True


class MessageBuffer:
    """L_buffer: overheard messages that expire after their timer runs out"""

    def __init__(self, capacity: Optional[int] = None):
        self.capacity = capacity
        self.messages: List[EavesdropMessage] = []

    def __len__(self):
        return len(self.messages)

    def __repr__(self):
        return f'<MessageBuffer {len(self.messages)}/{self.capacity or "inf"}>'

    def add(self, message: EavesdropMessage) -> 'MessageBuffer':
        """Append, refreshing the timer instead when the sequence is already buffered"""
        if message.timer <= 0:
            raise ValueError('buffered messages need a positive timer')

        for existing in self.messages:
            if existing.sequence == message.sequence:
                existing.timer = message.timer
                return self

        self.messages.append(message)
        if self.capacity is not None and len(self.messages) > self.capacity:
            victim = min(self.messages, key=lambda m: m.timer)
            self.messages.remove(victim)
            logger.debug(f"Buffer full, evicted {victim.sequence} (timer {victim.timer})")
        return self

    def tick(self) -> 'MessageBuffer':
        """One iteration passes: decrement every timer and drop the expired ones"""
        for message in self.messages:
            message.timer -= 1
        self.messages = [m for m in self.messages if m.timer > 0]
        return self

    def take(self, s_q: ConditionSequence) -> Optional[EavesdropMessage]:
        """Remove and return the entry for s_q, if any"""
        for index, message in enumerate(self.messages):
            if message.sequence == s_q:
                return self.messages.pop(index)
        return None

    def clear(self):
        self.messages = []
