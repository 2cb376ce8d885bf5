"""
stringBT: the textual form of behavior trees used for storage, transmission and merging.

Grammar (children whitespace-separated inside brackets):

    SEL[ ... ]  SEQ[ ... ]  PAR[ ... ]          composites, optional @LABEL before '['
    DEC:<policy>(<params>)[ child ]             decorator, params optional, exactly one child
    COND:<id>(<p1>,<p2>)  ACT:<id>(<params>)    leaves, optional @LABEL suffix
    SLOT:<label>  SLOT:<label>[ ... ]           placeholder region, children after merges

Example: SEL[ SEQ@C[ COND:carrying(red) ACT:goto_zone(red) ] SLOT:NK ACT:random_walk()@F ]
"""

import bisect
import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence as Seq, Tuple, Union

from app.errors import GrammarError, ConfigurationError
from app.models import (
    BtNode, ConditionSequence, NodeKind, NodeStatus, COMPOSITE_KINDS,
    selector, sequence, slot
)

logger = logging.getLogger(__name__)

TOKEN_RE = re.compile(r'\[|\]|[^\s\[\]]+')
WORD_RE = re.compile(
    r'^(?P<tag>[A-Z]+)'
    r'(?::(?P<name>[A-Za-z0-9_]+))?'
    r'(?:\((?P<params>[^()]*)\))?'
    r'(?:@(?P<label>[A-Za-z0-9_]+))?$'
)
PARAM_RE = re.compile(r'^[A-Za-z0-9_.+\-]+$')

TAGS = {kind.value: kind for kind in NodeKind}

# Segment labels under the control tree's root selector
CRITICAL, COMMON, PRIOR, NEW, FALLBACK = 'C', 'CK', 'PK', 'NK', 'F'
SEGMENT_ORDER = re.compile(r'^C (CK )*(PK )*NK F$')


class _Parser:
    """Recursive-descent parser over bracket/word tokens"""

    def __init__(self, text: str):
        self.text = text
        self.tokens = [(m.group(0), m.start()) for m in TOKEN_RE.finditer(text)]
        self.pos = 0
        self._line_starts = [0] + [i + 1 for i, ch in enumerate(text) if ch == '\n']

    def _where(self, offset: int) -> Tuple[int, int]:
        line = bisect.bisect_right(self._line_starts, offset)
        return line, offset - self._line_starts[line - 1] + 1

    def error(self, message: str, offset: Optional[int] = None) -> GrammarError:
        if offset is None:
            offset = self.tokens[self.pos][1] if self.pos < len(self.tokens) else len(self.text)
        line, column = self._where(offset)
        return GrammarError(message, line, column)

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def parse(self) -> BtNode:
        if not self.tokens:
            raise self.error('empty stringBT')
        node = self.parse_node()
        if self.pos != len(self.tokens):
            raise self.error('unexpected trailing input')
        return node

    def parse_node(self) -> BtNode:
        token = self.peek()
        if token is None:
            raise self.error('unexpected end of input')
        if token in ('[', ']'):
            raise self.error(f"unexpected '{token}'")
        offset = self.tokens[self.pos][1]
        self.pos += 1

        match = WORD_RE.match(token)
        if not match:
            raise self.error(f'malformed node {token!r}', offset)
        tag, name, params_text, label = match.group('tag', 'name', 'params', 'label')
        kind = TAGS.get(tag)
        if kind is None:
            raise self.error(f'unknown node tag {tag!r}', offset)

        params = self._params(params_text, offset)

        if kind in COMPOSITE_KINDS:
            if name is not None or params_text is not None:
                raise self.error(f'{tag} takes no id or parameters', offset)
            children = self._children(required=True, offset=offset)
            return BtNode(kind, children=children, label=label)

        if kind is NodeKind.DECORATOR:
            if name is None:
                raise self.error('decorator needs a policy', offset)
            children = self._children(required=True, offset=offset)
            if len(children) != 1:
                raise self.error(f'decorator {name!r} needs exactly one child, got {len(children)}', offset)
            return BtNode(kind, name=name, params=params, children=children, label=label)

        if kind is NodeKind.SLOT:
            if name is None or params_text is not None or label is not None:
                raise self.error('slot is written SLOT:<label>', offset)
            children = self._children(required=False, offset=offset)
            return BtNode(kind, children=children, label=name)

        if name is None or params_text is None:
            raise self.error(f'{tag} is written {tag}:<id>(<params>)', offset)
        if self.peek() == '[':
            raise self.error(f'{tag} node cannot have children', offset)
        return BtNode(kind, name=name, params=params, label=label)

    def _params(self, params_text: Optional[str], offset: int) -> Tuple[str, ...]:
        if not params_text:
            return ()
        params = tuple(params_text.split(','))
        for param in params:
            if not PARAM_RE.match(param):
                raise self.error(f'malformed parameter {param!r}', offset)
        return params

    def _children(self, required: bool, offset: int) -> Tuple[BtNode, ...]:
        if self.peek() != '[':
            if required:
                raise self.error("expected '['", offset)
            return ()
        self.pos += 1
        children: List[BtNode] = []
        while self.peek() != ']':
            if self.peek() is None:
                raise self.error("missing ']'")
            children.append(self.parse_node())
        self.pos += 1
        return tuple(children)


def parse(text: str) -> BtNode:
    """Parse stringBT text into a tree; raises GrammarError with line/column"""
    return _Parser(text).parse()


@lru_cache(maxsize=8192)
def serialize(node: BtNode) -> str:
    """Canonical stringBT: single spaces, parameters in their positional order"""
    suffix = f'@{node.label}' if node.label is not None else ''
    params = ','.join(node.params)

    if node.kind in COMPOSITE_KINDS:
        return f'{node.kind.value}{suffix}{_bracket(node.children)}'
    if node.kind is NodeKind.DECORATOR:
        args = f'({params})' if node.params else ''
        return f'DEC:{node.name}{args}{suffix}{_bracket(node.children)}'
    if node.kind is NodeKind.SLOT:
        body = _bracket(node.children) if node.children else ''
        return f'SLOT:{node.label}{body}'
    return f'{node.kind.value}:{node.name}({params}){suffix}'


def _bracket(children: Iterable[BtNode]) -> str:
    inner = ' '.join(serialize(child) for child in children)
    return f'[ {inner} ]' if inner else '[ ]'


def make_knowledge_subtree(s_q: Union[ConditionSequence, Seq], action_node: BtNode) -> BtNode:
    """T_k = Sequence(s_q conditions..., T_ka*)"""
    if not s_q:
        raise ValueError('an unguarded knowledge subtree would shadow the fallback')
    if not isinstance(s_q, ConditionSequence):
        s_q = ConditionSequence.of(*s_q)
    return sequence(*s_q.to_nodes(), action_node)


def compile_tree(text: str, engine, schema: Optional[Iterable[str]] = None) -> BtNode:
    """Parse and validate against the engine's registry ("compile" to a live tree)"""
    root = parse(text)
    engine.validate(root, schema)
    return root


@dataclass(frozen=True)
class ControlTree:
    """T_Control = Selector(T_C, T_CK..., T_PK..., Slot(NK), T_F)"""
    root: BtNode

    def __post_init__(self):
        if self.root.kind is not NodeKind.SELECTOR:
            raise ConfigurationError('control tree root must be a selector')
        labels = ' '.join(self._label(child) for child in self.root.children)
        if not SEGMENT_ORDER.match(labels):
            raise ConfigurationError(f'segments out of order: {labels!r}')

    @staticmethod
    def _label(node: BtNode) -> str:
        return node.label or '?'

    @classmethod
    def build(cls, critical: BtNode, fallback: BtNode, common: Seq[BtNode] = (),
              prior: Seq[BtNode] = (), new: Seq[BtNode] = ()) -> 'ControlTree':
        """Assemble a control tree, stamping segment labels on each subtree"""
        children = [_with_label(critical, CRITICAL)]
        children += [_with_label(node, COMMON) for node in common]
        children += [_with_label(node, PRIOR) for node in prior]
        children.append(slot(NEW, *new))
        children.append(_with_label(fallback, FALLBACK))
        return cls(selector(*children))

    @classmethod
    def from_text(cls, text: str) -> 'ControlTree':
        return cls(parse(text))

    @property
    def text(self) -> str:
        return serialize(self.root)

    @property
    def nk_region(self) -> BtNode:
        return next(child for child in self.root.children if child.kind is NodeKind.SLOT)

    def segment(self, label: str) -> List[BtNode]:
        return [child for child in self.root.children if child.label == label]

    def tick(self, engine, bb, transient: Optional[BtNode] = None) -> Tuple[NodeStatus, Optional[str]]:
        """Tick the root selector, reporting which segment handled the tick.

        `transient` is a received-but-not-merged subtree ticked just before the
        fallback segment.
        """
        for child in self.root.children:
            if transient is not None and child.label == FALLBACK:
                status = engine.tick(transient, bb)
                if status is not NodeStatus.FAILURE:
                    return status, 'transient'
            status = engine.tick(child, bb)
            if status is not NodeStatus.FAILURE:
                return status, child.label
        return NodeStatus.FAILURE, None


def _with_label(node: BtNode, label: str) -> BtNode:
    if node.label == label:
        return node
    return BtNode(node.kind, node.name, node.params, node.children, label)


def merge(control: ControlTree, t_k: BtNode) -> ControlTree:
    """Append t_k as the last child of the NK region; every other segment is untouched"""
    children = tuple(
        slot(child.label, *child.children, t_k) if child.kind is NodeKind.SLOT else child
        for child in control.root.children
    )
    return ControlTree(BtNode(control.root.kind, control.root.name, control.root.params,
                              children, control.root.label))
