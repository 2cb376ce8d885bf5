import pytest
from hypothesis import given, settings, strategies as st

from app.errors import ConfigurationError, GrammarError
from app.models import (
    ConditionSequence, NodeKind, action, condition, decorator, parallel, selector, sequence, slot
)
from app.services.sar_nodes import critical_segment, fallback_segment, pause_segment, target_action
from app.services.string_bt import (
    ControlTree, compile_tree, make_knowledge_subtree, merge, parse, serialize
)

ids = st.from_regex(r'[a-z][a-z0-9_]{0,8}', fullmatch=True)
params = st.lists(st.from_regex(r'[A-Za-z0-9_.+\-]{1,6}', fullmatch=True), max_size=3)
labels = st.one_of(st.none(), st.from_regex(r'[A-Z][A-Z0-9_]{0,3}', fullmatch=True))


def _leaves():
    return st.one_of(
        st.builds(lambda i, p, l: condition(i, *p, label=l), ids, params, labels),
        st.builds(lambda i, p, l: action(i, *p, label=l), ids, params, labels),
    )


def _extend(children):
    many = st.lists(children, max_size=4)
    return st.one_of(
        st.builds(lambda c, l: selector(*c, label=l), many, labels),
        st.builds(lambda c, l: sequence(*c, label=l), many, labels),
        st.builds(lambda c, l: parallel(*c, label=l), many, labels),
        st.builds(lambda p, c, ps, l: decorator(p, c, *ps, label=l),
                  st.sampled_from(['invert', 'cooldown']), children, params, labels),
        st.builds(lambda l, c: slot(l, *c), st.from_regex(r'[A-Z]{1,3}', fullmatch=True), many),
    )


trees = st.recursive(_leaves(), _extend, max_leaves=25)


@given(trees)
def test_round_trip(tree):
    assert parse(serialize(tree)) == tree


@pytest.mark.slow
@settings(max_examples=10_000, deadline=None)
@given(trees)
def test_round_trip_fuzz(tree):
    text = serialize(tree)
    assert parse(text) == tree
    assert serialize(parse(text)) == text


def test_parse_selector_with_three_children():
    tree = parse('SEL[ SEQ[ COND:carrying(red) ACT:goto_zone(red) ] SLOT:NK ACT:random_walk() ]')
    assert tree.kind is NodeKind.SELECTOR
    assert [c.kind for c in tree.children] == [NodeKind.SEQUENCE, NodeKind.SLOT, NodeKind.ACTION]
    assert tree.children[0].children[0].params == ('red',)
    assert tree.children[1].label == 'NK'


def test_empty_sequence_parses_and_succeeds(toy_engine, toy_bb):
    tree = parse('SEQ[ ]')
    assert tree.children == ()
    assert toy_engine.tick(tree, toy_bb).name == 'SUCCESS'


def test_canonical_whitespace():
    assert serialize(parse('SEL[\n  SEQ[COND:a()   ACT:b(x,y)]\n]')) == 'SEL[ SEQ[ COND:a() ACT:b(x,y) ] ]'
    assert serialize(selector()) == 'SEL[ ]'


def test_labels_survive():
    text = 'SEL[ SEQ@C[ COND:collision_detected() ] SLOT:NK ACT:random_walk()@F ]'
    tree = parse(text)
    assert tree.children[0].label == 'C'
    assert tree.children[2].label == 'F'
    assert serialize(tree) == text


@pytest.mark.parametrize('text, fragment', [
    ('DEC:invert[ COND:x() COND:y() ]', 'exactly one child'),
    ('FOO[ ]', 'unknown node tag'),
    ('SEQ[ COND:x() ', "missing ']'"),
    ('COND:x()[ ACT:y() ]', 'cannot have children'),
    ('ACT:y(a b)', 'malformed'),
    ('SEL[ ] SEL[ ]', 'trailing'),
    ('', 'empty'),
])
def test_grammar_errors(text, fragment):
    with pytest.raises(GrammarError) as excinfo:
        parse(text)
    assert fragment in str(excinfo.value)


def test_grammar_error_position():
    with pytest.raises(GrammarError) as excinfo:
        parse('SEL[\n  SEQ[ ]\n  BAD:x() ]')
    assert (excinfo.value.line, excinfo.value.column) == (3, 3)


def test_knowledge_subtree_shape():
    s_q = ConditionSequence.of(('target_in_range', 'red'), ('carrying',))
    t_k = make_knowledge_subtree(s_q, target_action('red'))
    assert t_k.kind is NodeKind.SEQUENCE
    assert len(t_k.children) == 3
    assert serialize(t_k).startswith('SEQ[ COND:target_in_range(red) COND:carrying() SEQ[ ACT:pick_target(red)')


def test_knowledge_subtree_needs_conditions():
    with pytest.raises(ValueError):
        make_knowledge_subtree([], target_action('red'))


def test_merge_appends_to_nk_only():
    control = ControlTree.build(critical_segment(), fallback_segment(), common=[pause_segment()])
    t_k1 = make_knowledge_subtree(ConditionSequence.for_target('red'), target_action('red'))
    t_k2 = make_knowledge_subtree(ConditionSequence.for_target('blue'), target_action('blue'))

    merged = merge(merge(control, t_k1), t_k2)

    assert merged.nk_region.children == (t_k1, t_k2)
    for label in ('C', 'CK', 'F'):
        assert [serialize(n) for n in merged.segment(label)] == [serialize(n) for n in control.segment(label)]
    assert control.nk_region.children == ()


def test_control_tree_segment_order_is_enforced():
    with pytest.raises(ConfigurationError):
        ControlTree.from_text('SEL[ SLOT:NK SEQ@C[ ] ACT:random_walk()@F ]')
    with pytest.raises(ConfigurationError):
        ControlTree.from_text('SEQ[ SEQ@C[ ] SLOT:NK ACT:random_walk()@F ]')


def test_control_tree_text_round_trips(control):
    assert ControlTree.from_text(control.text) == control


def test_compile_tree_validates_ids(engine, schema):
    compile_tree('SEQ[ COND:target_in_range(red) ACT:pick_target(red) ]', engine, schema)
    with pytest.raises(ConfigurationError):
        compile_tree('SEQ[ COND:teleport_ready() ]', engine, schema)


def test_transient_runs_just_before_fallback(engine, bb, control):
    bb.update({'detected_target': 'red', 'detected_target_id': 3, 'carrying': None})
    transient = make_knowledge_subtree(ConditionSequence.for_target('red'), target_action('red'))
    status, handled = control.tick(engine, bb, transient)
    assert (status.name, handled) == ('RUNNING', 'transient')
    assert bb.get('pick_request') == 3
