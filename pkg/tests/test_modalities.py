import pytest

from app.models import ConditionSequence, ModalityKind, Query, Response
from app.services import scenarios
from app.services.sar_world import ScriptedWorld
from app.services.string_bt import serialize
from app.services.sar_nodes import target_action

RED = ConditionSequence.for_target('red')


@pytest.fixture
def pair():
    """Robot 0 knows everything, robot 1 nothing; both QRU"""
    return ScriptedWorld.create([('QRU', 'M'), ('QRU', 'I')], {})


def _respond(world, sequence=RED, text=None):
    responder, asker = world.robots
    return Response(responder.id, asker.id, sequence,
                    text or serialize(target_action('red')), world.iteration)


# Query posting and answering

def test_query_posted_from_tick_request(pair):
    robot = pair.robots[1]
    robot.bb.set('query_request', RED)
    query = pair.exchange.maybe_post_query(robot, 4)
    assert query == Query(1, RED, 4)
    assert robot.awaiting == RED
    assert robot.wait_remaining == pair.cfg.query_wait
    assert robot.bb.get('awaiting_response')
    assert pair.ledger.queries == 1


def test_no_query_while_waiting(pair):
    robot = pair.robots[1]
    robot.awaiting = RED
    robot.bb.set('query_request', RED)
    assert pair.exchange.maybe_post_query(robot, 4) is None
    assert pair.ledger.queries == 0


def test_only_knowers_respond(pair):
    knower, ignorant = pair.robots
    query = Query(ignorant.id, RED, 1)
    response = pair.exchange.maybe_respond(knower, query, 1)
    assert response.action_text == serialize(target_action('red'))
    assert pair.exchange.maybe_respond(ignorant, Query(knower.id, RED, 1), 1) is None
    assert pair.exchange.maybe_respond(knower, Query(knower.id, RED, 1), 1) is None


def test_lowest_id_knower_answers():
    world = ScriptedWorld.create([('QRU', 'I'), ('QRU', 'M'), ('QRU', 'R')], {})
    responses = world.exchange.deliver_queries(world.robots, [Query(0, RED, 1)], 1, world.connected)
    assert [r.sender for r in responses] == [1]


# Response handling

def test_qru_response_merges(pair):
    asker = pair.robots[1]
    asker.awaiting = RED
    assert pair.exchange.on_response(asker, _respond(pair), 2)
    assert asker.kb.knows(RED)
    assert asker.awaiting is None
    assert pair.ledger.counters() == {'queries': 0, 'effective': 1, 'Q': 1, 'EU': 0, 'EBU': 0}


def test_qra_response_is_executed_not_merged():
    world = ScriptedWorld.create([('QRA', 'M'), ('QRA', 'I')], {})
    asker = world.robots[1]
    asker.awaiting = RED
    assert world.exchange.on_response(asker, _respond(world), 2)
    assert not asker.kb.knows(RED)
    assert asker.transient is not None
    assert asker.motion_state == 'transient-action'
    assert world.ledger.total_updates == 0


def test_unsolicited_or_late_responses_are_ignored(pair):
    asker = pair.robots[1]
    assert not pair.exchange.on_response(asker, _respond(pair), 2)
    asker.awaiting = ConditionSequence.for_target('blue')
    assert not pair.exchange.on_response(asker, _respond(pair), 2)
    assert pair.ledger.effective == 0


def test_malformed_payload_keeps_waiting(pair):
    asker = pair.robots[1]
    asker.awaiting = RED
    assert not pair.exchange.on_response(asker, _respond(pair, text='SEQ[ ACT:teleport() ]'), 2)
    assert not pair.exchange.on_response(asker, _respond(pair, text='SEQ[ ACT:'), 2)
    assert asker.awaiting == RED
    assert not asker.kb.knows(RED)


# Eavesdropping

def test_interception_needs_range_to_both_ends():
    world = ScriptedWorld.create([('QRU', 'I'), ('QRU', 'M'), ('EU', 'I')], {})
    u, v, w = world.robots
    response = Response(v.id, u.id, RED, serialize(target_action('red')), 1)

    def reaches_sender_only(a, b):
        return {a.id, b.id} != {w.id, u.id}

    assert world.exchange.intercept(w, response, v, u, reaches_sender_only) is None
    message = world.exchange.intercept(w, response, v, u, world.connected)
    assert message.sequence == RED
    assert message.timer == world.cfg.t_m


def test_qru_robots_do_not_eavesdrop():
    world = ScriptedWorld.create([('QRU', 'I'), ('QRU', 'M'), ('QRU', 'I')], {})
    u, v, w = world.robots
    response = Response(v.id, u.id, RED, serialize(target_action('red')), 1)
    assert world.exchange.intercept(w, response, v, u, world.connected) is None


def test_eu_process_merges_and_clears():
    world = ScriptedWorld.create([('EU', 'I')], {})
    robot = world.robots[0]
    response = Response(5, 6, RED, serialize(target_action('red')), 1)
    robot.buffer.add(world.exchange.intercept(robot, response, robot, robot, world.connected))
    assert world.exchange.eu_process(robot, 2).name == 'SUCCESS'
    assert robot.kb.knows(RED)
    assert len(robot.buffer) == 0
    assert world.exchange.eu_process(robot, 3).name == 'FAILURE'


def test_ebu_process_takes_only_what_is_needed():
    world = ScriptedWorld.create([('EBU', 'I')], {})
    robot = world.robots[0]
    response = Response(5, 6, RED, serialize(target_action('red')), 1)
    robot.buffer.add(world.exchange.intercept(robot, response, robot, robot, world.connected))
    blue = ConditionSequence.for_target('blue')
    assert world.exchange.ebu_process(robot, blue, 2).name == 'FAILURE'
    assert world.exchange.ebu_process(robot, RED, 2).name == 'SUCCESS'
    assert robot.kb.knows(RED)
    assert len(robot.buffer) == 0
    assert world.ledger.counters()['EBU'] == 1


# Scripted scenarios with exact counters

@pytest.mark.parametrize('robots', [2, 3, 5])
def test_qra_queries_every_occurrence(robots):
    ledger = scenarios.run(scenarios.repeated_occurrences('QRA', robots=robots, occurrences=10))
    assert ledger.queries == 10 * (robots - 1)
    assert ledger.effective == ledger.queries
    assert ledger.total_updates == 0


@pytest.mark.parametrize('modality', ['QRU', 'EU', 'EBU'])
def test_retaining_modalities_query_once_per_robot(modality):
    ledger = scenarios.run(scenarios.repeated_occurrences(modality, robots=3, occurrences=10))
    assert ledger.queries <= 2
    assert all(level == 1 for rid, level in ledger.final_knowledge.items() if rid != 0)


def test_qru_queries_once_per_robot():
    ledger = scenarios.run(scenarios.repeated_occurrences('QRU', robots=3, occurrences=10))
    assert ledger.queries == 2
    assert ledger.per_robot[1]['queries'] == ledger.per_robot[2]['queries'] == 1


@pytest.mark.parametrize('size', [3, 5, 8])
def test_knowledge_reaches_group_after_p_minus_one_queries(size):
    ledger = scenarios.run(scenarios.propagation(size))
    assert ledger.queries == size - 1
    assert ledger.counters()['Q'] == size - 1
    assert all(level >= 1 for level in ledger.final_knowledge.values())


def test_bystanders_eu_merges_ebu_does_not():
    ledger = scenarios.run(scenarios.overheard_exchange())
    w1, w2 = ledger.per_robot[2], ledger.per_robot[3]
    assert (w1['EU'], w1['queries']) == (1, 0)
    assert (w2['EBU'], w2['queries']) == (0, 0)
    assert ledger.per_robot[0]['Q'] == 1


def test_ebu_bystander_merges_when_it_meets_the_condition():
    ledger = scenarios.run(scenarios.overheard_exchange(observer_faces_at=30))
    w2 = ledger.per_robot[3]
    assert (w2['EBU'], w2['queries']) == (1, 0)


def test_short_buffer_forces_a_query():
    ledger = scenarios.run(scenarios.overheard_exchange(observer_faces_at=30, t_m=1))
    w2 = ledger.per_robot[3]
    assert (w2['EBU'], w2['Q'], w2['queries']) == (0, 1, 1)


def test_trace_records_query_then_response():
    records = []
    world = scenarios.overheard_exchange()
    world.exchange.trace = records.append
    scenarios.run(world)
    assert [(r['kind'], r['from'], r['to']) for r in records] == [('query', 0, None), ('response', 1, 0)]
    assert records[0]['seq'] == ['target_in_range(red)']
    assert records[1]['payload'].startswith('SEQ[ ACT:pick_target(red)')


def test_modality_flags():
    assert not ModalityKind.QRA.retains and ModalityKind.QRU.retains
    assert ModalityKind.EU.eavesdrops and ModalityKind.EBU.eavesdrops
    assert not ModalityKind.QRU.eavesdrops


@pytest.mark.parametrize('cooldown, faces, expected', [
    (0, (10, 50, 400), 3),
    (100, (10, 50, 400), 2),
    (100, (10, 50, 400, 401, 402), 2),
])
def test_query_cooldown_counts_iterations_not_encounters(cooldown, faces, expected):
    schedule = {1: {it: 'red' for it in faces}}
    world = ScriptedWorld.create([('QRA', 'M'), ('QRA', 'I')], schedule, query_cooldown=cooldown)
    ledger = world.run(410)
    assert ledger.per_robot[1]['queries'] == expected
    assert ledger.effective == ledger.queries


# Knowledge arriving while a query is open

@pytest.mark.parametrize('modality', ['EU', 'EBU'])
def test_overheard_merge_ends_query_wait(modality):
    world = ScriptedWorld.create([(modality, 'I')], {})
    robot = world.robots[0]
    robot.awaiting = RED
    robot.wait_remaining = world.cfg.query_wait
    robot.bb.set('awaiting_response', True)
    response = Response(5, 6, RED, serialize(target_action('red')), 1)
    robot.buffer.add(world.exchange.intercept(robot, response, robot, robot, world.connected))
    if modality == 'EU':
        world.exchange.eu_process(robot, 2)
    else:
        world.exchange.ebu_process(robot, RED, 2)
    assert robot.kb.knows(RED)
    assert robot.awaiting is None
    assert robot.wait_remaining == 0
    assert not robot.bb.get('awaiting_response')


def test_open_query_is_heard_again_without_being_counted(pair):
    knower, asker = pair.robots
    asker.awaiting = RED
    fresh = Query(knower.id, ConditionSequence.for_target('blue'), 3)
    assert pair.exchange.open_queries(pair.robots, [], 3) == [Query(asker.id, RED, 3)]
    assert pair.exchange.open_queries(pair.robots, [Query(asker.id, RED, 3)], 3) == []
    assert pair.exchange.open_queries(pair.robots, [fresh], 3) == [Query(asker.id, RED, 3)]
    assert pair.ledger.queries == 0


def test_late_neighbour_answers_an_open_query():
    world = ScriptedWorld.create([('QRU', 'M'), ('QRU', 'I')], {1: {5: 'red'}})
    in_range = {'now': False}
    world.connected = lambda a, b: in_range['now']
    world.run(20)
    assert world.robots[1].awaiting == RED
    in_range['now'] = True
    ledger = world.run(2)
    assert ledger.per_robot[1]['queries'] == 1
    assert ledger.per_robot[1]['Q'] == 1
    assert world.robots[1].kb.knows(RED)
