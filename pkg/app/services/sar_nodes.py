"""
Search-and-rescue condition and action routines, plus the pre-coded trees
every robot is born with.

Actions never move the robot themselves: they write actuation intents
(`intent`, `pick_request`, `drop_request`, `query_request`) that the world
consumes after the tick.
"""

import math

from app.models import NodeStatus, action, condition, decorator, sequence
from app.services.behavior_tree import Blackboard, NodeRegistry, TreeEngine
from app.utils import unit

BLACKBOARD_SCHEMA = (
    # sensors
    'rays', 'collision', 'repulsion', 'pose', 'heading', 'walk_jitter',
    'detected_target', 'detected_target_id', 'target_offset',
    'zone', 'zone_offsets', 'carrying',
    # status flags
    'awaiting_response', 'unknown_sequence', 'fallback_reached',
    # actuation intents
    'intent', 'pick_request', 'drop_request', 'query_request',
)


def register_sar_nodes(registry: NodeRegistry) -> NodeRegistry:
    """Populate a registry with the SAR routines"""

    @registry.condition('target_in_range', reads=('detected_target',))
    def target_in_range(bb: Blackboard, params):
        return bb.get('detected_target') == params[0]

    @registry.condition('target_detected', reads=('detected_target',))
    def target_detected(bb: Blackboard, params):
        return bb.get('detected_target') is not None

    @registry.condition('in_zone', reads=('zone',))
    def in_zone(bb: Blackboard, params):
        return bb.get('zone') == params[0]

    @registry.condition('carrying', reads=('carrying',))
    def carrying(bb: Blackboard, params):
        held = bb.get('carrying')
        if params:
            return held == params[0]
        return held is not None

    @registry.condition('collision_detected', reads=('collision',))
    def collision_detected(bb: Blackboard, params):
        return bb.get('collision')

    @registry.condition('awaiting_response', reads=('awaiting_response',))
    def awaiting_response(bb: Blackboard, params):
        return bb.get('awaiting_response')

    @registry.condition('fallback_reached', reads=('fallback_reached',))
    def fallback_reached(bb: Blackboard, params):
        return bb.get('fallback_reached')

    @registry.condition('percept_unknown', reads=('unknown_sequence',))
    def percept_unknown(bb: Blackboard, params):
        return bb.get('unknown_sequence') is not None

    @registry.action('avoid_collision')
    def avoid_collision(bb: Blackboard, params):
        rx, ry = bb.get('repulsion')
        bb.set('intent', (rx, ry))
        if rx or ry:
            bb.set('heading', math.atan2(ry, rx))
        return NodeStatus.SUCCESS

    @registry.action('hold_position')
    def hold_position(bb: Blackboard, params):
        bb.set('intent', (0.0, 0.0))
        return NodeStatus.RUNNING

    @registry.action('random_walk')
    def random_walk(bb: Blackboard, params):
        heading = bb.get('heading') + bb.get('walk_jitter')
        bb.set('heading', heading)
        bb.set('intent', (math.cos(heading), math.sin(heading)))
        bb.set('fallback_reached', True)
        return NodeStatus.RUNNING

    @registry.action('pick_target')
    def pick_target(bb: Blackboard, params):
        color = params[0]
        held = bb.get('carrying')
        if held == color:
            return NodeStatus.SUCCESS
        if held is not None or bb.get('detected_target') != color:
            return NodeStatus.FAILURE
        bb.set('pick_request', bb.get('detected_target_id'))
        bb.set('intent', (0.0, 0.0))
        return NodeStatus.RUNNING

    @registry.action('goto_zone')
    def goto_zone(bb: Blackboard, params):
        color = params[0]
        if bb.get('carrying') != color:
            return NodeStatus.FAILURE
        if bb.get('zone') == color:
            return NodeStatus.SUCCESS
        direction = unit(bb.get('zone_offsets')[color])
        bb.set('intent', direction)
        bb.set('heading', math.atan2(direction[1], direction[0]))
        return NodeStatus.RUNNING

    @registry.action('drop_target')
    def drop_target(bb: Blackboard, params):
        held = bb.get('carrying')
        if held is None or (params and held != params[0]) or bb.get('zone') != held:
            return NodeStatus.FAILURE
        bb.set('drop_request', True)
        bb.set('intent', (0.0, 0.0))
        return NodeStatus.SUCCESS

    @registry.action('post_query')
    def post_query(bb: Blackboard, params):
        s_q = bb.get('unknown_sequence')
        if s_q is None:
            return NodeStatus.FAILURE
        bb.set('query_request', s_q)
        return NodeStatus.SUCCESS

    return registry


def critical_segment():
    """T_C: steer away from walls/obstacles while not engaged with a target"""
    return sequence(
        condition('collision_detected'),
        decorator('invert', condition('target_detected')),
        action('avoid_collision'),
    )


def pause_segment():
    """Common knowledge: stay put while a query is outstanding"""
    return sequence(condition('awaiting_response'), action('hold_position'))


def target_action(color: str):
    """T_ka* for one colour: pick it up, carry it home, put it down"""
    return sequence(
        action('pick_target', color),
        action('goto_zone', color),
        action('drop_target', color),
    )


def fallback_segment():
    return action('random_walk')


def modality_tree(cooldown: int):
    """T_Mod: post a query when the fallback handled a percept nobody knows.

    The same pre-coded tree serves every modality; what differs is how
    responses and overheard traffic are processed.
    """
    return sequence(
        condition('fallback_reached'),
        condition('percept_unknown'),
        decorator('invert', condition('awaiting_response')),
        decorator('cooldown', action('post_query'), cooldown),
        label='MOD',
    )


def build_engine() -> TreeEngine:
    """A tree engine knowing every SAR routine"""
    return TreeEngine(register_sar_nodes(NodeRegistry()))
