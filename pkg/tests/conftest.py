import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import create_app
from app.models import NodeStatus
from app.services.behavior_tree import Blackboard, NodeRegistry, TreeEngine
from app.services.sar_nodes import BLACKBOARD_SCHEMA, build_engine, critical_segment, fallback_segment
from app.services.sar_world import initial_blackboard
from app.services.string_bt import ControlTree


@pytest.fixture(scope='session')
def app():
    return create_app('testing')


@pytest.fixture
def engine():
    return build_engine()


@pytest.fixture
def schema():
    return BLACKBOARD_SCHEMA


@pytest.fixture
def bb():
    return initial_blackboard(0.0)


@pytest.fixture
def control():
    return ControlTree.build(critical_segment(), fallback_segment())


@pytest.fixture
def toy_engine():
    """Engine over constant routines; `engine.calls` records action ticks in order"""
    registry = NodeRegistry()
    calls = []

    @registry.condition('yes')
    def yes(bb, params):
        return True

    @registry.condition('no')
    def no(bb, params):
        return False

    @registry.condition('flag', reads=('flag',))
    def flag(bb, params):
        return bb.get('flag')

    def constant(name, status):
        def routine(bb, params):
            calls.append(name)
            return status
        return routine

    registry.action('ok')(constant('ok', NodeStatus.SUCCESS))
    registry.action('fail')(constant('fail', NodeStatus.FAILURE))
    registry.action('run')(constant('run', NodeStatus.RUNNING))

    engine = TreeEngine(registry)
    engine.calls = calls
    return engine


@pytest.fixture
def toy_bb():
    return Blackboard(('flag',), {'flag': False})
