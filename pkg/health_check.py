#!/usr/bin/env python3
"""
Health check script to verify the simulator before launching long studies
Runs the grammar, the scripted knowledge-transfer scenarios and a short trial
"""

import os
import sys

# Add the project directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app import create_app
from app.schemas import load_world_config
from app.services import scenarios
from app.services.sar_world import init_world, step
from app.services.string_bt import parse, serialize


def test_grammar():
    """Test stringBT parse/serialize on the pre-coded trees"""
    print("🧪 Testing stringBT grammar...")

    samples = [
        "SEL[ SEQ[ COND:carrying(red) ACT:goto_zone(red) ] SLOT:NK ACT:random_walk() ]",
        "SEQ@MOD[ COND:fallback_reached() DEC:cooldown(100)[ ACT:post_query() ] ]",
        "SEL[ ]",
    ]
    for text in samples:
        try:
            again = serialize(parse(text))
            if serialize(parse(again)) != again:
                print(f"  ❌ Not canonical: '{text}'")
                return False
            print(f"  ✓ '{text}' → '{again}'")
        except Exception as e:
            print(f"  ❌ Error with '{text}': {e}")
            return False
    return True


def test_cumulative_queries():
    """QRA re-queries every occurrence, QRU queries once per robot"""
    print("🧪 Testing cumulative queries...")

    qra = scenarios.run(scenarios.repeated_occurrences('QRA', robots=3, occurrences=10))
    qru = scenarios.run(scenarios.repeated_occurrences('QRU', robots=3, occurrences=10))
    print(f"  ✓ QRA queries: {qra.queries} (expected 20)")
    print(f"  ✓ QRU queries: {qru.queries} (expected 2)")
    return qra.queries == 20 and qru.queries == 2


def test_propagation():
    """P-1 queries spread one robot's knowledge to a group of P"""
    print("🧪 Testing knowledge propagation...")

    for size in (3, 5, 8):
        ledger = scenarios.run(scenarios.propagation(size))
        known = sum(1 for level in ledger.final_knowledge.values() if level > 0)
        print(f"  ✓ P={size}: {ledger.queries} queries, {known}/{size} robots know")
        if ledger.queries != size - 1 or known != size:
            return False
    return True


def test_buffered_eavesdrop():
    """EU bystander merges at once, EBU bystander that never needs it does not"""
    print("🧪 Testing eavesdrop buffering...")

    ledger = scenarios.run(scenarios.overheard_exchange())
    w1, w2 = ledger.per_robot[2], ledger.per_robot[3]
    print(f"  ✓ w1 (EU): {w1}")
    print(f"  ✓ w2 (EBU): {w2}")
    return w1['EU'] == 1 and w2['EBU'] == 0 and w1['queries'] == 0 and w2['queries'] == 0


def test_short_trial():
    """Conservation and containment over a few hundred iterations"""
    print("🧪 Testing a short trial...")

    cfg = load_world_config({'arena': [600, 600], 'targets': [3, 3, 3, 3], 'iterations': 300,
                             'roster': [{'modality': 'EBU', 'knowledge': 'I', 'count': 7},
                                        {'modality': 'EBU', 'knowledge': 'M', 'count': 1}]})
    world = init_world(cfg)
    for _ in range(cfg.iterations):
        step(world)
        if sum(world.target_counts().values()) != cfg.total_targets:
            print(f"  ❌ Target count drifted at iteration {world.iteration}")
            return False
        if any(not (0 <= r.x <= 600 and 0 <= r.y <= 600) for r in world.robots):
            print(f"  ❌ Robot left the arena at iteration {world.iteration}")
            return False
    print(f"  ✓ {world.iteration} iterations, {world.collected} collected, {world.ledger.queries} queries")
    return True


def main():
    """Run all health checks"""
    create_app('testing')
    print("🏥 Knowledge-Transfer Simulator Health Check")
    print("=" * 50)

    tests = [
        test_grammar,
        test_cumulative_queries,
        test_propagation,
        test_buffered_eavesdrop,
        test_short_trial,
    ]

    passed = 0
    total = len(tests)

    for test in tests:
        try:
            if test():
                passed += 1
                print("✅ PASSED\n")
            else:
                print("❌ FAILED\n")
        except Exception as e:
            print(f"💥 CRASHED: {e}\n")

    print("=" * 50)
    print(f"Health Check Results: {passed}/{total} tests passed")

    if passed == total:
        print("🎉 All systems are go! Ready for studies.")
        return True
    else:
        print("⚠️  Some issues detected. Please review before running studies.")
        return False


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
