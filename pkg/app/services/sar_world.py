"""
Search-and-rescue foraging world and its deterministic scheduler.

Every iteration runs the same phases for all robots in id order:

    1 sense            6 pickup / deposit
    2 responses        7 queries (answers go out next iteration)
    3 EU / EBU merges  8 buffer timers
    4 tick T_ikt       9 metrics sample
    5 motion

Collection zones sit at the corners: red (0, 0), green (x, 0),
yellow (x, y), blue (0, y).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from app.errors import ConfigurationError, TrialError
from app.models import (
    COLORS, KNOWLEDGE_CLASSES, BtNode, ConditionSequence, ModalityKind, NodeStatus, Obstacle,
    Target, TargetStatus
)
from app.schemas import RosterEntrySchema, WorldConfig
from app.services.behavior_tree import Blackboard, TreeEngine
from app.services.knowledge_store import KnowledgeBase, MessageBuffer
from app.services.metrics import MetricsLedger, knowledge_levels
from app.services.modalities import KnowledgeExchange
from app.services.sar_nodes import (
    BLACKBOARD_SCHEMA, build_engine, critical_segment, fallback_segment, modality_tree,
    pause_segment, target_action
)
from app.services.string_bt import FALLBACK, ControlTree, make_knowledge_subtree
from app.utils import RAY_DIRECTIONS, Vector, clamp_norm, make_rng

logger = logging.getLogger(__name__)

WALK_JITTER = math.radians(15)
TRANSIENT = 'transient'
_RAYS = np.asarray(RAY_DIRECTIONS)


def zone_centers(arena: Tuple[float, float]) -> Dict[str, Vector]:
    x, y = arena
    return {'red': (0.0, 0.0), 'green': (x, 0.0), 'yellow': (x, y), 'blue': (0.0, y)}


@dataclass
class Robot:
    id: int
    modality: ModalityKind
    knowledge_class: str
    x: float
    y: float
    kb: KnowledgeBase
    control: ControlTree
    bb: Blackboard
    buffer: MessageBuffer
    carrying: Optional[int] = None
    awaiting: Optional[ConditionSequence] = None
    wait_remaining: int = 0
    transient: Optional[BtNode] = None
    transient_age: int = 0

    def __repr__(self):
        return f'<Robot {self.id} {self.modality.value}/{self.knowledge_class} {self.motion_state}>'

    @property
    def motion_state(self) -> str:
        if self.carrying is not None:
            return 'carry'
        if self.transient is not None:
            return 'transient-action'
        if self.awaiting is not None:
            return 'query-wait'
        return 'random-walk'

    def refresh_percept(self):
        """unknown_sequence is the detected target's condition sequence when the KB lacks it"""
        color = self.bb.get('detected_target')
        unknown = None
        if color is not None:
            s_q = ConditionSequence.for_target(color)
            if not self.kb.knows(s_q):
                unknown = s_q
        self.bb.set('unknown_sequence', unknown)

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'modality': self.modality.value,
            'knowledge': self.knowledge_class,
            'x': round(self.x, 6),
            'y': round(self.y, 6),
            'known': len(self.kb),
            'carrying': self.carrying,
            'state': self.motion_state,
        }


def initial_blackboard(heading: float) -> Blackboard:
    values = {key: None for key in BLACKBOARD_SCHEMA}
    values.update({
        'rays': (False,) * 8, 'collision': False, 'repulsion': (0.0, 0.0),
        'pose': (0.0, 0.0, heading), 'heading': heading, 'walk_jitter': 0.0,
        'target_offset': (0.0, 0.0), 'zone_offsets': {},
        'awaiting_response': False, 'fallback_reached': False,
        'intent': (0.0, 0.0), 'drop_request': False,
    })
    return Blackboard(BLACKBOARD_SCHEMA, values)


def build_robot(robot_id: int, modality: ModalityKind, knowledge_class: str, x: float, y: float,
                heading: float, cfg: WorldConfig, engine: TreeEngine) -> Robot:
    """A robot with its class's prior knowledge pre-merged into T_PK"""
    sequences, actions, prior = [], [], []
    for color in KNOWLEDGE_CLASSES[knowledge_class]:
        s_q = ConditionSequence.for_target(color)
        sequences.append(s_q)
        actions.append(target_action(color))
        prior.append(make_knowledge_subtree(s_q, target_action(color)))

    common = [pause_segment()] if cfg.pause_on_query else []
    control = ControlTree.build(critical_segment(), fallback_segment(), common=common, prior=prior)
    engine.validate(control.root, BLACKBOARD_SCHEMA)

    return Robot(
        id=robot_id, modality=modality, knowledge_class=knowledge_class, x=x, y=y,
        kb=KnowledgeBase(sequences, actions), control=control,
        bb=initial_blackboard(heading), buffer=MessageBuffer(cfg.buffer_capacity),
    )


class WorldState:
    """Arena, targets, robots and the broadcast medium of one trial"""

    def __init__(self, cfg: WorldConfig, engine: TreeEngine, ledger: MetricsLedger,
                 exchange: KnowledgeExchange, rng: np.random.Generator):
        self.cfg = cfg
        self.engine = engine
        self.ledger = ledger
        self.exchange = exchange
        self.rng = rng
        self.iteration = 0
        self.collected = 0
        self.zones = zone_centers(cfg.arena)
        self.obstacles = [Obstacle(o.x, o.y, o.radius) for o in cfg.obstacles]
        self.targets: List[Target] = []
        self.robots: List[Robot] = []
        self.pending_responses = []
        self.mod_tree = modality_tree(cfg.query_cooldown)
        engine.validate(self.mod_tree, BLACKBOARD_SCHEMA)
        self._obstacle_xy = np.asarray([(o.x, o.y) for o in self.obstacles], dtype=float).reshape(-1, 2)
        self._obstacle_r = np.asarray([o.radius for o in self.obstacles], dtype=float)
        self._target_xy = np.zeros((0, 2))
        self._target_free = np.zeros(0, dtype=bool)

    def __repr__(self):
        return f'<WorldState iter={self.iteration} robots={len(self.robots)} collected={self.collected}>'

    def index_targets(self):
        self._target_xy = np.asarray([(t.x, t.y) for t in self.targets], dtype=float).reshape(-1, 2)
        self._target_free = np.asarray([t.status is TargetStatus.FREE for t in self.targets], dtype=bool)

    @property
    def total_targets(self) -> int:
        return len(self.targets)

    @property
    def all_collected(self) -> bool:
        return self.collected == self.total_targets

    def target_counts(self) -> Dict[str, int]:
        counts = {status.value: 0 for status in TargetStatus}
        for target in self.targets:
            counts[target.status.value] += 1
        return counts

    def zone_of(self, x: float, y: float) -> Optional[str]:
        for color, (cx, cy) in self.zones.items():
            if math.hypot(x - cx, y - cy) <= self.cfg.zone_radius:
                return color
        return None

    def in_obstacle(self, x: float, y: float, margin: float = 0.0) -> bool:
        if not self.obstacles:
            return False
        d = np.hypot(self._obstacle_xy[:, 0] - x, self._obstacle_xy[:, 1] - y)
        return bool((d <= self._obstacle_r + margin).any())

    def connected(self, a: Robot, b: Robot) -> bool:
        return math.hypot(a.x - b.x, a.y - b.y) <= self.cfg.comm_range

    def collision_rays(self, xy: np.ndarray) -> np.ndarray:
        """(n, 8) booleans for n positions, E first and counter-clockwise; walls count as obstacles"""
        reach = self.cfg.ray_range
        arena_x, arena_y = self.cfg.arena
        ends = xy[:, None, :] + reach * _RAYS[None, :, :]
        rays = (ends[..., 0] < 0) | (ends[..., 0] > arena_x) | (ends[..., 1] < 0) | (ends[..., 1] > arena_y)
        if self.obstacles:
            rel = self._obstacle_xy[None, :, :] - xy[:, None, :]
            along = np.clip(rel @ _RAYS.T, 0.0, reach)
            closest = along[..., None] * _RAYS
            gap = np.linalg.norm(closest - rel[:, :, None, :], axis=3)
            rays |= (gap <= self._obstacle_r[None, :, None]).any(axis=1)
        return rays

    def nearest_free_targets(self, xy: np.ndarray) -> List[Optional[int]]:
        """Id of the closest free target within sensor range of each position"""
        free = np.flatnonzero(self._target_free)
        if free.size == 0:
            return [None] * len(xy)
        points = self._target_xy[free]
        d = np.hypot(points[None, :, 0] - xy[:, None, 0], points[None, :, 1] - xy[:, None, 1])
        best = d.argmin(axis=1)
        in_range = d[np.arange(len(xy)), best] <= self.cfg.sensor_radius
        return [int(free[b]) if hit else None for b, hit in zip(best, in_range)]

    def sense(self, robot: Robot):
        """Phase 1 for a single robot"""
        self._sense_group([robot])

    def sense_all(self):
        self._sense_group(self.robots)

    def _sense_group(self, robots: List[Robot]):
        """Overwrite sensor keys and reset the actuation intents; geometry is batched"""
        if not robots:
            return
        xy = np.array([(robot.x, robot.y) for robot in robots], dtype=float)
        rays = self.collision_rays(xy)
        pushes = repulsion_vectors(rays)
        jitters = self.rng.uniform(-WALK_JITTER, WALK_JITTER, size=len(robots))
        nearest = self.nearest_free_targets(xy)

        for robot, hits, push, jitter, target_id in zip(robots, rays.tolist(), pushes.tolist(),
                                                         jitters.tolist(), nearest):
            if robot.carrying is not None:
                target = self.targets[robot.carrying]
                detected = (target.color, target.id, (0.0, 0.0))
            elif target_id is None:
                detected = (None, None, (0.0, 0.0))
            else:
                target = self.targets[target_id]
                detected = (target.color, target.id, (target.x - robot.x, target.y - robot.y))

            robot.bb.update({
                'rays': tuple(hits),
                'collision': any(hits),
                'repulsion': tuple(push),
                'walk_jitter': jitter,
                'detected_target': detected[0],
                'detected_target_id': detected[1],
                'target_offset': detected[2],
                'zone': self.zone_of(robot.x, robot.y),
                'zone_offsets': {c: (cx - robot.x, cy - robot.y) for c, (cx, cy) in self.zones.items()},
                'pose': (robot.x, robot.y, robot.bb.get('heading')),
            })
            self._sense_status(robot)

    def _sense_status(self, robot: Robot):
        bb = robot.bb
        bb.tick_timers()
        if robot.awaiting is not None:
            robot.wait_remaining -= 1
            if robot.wait_remaining <= 0:
                logger.debug(f"Iteration {self.iteration}: robot {robot.id} query for {robot.awaiting} timed out")
                robot.awaiting = None
                robot.wait_remaining = 0

        held = self.targets[robot.carrying].color if robot.carrying is not None else None
        bb.update({
            'carrying': held,
            'awaiting_response': robot.awaiting is not None,
            'fallback_reached': False,
            'intent': (0.0, 0.0),
            'pick_request': None,
            'drop_request': False,
            'query_request': None,
        })
        robot.refresh_percept()

    def tick_robot(self, robot: Robot):
        """Phase 4: Parallel(T_Control, T_Mod), with a QRA transient before the fallback"""
        status, handled = robot.control.tick(self.engine, robot.bb, robot.transient)
        self.engine.tick(self.mod_tree, robot.bb)

        if robot.transient is None:
            return
        if handled == FALLBACK or (handled == TRANSIENT and status is NodeStatus.SUCCESS):
            robot.transient = None
            robot.transient_age = 0
            return
        robot.transient_age += 1
        if robot.transient_age >= self.cfg.transient_limit:
            logger.debug(f"Iteration {self.iteration}: robot {robot.id} abandoned a transient action")
            robot.transient = None
            robot.transient_age = 0

    def move(self, robot: Robot):
        """Phase 5: clamp(intent + repulsion) x speed, reflecting off the walls"""
        if self.cfg.pause_on_query and robot.awaiting is not None:
            return
        bb = robot.bb
        ix, iy = bb.get('intent')
        rx, ry = bb.get('repulsion')
        vx, vy = clamp_norm((ix + rx, iy + ry))
        speed = self.cfg.robot_speed
        x, y = robot.x + vx * speed, robot.y + vy * speed
        heading = bb.get('heading')
        arena_x, arena_y = self.cfg.arena

        if x < 0 or x > arena_x:
            x = -x if x < 0 else 2 * arena_x - x
            heading = math.pi - heading
        if y < 0 or y > arena_y:
            y = -y if y < 0 else 2 * arena_y - y
            heading = -heading
        x = min(max(x, 0.0), arena_x)
        y = min(max(y, 0.0), arena_y)

        if self.in_obstacle(x, y):
            x, y = robot.x, robot.y
            heading += math.pi

        bb.set('heading', math.remainder(heading, 2 * math.pi))
        robot.x, robot.y = x, y
        if robot.carrying is not None:
            target = self.targets[robot.carrying]
            target.x, target.y = x, y

    def resolve_targets(self):
        """Phase 6: pickups then deposits, lowest robot id first"""
        for robot in self.robots:
            target_id = robot.bb.get('pick_request')
            if target_id is None or robot.carrying is not None:
                continue
            target = self.targets[target_id]
            if target.status is not TargetStatus.FREE:
                continue
            if math.hypot(target.x - robot.x, target.y - robot.y) > self.cfg.sensor_radius:
                continue
            target.status = TargetStatus.CARRIED
            target.carried_by = robot.id
            target.x, target.y = robot.x, robot.y
            robot.carrying = target.id
            self._target_free[target.id] = False

        for robot in self.robots:
            if not robot.bb.get('drop_request') or robot.carrying is None:
                continue
            target = self.targets[robot.carrying]
            if self.zone_of(robot.x, robot.y) != target.color:
                continue
            target.status = TargetStatus.COLLECTED
            target.carried_by = None
            target.collected_at = self.iteration
            robot.carrying = None
            self.collected += 1
            logger.debug(f"Iteration {self.iteration}: robot {robot.id} collected {target}")


def repulsion_vectors(rays: np.ndarray) -> np.ndarray:
    """Row-wise unit vectors pointing away from the triggered rays; zero rows when none or balanced"""
    total = -(np.asarray(rays, dtype=float) @ _RAYS)
    norm = np.hypot(total[:, 0], total[:, 1])
    pushes = np.zeros_like(total)
    moving = norm > 1e-12
    pushes[moving] = total[moving] / norm[moving, None]
    return pushes


def repulsion_vector(robot: Robot) -> Vector:
    """Unit vector pointing away from the robot's triggered rays; (0, 0) when none or balanced"""
    x, y = repulsion_vectors(np.asarray([robot.bb.get('rays')], dtype=bool))[0]
    return float(x), float(y)


def sense(robot: Robot, world: WorldState):
    world.sense(robot)


def _sample_point(world: WorldState, rng: np.random.Generator, margin: float,
                  clear_of: float, what: str) -> Vector:
    cfg = world.cfg
    arena_x, arena_y = cfg.arena
    for _ in range(cfg.placement_retries):
        x = float(rng.uniform(margin, arena_x - margin))
        y = float(rng.uniform(margin, arena_y - margin))
        if world.zone_of(x, y) is None and not world.in_obstacle(x, y, clear_of):
            return x, y
    raise ConfigurationError(f'could not place {what} after {cfg.placement_retries} attempts',
                             path='placement_retries')


def init_world(cfg: WorldConfig, engine: Optional[TreeEngine] = None, trace=None) -> WorldState:
    """Seeded placement of targets then robots, outside zones and obstacles"""
    engine = engine or build_engine()
    rng = make_rng(cfg.seed)
    ledger = MetricsLedger(range(cfg.robot_count()), cfg.to_dict())
    exchange = KnowledgeExchange(engine, ledger, BLACKBOARD_SCHEMA, cfg.query_wait, cfg.t_m, trace)
    world = WorldState(cfg, engine, ledger, exchange, rng)

    target_margin = min(cfg.ray_range, min(cfg.arena) / 4)
    for color, count in zip(COLORS, cfg.targets):
        for _ in range(count):
            x, y = _sample_point(world, rng, target_margin, cfg.ray_range, 'targets')
            world.targets.append(Target(len(world.targets), color, x, y))
    world.index_targets()

    robot_id = 0
    for entry in cfg.roster_entries():
        for _ in range(entry.count):
            x, y = _sample_point(world, rng, 1.0, 1.0, 'robots')
            heading = float(rng.uniform(-math.pi, math.pi))
            world.robots.append(build_robot(robot_id, entry.modality, entry.knowledge, x, y,
                                            heading, cfg, engine))
            robot_id += 1

    logger.debug(f"Initialised {world!r} with {world.total_targets} targets")
    return world


def step(world: WorldState) -> WorldState:
    """Advance the world by one iteration"""
    world.iteration += 1
    iteration = world.iteration
    robots = world.robots
    exchange = world.exchange

    world.sense_all()

    responses, world.pending_responses = world.pending_responses, []
    exchange.deliver_responses(robots, responses, iteration, world.connected)

    for robot in robots:
        if robot.modality is ModalityKind.EU:
            exchange.eu_process(robot, iteration)
        elif robot.modality is ModalityKind.EBU:
            s_q = robot.bb.get('unknown_sequence')
            if s_q is not None:
                exchange.ebu_process(robot, s_q, iteration)

    for robot in robots:
        world.tick_robot(robot)

    for robot in robots:
        world.move(robot)

    world.resolve_targets()

    queries = [q for q in (exchange.maybe_post_query(r, iteration) for r in robots) if q is not None]
    if world.cfg.rebroadcast_queries:
        queries += exchange.open_queries(robots, queries, iteration)
    world.pending_responses = exchange.deliver_queries(robots, queries, iteration, world.connected)

    for robot in robots:
        if robot.modality is ModalityKind.EBU:
            robot.buffer.tick()

    world.ledger.sample(iteration, world.collected)
    return world


def run_world(world: WorldState, iterations: int, early_stop: bool = True) -> MetricsLedger:
    """Step until I_max or, with early_stop, until every target is collected"""
    ledger = world.ledger
    ledger.initial_levels = knowledge_levels(world.robots)
    ledger.initial_knowledge = {r.id: len(r.kb.colors()) for r in world.robots}

    for _ in range(iterations):
        if early_stop and world.all_collected:
            break
        step(world)

    ledger.stop_iteration = world.iteration
    ledger.collected = world.collected
    ledger.final_levels = knowledge_levels(world.robots)
    ledger.final_knowledge = {r.id: len(r.kb.colors()) for r in world.robots}
    ledger.knowledge = {r.id: r.kb.to_dict() for r in world.robots}
    return ledger


def run_trial(cfg: WorldConfig, engine: Optional[TreeEngine] = None, trace=None) -> MetricsLedger:
    """init_world then up to cfg.iterations steps; returns the trial's ledger"""
    logger.info(f"Starting trial seed={cfg.seed} robots={cfg.robot_count()} targets={cfg.total_targets}")
    try:
        world = init_world(cfg, engine, trace)
        ledger = run_world(world, cfg.iterations, cfg.early_stop)
    except ConfigurationError:
        raise
    except Exception as e:
        logger.error(f"Trial seed={cfg.seed} failed: {e}")
        raise TrialError(str(e), seed=cfg.seed) from e

    logger.info(f"Finished trial seed={cfg.seed}: collected {ledger.collected}/{cfg.total_targets} "
                f"at iteration {ledger.stop_iteration}, {ledger.queries} queries")
    return ledger


class ScriptedWorld(WorldState):
    """Static, fully connected robots whose percepts follow a schedule.

    `schedule` maps robot id -> {iteration: colour}; a robot faces that colour
    only during the listed iterations. Nothing moves and no target is ever
    picked up, so only the knowledge exchange is exercised.
    """

    def __init__(self, cfg: WorldConfig, schedule: Dict[int, Dict[int, str]],
                 engine: Optional[TreeEngine] = None, trace=None):
        engine = engine or build_engine()
        ledger = MetricsLedger(range(cfg.robot_count()), cfg.to_dict())
        exchange = KnowledgeExchange(engine, ledger, BLACKBOARD_SCHEMA, cfg.query_wait, cfg.t_m, trace)
        super().__init__(cfg, engine, ledger, exchange, make_rng(cfg.seed))
        self.schedule = {rid: dict(events) for rid, events in schedule.items()}
        cx, cy = cfg.arena[0] / 2, cfg.arena[1] / 2
        robot_id = 0
        for entry in cfg.roster_entries():
            for _ in range(entry.count):
                self.robots.append(build_robot(robot_id, entry.modality, entry.knowledge, cx, cy,
                                               0.0, cfg, engine))
                robot_id += 1

    @classmethod
    def create(cls, roster: Iterable[Tuple[str, str]], schedule: Dict[int, Dict[int, str]],
               t_m: int = 5000, query_wait: int = 50, query_cooldown: int = 0,
               **overrides) -> 'ScriptedWorld':
        """roster is a list of (modality, knowledge class), one entry per robot"""
        entries = [RosterEntrySchema(modality=m, knowledge=k, count=1) for m, k in roster]
        cfg = WorldConfig(roster=entries, targets=(0, 0, 0, 0), robot_speed=0.0, t_m=t_m,
                          query_wait=query_wait, query_cooldown=query_cooldown, early_stop=False,
                          **overrides)
        return cls(cfg, schedule)

    def connected(self, a: Robot, b: Robot) -> bool:
        return True

    def sense(self, robot: Robot):
        color = self.schedule.get(robot.id, {}).get(self.iteration)
        robot.bb.update({
            'rays': (False,) * 8, 'collision': False, 'repulsion': (0.0, 0.0), 'walk_jitter': 0.0,
            'detected_target': color, 'detected_target_id': None, 'target_offset': (0.0, 0.0),
            'zone': None, 'zone_offsets': {c: (0.0, 0.0) for c in COLORS},
            'pose': (robot.x, robot.y, 0.0),
        })
        self._sense_status(robot)

    def sense_all(self):
        for robot in self.robots:
            self.sense(robot)

    def move(self, robot: Robot):
        return

    def resolve_targets(self):
        return

    def run(self, iterations: int) -> MetricsLedger:
        try:
            return run_world(self, iterations, early_stop=False)
        except ConfigurationError:
            raise
        except Exception as e:
            raise TrialError(str(e), seed=self.cfg.seed) from e
