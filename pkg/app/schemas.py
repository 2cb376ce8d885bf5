"""
Validated configuration documents: WorldConfig (one trial) and StudySpec (a sweep).

Both reject unknown keys. JSON layout of a WorldConfig file:

    {
      "arena": [2000, 2000],              world units, x then y
      "targets": [25, 25, 25, 25],        red, green, yellow, blue counts
      "zone_radius": 100,
      "obstacles": [{"x": 500, "y": 500, "radius": 40}],
      "comm_range": 200,
      "roster": [{"modality": "QRU", "knowledge": "I", "count": 39},
                 {"modality": "QRU", "knowledge": "M", "count": 1}],
      "t_m": 5000,                        eavesdrop buffer timer, iterations
      "iterations": 100000,
      "seed": 1,
      "robot_speed": 2, "sensor_radius": 30, "ray_range": 25,
      "query_wait": 50, "query_cooldown": 100, "buffer_capacity": null,
      "pause_on_query": true, "rebroadcast_queries": true, "transient_limit": 2000,
      "placement_retries": 1000, "early_stop": true
    }
"""

from typing import Any, Dict, List, Literal, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigurationError
from app.models import ModalityKind, RosterEntry

ModalityName = Literal['QRA', 'QRU', 'EU', 'EBU']
KnowledgeName = Literal['I', 'M', 'R', 'G', 'Y', 'B']
StudyName = Literal['modality-compare', 'comm-range', 'opportunities', 'buffer-duration']

# WorldConfig field swept by each study
SWEEP_FIELDS = {
    'modality-compare': 'comm_range',
    'comm-range': 'comm_range',
    'opportunities': 'targets',
    'buffer-duration': 't_m',
}


class RosterEntrySchema(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    modality: ModalityName
    knowledge: KnowledgeName
    count: int = Field(1, ge=0)


class ObstacleSchema(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    x: float
    y: float
    radius: float = Field(gt=0)


def _default_roster() -> List[RosterEntrySchema]:
    return [RosterEntrySchema(modality='QRU', knowledge='I', count=39),
            RosterEntrySchema(modality='QRU', knowledge='M', count=1)]


class WorldConfig(BaseModel):
    """Everything one trial needs; (config, seed) determines the whole ledger"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    arena: Tuple[float, float] = (2000.0, 2000.0)
    targets: Tuple[int, int, int, int] = (25, 25, 25, 25)
    zone_radius: float = Field(100.0, gt=0)
    obstacles: List[ObstacleSchema] = Field(default_factory=list)
    comm_range: float = Field(200.0, ge=0)
    roster: List[RosterEntrySchema] = Field(default_factory=_default_roster)
    t_m: int = Field(5000, ge=1)
    iterations: int = Field(100000, ge=0)
    seed: int = Field(1, ge=0, lt=2 ** 64)
    robot_speed: float = Field(2.0, ge=0)
    sensor_radius: float = Field(30.0, gt=0)
    ray_range: float = Field(25.0, gt=0)
    query_wait: int = Field(50, ge=1)
    query_cooldown: int = Field(100, ge=0)
    buffer_capacity: Optional[int] = Field(None, ge=1)
    pause_on_query: bool = True
    rebroadcast_queries: bool = True
    transient_limit: int = Field(2000, ge=1)
    placement_retries: int = Field(1000, ge=1)
    early_stop: bool = True

    @model_validator(mode='after')
    def _check_geometry(self):
        x, y = self.arena
        if x <= 0 or y <= 0:
            raise ValueError('arena dimensions must be positive')
        if any(c < 0 for c in self.targets):
            raise ValueError('target counts must be non-negative')
        if 2 * self.zone_radius >= min(x, y):
            raise ValueError('collection zones overlap: zone_radius too large for the arena')
        if self.robot_count() < 1:
            raise ValueError('roster must contain at least one robot')
        return self

    @property
    def total_targets(self) -> int:
        return sum(self.targets)

    def robot_count(self) -> int:
        return sum(entry.count for entry in self.roster)

    def roster_entries(self) -> List[RosterEntry]:
        return [RosterEntry(ModalityKind(e.modality), e.knowledge, e.count) for e in self.roster]

    def with_modality(self, modality: str) -> 'WorldConfig':
        """Same roster shape, every robot switched to one modality"""
        roster = [e.model_copy(update={'modality': modality}) for e in self.roster]
        return self.model_copy(update={'roster': roster})

    def with_value(self, field_name: str, value: Any) -> 'WorldConfig':
        return WorldConfig.model_validate({**self.model_dump(), field_name: value})

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode='json')


class StudySpec(BaseModel):
    """A sweep: every (modality, sweep value, trial) combination becomes one trial"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    study: StudyName
    modalities: List[ModalityName] = Field(min_length=1)
    sweep: List[Any] = Field(min_length=1)
    trials: int = Field(ge=1)
    base: WorldConfig = Field(default_factory=WorldConfig)
    scale: float = Field(1.0, gt=0)

    @property
    def sweep_field(self) -> str:
        return SWEEP_FIELDS[self.study]

    def trial_config(self, modality: str, value: Any, trial_index: int) -> WorldConfig:
        from app.utils import trial_seed
        cfg = self.base.with_modality(modality).with_value(self.sweep_field, value)
        return cfg.model_copy(update={'seed': trial_seed(self.base.seed, trial_index)})


def _error_path(error: ValidationError) -> str:
    first = error.errors()[0]
    return '.'.join(str(part) for part in first['loc']) or '<root>'


def _validate(model: Type[BaseModel], data: Dict[str, Any]):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(first['msg'], path=_error_path(e)) from e


def load_world_config(data: Dict[str, Any], defaults: Optional[Dict[str, Any]] = None) -> WorldConfig:
    """Validate a WorldConfig document; `defaults` fill keys the document omits"""
    if not isinstance(data, dict):
        raise ConfigurationError('config must be a JSON object', path='<root>')
    merged = {**(defaults or {}), **data}
    return _validate(WorldConfig, merged)


def load_study_spec(data: Dict[str, Any]) -> StudySpec:
    if not isinstance(data, dict):
        raise ConfigurationError('study spec must be a JSON object', path='<root>')
    return _validate(StudySpec, data)
