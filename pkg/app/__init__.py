import logging
import os
from typing import Any, Dict, Optional, Union

from app.errors import ConfigurationError
from app.schemas import StudySpec, WorldConfig, load_world_config
from app.services.metrics import MetricsLedger
from app.services.sar_nodes import build_engine
from app.utils import read_json

logger = logging.getLogger(__name__)


class SimulationApp:
    """Process-level context: the selected Config class and a shared tree engine"""

    def __init__(self, config_class):
        self.config = config_class
        self.engine = build_engine()
        self.registry = self.engine.registry

    def __repr__(self):
        return f'<SimulationApp {self.config.__name__}>'

    def load_world_config(self, source: Union[str, Dict[str, Any]], seed: Optional[int] = None) -> WorldConfig:
        """Validate a WorldConfig file or dict; env-level engine defaults fill omitted keys"""
        if isinstance(source, str):
            try:
                data = read_json(source)
            except (OSError, ValueError) as e:
                raise ConfigurationError(f'cannot read config: {e}', path=source) from e
        else:
            data = source
        cfg = load_world_config(data, self.config.engine_defaults())
        if seed is not None:
            cfg = load_world_config({**cfg.to_dict(), 'seed': seed})
        return cfg

    def run_trial(self, cfg: WorldConfig, trace=None) -> MetricsLedger:
        from app.services.sar_world import run_trial
        return run_trial(cfg, self.engine, trace)

    def run_study(self, spec: StudySpec, out_dir: Optional[str] = None, jobs: Optional[int] = None) -> Dict:
        from app.services.study_runner import run_study
        return run_study(spec, out_dir or self.config.OUTPUT_DIR, jobs or self.config.DEFAULT_JOBS)


def create_app(config_name=None) -> SimulationApp:
    """Application factory: pick a Config class, set up logging, build the engine"""
    from config import config

    if config_name is None:
        config_name = os.environ.get('SIM_ENV', 'default')
    config_class = config.get(config_name, config['default'])
    config_class.init_logging()

    app = SimulationApp(config_class)
    logger.debug(f"Created {app!r}")
    return app
