import os
import logging
from logging.handlers import RotatingFileHandler

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration class for the knowledge-transfer simulator"""

    # Output Configuration
    OUTPUT_DIR = os.environ.get('OUTPUT_DIR') or 'out'
    DEFAULT_JOBS = int(os.environ.get('DEFAULT_JOBS', 1))
    DEFAULT_SEED = int(os.environ.get('DEFAULT_SEED', 1))

    # Engine defaults (a WorldConfig file overrides any of these)
    SIM_QUERY_WAIT = int(os.environ.get('SIM_QUERY_WAIT', 50))  # iterations paused after a query
    SIM_QUERY_COOLDOWN = int(os.environ.get('SIM_QUERY_COOLDOWN', 100))
    SIM_ROBOT_SPEED = float(os.environ.get('SIM_ROBOT_SPEED', 2.0))  # units per iteration
    SIM_SENSOR_RADIUS = float(os.environ.get('SIM_SENSOR_RADIUS', 30.0))
    SIM_RAY_RANGE = float(os.environ.get('SIM_RAY_RANGE', 25.0))
    SIM_ZONE_RADIUS = float(os.environ.get('SIM_ZONE_RADIUS', 100.0))
    SIM_TRANSIENT_LIMIT = int(os.environ.get('SIM_TRANSIENT_LIMIT', 2000))
    SIM_PLACEMENT_RETRIES = int(os.environ.get('SIM_PLACEMENT_RETRIES', 1000))
    SIM_PAUSE_ON_QUERY = os.environ.get('SIM_PAUSE_ON_QUERY', 'true').lower() == 'true'
    SIM_REBROADCAST_QUERIES = os.environ.get('SIM_REBROADCAST_QUERIES', 'true').lower() == 'true'

    # Trace Configuration
    SIM_TRACE_FILE = os.environ.get('SIM_TRACE_FILE', 'trace.jsonl')

    # Logging Configuration
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FILE = os.environ.get('LOG_FILE', 'logs/ikt.log')
    LOG_MAX_BYTES = int(os.environ.get('LOG_MAX_BYTES', 10485760))  # 10MB
    LOG_BACKUP_COUNT = int(os.environ.get('LOG_BACKUP_COUNT', 5))
    LOG_TO_FILE = True

    @classmethod
    def engine_defaults(cls) -> dict:
        """Defaults merged under every WorldConfig that omits the matching key"""
        return {
            'query_wait': cls.SIM_QUERY_WAIT,
            'query_cooldown': cls.SIM_QUERY_COOLDOWN,
            'robot_speed': cls.SIM_ROBOT_SPEED,
            'sensor_radius': cls.SIM_SENSOR_RADIUS,
            'ray_range': cls.SIM_RAY_RANGE,
            'zone_radius': cls.SIM_ZONE_RADIUS,
            'transient_limit': cls.SIM_TRANSIENT_LIMIT,
            'placement_retries': cls.SIM_PLACEMENT_RETRIES,
            'pause_on_query': cls.SIM_PAUSE_ON_QUERY,
            'rebroadcast_queries': cls.SIM_REBROADCAST_QUERIES,
        }

    @classmethod
    def init_logging(cls):
        """Configure the root logger once per process"""
        root = logging.getLogger()
        if getattr(root, '_ikt_configured', False):
            return
        level = getattr(logging, cls.LOG_LEVEL.upper(), logging.INFO)
        formatter = logging.Formatter(
            '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
        )

        console = logging.StreamHandler()
        console.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
        console.setLevel(level)
        root.addHandler(console)

        if cls.LOG_TO_FILE:
            log_dir = os.path.dirname(cls.LOG_FILE)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = RotatingFileHandler(
                cls.LOG_FILE,
                maxBytes=cls.LOG_MAX_BYTES,
                backupCount=cls.LOG_BACKUP_COUNT
            )
            file_handler.setFormatter(formatter)
            file_handler.setLevel(level)
            root.addHandler(file_handler)

        root.setLevel(level)
        root._ikt_configured = True
        logging.info('Knowledge-transfer simulator startup')


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Production configuration (long studies, quiet console)"""
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')


class TestingConfig(Config):
    """Testing configuration"""
    LOG_LEVEL = 'WARNING'
    LOG_TO_FILE = False


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': ProductionConfig
}
