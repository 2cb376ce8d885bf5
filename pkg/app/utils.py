import json
import math
import os
from typing import Any, Dict, Tuple

import numpy as np

Vector = Tuple[float, float]

# Collision ray directions, counter-clockwise from east: E, NE, N, NW, W, SW, S, SE
RAY_NAMES = ('E', 'NE', 'N', 'NW', 'W', 'SW', 'S', 'SE')
RAY_DIRECTIONS = tuple(
    (math.cos(i * math.pi / 4), math.sin(i * math.pi / 4)) for i in range(8)
)


def unit(v: Vector) -> Vector:
    """Normalize a 2D vector; the zero vector stays zero"""
    norm = math.hypot(v[0], v[1])
    if norm < 1e-12:
        return (0.0, 0.0)
    return (v[0] / norm, v[1] / norm)


def clamp_norm(v: Vector, limit: float = 1.0) -> Vector:
    """Scale v down so its length does not exceed limit"""
    norm = math.hypot(v[0], v[1])
    if norm <= limit or norm < 1e-12:
        return v
    return (v[0] * limit / norm, v[1] * limit / norm)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; PCG64 streams are identical across platforms"""
    return np.random.default_rng(seed)


def trial_seed(base_seed: int, trial_index: int) -> int:
    """Trial k of a study runs with base + k so any trial can be replayed alone"""
    return base_seed + trial_index


def ensure_dir(path: str) -> str:
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def write_json(path: str, data: Dict[str, Any]):
    """Deterministic JSON (sorted keys) so identical runs give identical bytes"""
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')


def read_json(path: str) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)
