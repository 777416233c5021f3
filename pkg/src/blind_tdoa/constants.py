from __future__ import annotations

from pathlib import Path
from typing import Final

# Meta
ROOT_PATH = Path(__file__).parent
PROJECT_ROOT_PATH = ROOT_PATH.parents[1]

# Logging
LOGS_FOLDER_PATH = PROJECT_ROOT_PATH / 'logs'

# Signals
DEFAULT_SAMPLE_RATE: Final = 16_000
PINK_MIN_LENGTH: Final = 16

# Room
DEFAULT_ROOM_DIMENSIONS: Final = (5.0, 4.0, 3.0)
DEFAULT_REFLECTION_COEFF: Final = 0.8
DEFAULT_SPEED_OF_SOUND: Final = 343.0
WALL_MARGIN: Final = 0.3
MIN_SEPARATION: Final = 0.2
PEAKS_PER_CHANNEL: Final = 7

# Cross-relation
DEFAULT_DENSE_THRESHOLD: Final = 4096

# Peaks / metrics
MATCH_THRESHOLD: Final = 20
DEFAULT_MAX_PEAKS: Final = 7
DEFAULT_REL_FLOOR: Final = 0.05
DIRECT_PATH_DB: Final = 6.0

# Harness
NOISE_RATIOS: Final = (0.01, 0.1, 0.2, 0.5, 1.0)
MIC_COUNTS: Final = (2, 3, 4, 5, 10)
FAILED_TRIAL_LIMIT: Final = 0.2
