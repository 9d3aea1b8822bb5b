"""Per-item seeds derived from one base seed."""
from __future__ import annotations

import numpy as np


def derive_seed(base: int, index: int) -> int:
    """Independent 63-bit seed for item ``index`` of a batch seeded with ``base``."""
    state = np.random.SeedSequence([int(base), int(index)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def derive_seeds(base: int, n: int) -> list[int]:
    return [derive_seed(base, i) for i in range(n)]
