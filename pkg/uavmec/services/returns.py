from typing import Sequence

import numpy as np

from uavmec.core.exceptions import InvalidArgumentError


def _check_discount(discount: float) -> None:
    if not 0.0 <= discount < 1.0:
        raise InvalidArgumentError(f"Discount must be in [0, 1), got {discount}")


def discounted_return(rewards: Sequence[float], discount: float) -> float:
    """sum_n discount**n * rewards[n], accumulated from the back."""
    _check_discount(discount)
    total = 0.0
    for reward in reversed(rewards):
        total = float(reward) + discount * total
    return total


def returns_to_go(rewards: Sequence[float], discount: float, bootstrap: float = 0.0) -> np.ndarray:
    """Return from every step of a segment; `bootstrap` stands in for the value after the last step."""
    _check_discount(discount)
    out = np.empty(len(rewards), dtype=float)
    running = float(bootstrap)
    for i in range(len(rewards) - 1, -1, -1):
        running = float(rewards[i]) + discount * running
        out[i] = running
    return out
