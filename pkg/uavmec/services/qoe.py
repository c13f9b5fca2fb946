"""
Mean-opinion scoring of link rates and its aggregation over vehicles and slots.
"""
from typing import Callable, Optional, Sequence, Union

import numpy as np

from uavmec.core.exceptions import InvalidArgumentError
from uavmec.schemas.qoe import MosRateMap, MosWeights
from uavmec.schemas.radio import RadioConfig
from uavmec.services.channel import transmission_ok

MOS_MIN = 1.0
MOS_MAX = 5.0

ArrayLike = Union[float, np.ndarray]

# Maps the rate scores of a slot to delay scores of the same shape
DelayScorer = Callable[[np.ndarray], np.ndarray]


def mos_from_rate(rate: ArrayLike, rate_map: MosRateMap) -> ArrayLike:
    """1 + 4 * clamp(ln(rate/floor) / ln(ceiling/floor), 0, 1)."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0):
        raise InvalidArgumentError("Rate must be non-negative")
    span = np.log(rate_map.rate_ceiling / rate_map.rate_floor)
    with np.errstate(divide="ignore"):
        position = np.log(rate / rate_map.rate_floor) / span
    score = MOS_MIN + (MOS_MAX - MOS_MIN) * np.clip(position, 0.0, 1.0)
    return float(score) if score.ndim == 0 else score


def mos_instant(mos_rate: ArrayLike, mos_delay: ArrayLike, weights: MosWeights) -> ArrayLike:
    """Weighted MOS of one vehicle in one slot."""
    mos_rate = np.asarray(mos_rate, dtype=float)
    mos_delay = np.asarray(mos_delay, dtype=float)
    for name, value in (("mos_rate", mos_rate), ("mos_delay", mos_delay)):
        if np.any(value < MOS_MIN) or np.any(value > MOS_MAX):
            raise InvalidArgumentError(f"{name} must lie in [1, 5]")
    if weights.w_delay == 0.0:
        score = mos_rate
    else:
        score = weights.w_delay * mos_delay + weights.w_rate * mos_rate
    return float(score) if score.ndim == 0 else score


def mos_episode_total(per_slot_per_vehicle: Sequence[Sequence[float]], horizon: int) -> float:
    """Sum of MOS over slots 0..horizon and all vehicles."""
    scores = np.asarray(per_slot_per_vehicle, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != horizon + 1:
        raise InvalidArgumentError(
            f"Expected {horizon + 1} slots of vehicle scores, got shape {scores.shape}"
        )
    return float(scores.sum())


def score_vehicles(
    rates: np.ndarray,
    snrs: np.ndarray,
    radio: RadioConfig,
    rate_map: MosRateMap,
    weights: MosWeights,
    delay_scorer: Optional[DelayScorer] = None,
) -> np.ndarray:
    """MOS of every vehicle in a slot; failed transmissions score the scale minimum."""
    rate_scores = np.asarray(mos_from_rate(rates, rate_map), dtype=float)
    delay_scores = rate_scores if delay_scorer is None else np.asarray(delay_scorer(rate_scores), dtype=float)
    scores = np.asarray(mos_instant(rate_scores, delay_scores, weights), dtype=float)
    ok = np.asarray(transmission_ok(snrs, radio))
    return np.where(ok, scores, MOS_MIN)
