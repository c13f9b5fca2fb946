"""
Radio geometry and link budget for the BS and UAV access links.

Every function accepts scalars; the ones the environment evaluates per vehicle
also accept numpy arrays and then work element-wise.
"""
import logging
import math
from typing import Tuple, Union

import numpy as np

from uavmec.core.exceptions import InvalidArgumentError
from uavmec.models.world import Position
from uavmec.schemas.radio import RadioConfig

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _out(value):
    """Hand scalars back as floats, arrays unchanged."""
    return float(value) if np.ndim(value) == 0 else value


# ============ Geometry ============

def slant_distance(a: Position, b: Position) -> float:
    """3-D straight-line distance between two points."""
    coords = (a.x, a.y, a.h, b.x, b.y, b.h)
    if not all(math.isfinite(c) for c in coords):
        raise InvalidArgumentError("Positions must be finite", details={"a": a, "b": b})
    return math.hypot(a.x - b.x, a.y - b.y, a.h - b.h)


def pairwise_distances(points_a: np.ndarray, points_b: np.ndarray) -> np.ndarray:
    """(n, m) slant distances between two (·, 3) point arrays."""
    diff = points_a[:, None, :] - points_b[None, :, :]
    return np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))


def elevation_angle(uav: Position, vehicle: Position) -> float:
    """Elevation of the UAV seen from the vehicle, asin(height difference / slant distance)."""
    if uav.h <= 0:
        raise InvalidArgumentError(f"UAV height must be positive, got {uav.h}")
    distance = slant_distance(uav, vehicle)
    if distance == 0.0:
        raise InvalidArgumentError("UAV and vehicle positions coincide")
    ratio = min(1.0, max(-1.0, (uav.h - vehicle.h) / distance))
    return math.asin(ratio)


# ============ BS link ============

def bs_snr(num_vehicles: int, cfg: RadioConfig) -> float:
    """SNR of a BS link when the BS serves num_vehicles vehicles.

    The noise bandwidth is the per-vehicle share W_BS/M until the subchannel
    cap X is reached, then W_BS/X.
    """
    if num_vehicles < 1:
        raise InvalidArgumentError(f"BS must serve at least one vehicle, got {num_vehicles}")
    if num_vehicles < cfg.max_subchannels:
        noise_bandwidth = cfg.bandwidth_bs / num_vehicles
    else:
        noise_bandwidth = cfg.bandwidth_bs / cfg.max_subchannels
    return cfg.tx_power * cfg.channel_power / (noise_bandwidth * cfg.noise_density)


def bs_throughput(num_vehicles: int, cfg: RadioConfig) -> float:
    """Per-vehicle download throughput from the BS (bit/s)."""
    snr_value = bs_snr(num_vehicles, cfg)
    return (cfg.bandwidth_bs / num_vehicles) * math.log2(1.0 + snr_value)


# ============ Air-to-ground link ============

def los_probability(theta: ArrayLike, cfg: RadioConfig) -> ArrayLike:
    """LoS probability b1*(deg(theta) - zeta)^b2, clamped to [0, 1].

    Angles below the offset fall in the clamped region and yield 0.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or np.any(theta > math.pi / 2 + 1e-12):
        raise InvalidArgumentError("Elevation angle must lie in (0, pi/2]")
    base = np.maximum(np.degrees(theta) - cfg.los_offset, 0.0)
    return _out(np.clip(cfg.los_b1 * base ** cfg.los_b2, 0.0, 1.0))


def channel_gain(distance: ArrayLike, theta: ArrayLike, cfg: RadioConfig) -> ArrayLike:
    """Average channel power K0^-1 * d^-alpha * (P_LoS*mu_LoS + P_NLoS*mu_NLoS)."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise InvalidArgumentError("Distance must be positive")
    p_los = np.asarray(los_probability(theta, cfg))
    mixture = p_los * cfg.atten_los + (1.0 - p_los) * cfg.atten_nlos
    return _out(distance ** (-cfg.path_loss_exp) * mixture / cfg.k0)


def snr(cfg: RadioConfig, per_vehicle_bandwidth: ArrayLike) -> ArrayLike:
    """Received SNR p_t*p_c / (B*n0)."""
    bandwidth = np.asarray(per_vehicle_bandwidth, dtype=float)
    if np.any(bandwidth <= 0):
        raise InvalidArgumentError("Bandwidth must be positive")
    return _out(cfg.tx_power * cfg.channel_power / (bandwidth * cfg.noise_density))


def uav_snr(cfg: RadioConfig, per_vehicle_bandwidth: ArrayLike, gain: ArrayLike) -> ArrayLike:
    """SNR of a UAV link: the channel power factor is the air-to-ground gain."""
    bandwidth = np.asarray(per_vehicle_bandwidth, dtype=float)
    if np.any(bandwidth <= 0):
        raise InvalidArgumentError("Bandwidth must be positive")
    return _out(cfg.tx_power * np.asarray(gain, dtype=float) / (bandwidth * cfg.uav_noise_density))


def link_rate(bandwidth: ArrayLike, snr_value: ArrayLike) -> ArrayLike:
    """Shannon rate B*log2(1 + snr) in bit/s."""
    bandwidth = np.asarray(bandwidth, dtype=float)
    snr_value = np.asarray(snr_value, dtype=float)
    if np.any(bandwidth <= 0):
        raise InvalidArgumentError("Bandwidth must be positive")
    if np.any(snr_value < 0):
        raise InvalidArgumentError("SNR must be non-negative")
    return _out(bandwidth * np.log2(1.0 + snr_value))


def transmission_ok(snr_value: ArrayLike, cfg: RadioConfig) -> Union[bool, np.ndarray]:
    """A transmission succeeds when the SNR reaches the threshold."""
    result = np.asarray(snr_value, dtype=float) >= cfg.snr_threshold
    return bool(result) if result.ndim == 0 else result


def uav_link(uav: Position, vehicle: Position, cluster_size: int, cfg: RadioConfig) -> Tuple[float, float]:
    """Rate and SNR of one vehicle served by a UAV shared among cluster_size vehicles."""
    if cluster_size < 1:
        raise InvalidArgumentError(f"Cluster size must be >= 1, got {cluster_size}")
    distance = slant_distance(uav, vehicle)
    theta = elevation_angle(uav, vehicle)
    bandwidth = cfg.bandwidth_uav / cluster_size
    snr_value = uav_snr(cfg, bandwidth, channel_gain(distance, theta, cfg))
    return link_rate(bandwidth, snr_value), snr_value


def uav_links(uav_xyz: np.ndarray, vehicle_xyz: np.ndarray, cluster_size: int, cfg: RadioConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised uav_link for every vehicle of one cluster."""
    distances = pairwise_distances(uav_xyz[None, :], vehicle_xyz)[0]
    heights = uav_xyz[2] - vehicle_xyz[:, 2]
    theta = np.arcsin(np.clip(heights / distances, -1.0, 1.0))
    bandwidth = cfg.bandwidth_uav / cluster_size
    snr_values = np.asarray(uav_snr(cfg, bandwidth, channel_gain(distances, theta, cfg)))
    return np.asarray(link_rate(bandwidth, snr_values)), snr_values
