"""
Actor-critic network with graph attention between agents.

Per agent: two valid 3x3 convolutions over the egocentric crop, flatten,
concatenate the coarse global map, one dense layer -> feature h. Agents then
exchange features through one attention layer, and the actor and critic heads
read [aggregated feature || own feature].

With tied weights every agent runs the same segments. Untied weights give each
agent its own copy of every segment and skip attention (independent
actor-critic).
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from uavmec.core.exceptions import ConfigError, InvalidArgumentError
from uavmec.models.world import Observation
from uavmec.schemas.learning import NetworkConfig
from uavmec.services import autodiff as ad
from uavmec.services.actions import NUM_ACTIONS
from uavmec.services.observation import coarse_shape

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


@dataclass(frozen=True)
class Segment:
    offset: int
    shape: Shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


# ============ Parameters ============

def layout(cfg: NetworkConfig, num_agents: int, grid_shape: Tuple[int, int]) -> List[Tuple[str, Shape]]:
    """Ordered (name, shape) list of every learnable segment."""
    if cfg.use_attention and not cfg.tie_weights:
        raise ConfigError("Attention needs tied weights; untied agents run without attention")
    f1, f2 = cfg.conv_filters
    k = cfg.kernel
    coarse_size = int(np.prod(coarse_shape(grid_shape, cfg.coarse_factor)))
    dense_in = cfg.conv_out * cfg.conv_out * f2 + coarse_size
    head_in = cfg.attention_dim + cfg.feature_dim

    def block(prefix: str) -> List[Tuple[str, Shape]]:
        items = [
            (f"{prefix}encoder.conv1.kernel", (k * k * cfg.channels, f1)),
            (f"{prefix}encoder.conv1.bias", (f1,)),
            (f"{prefix}encoder.conv2.kernel", (k * k * f1, f2)),
            (f"{prefix}encoder.conv2.bias", (f2,)),
            (f"{prefix}encoder.dense.weight", (dense_in, cfg.feature_dim)),
            (f"{prefix}encoder.dense.bias", (cfg.feature_dim,)),
            (f"{prefix}gat.weight", (cfg.feature_dim, cfg.attention_dim)),
        ]
        if cfg.use_attention:
            items += [
                (f"{prefix}gat.a_src", (cfg.attention_dim, 1)),
                (f"{prefix}gat.a_dst", (cfg.attention_dim, 1)),
            ]
        items += [
            (f"{prefix}actor.weight", (head_in, NUM_ACTIONS)),
            (f"{prefix}actor.bias", (NUM_ACTIONS,)),
            (f"{prefix}critic.weight", (head_in, 1)),
            (f"{prefix}critic.bias", (1,)),
        ]
        return items

    if cfg.tie_weights:
        return block("")
    return [item for n in range(num_agents) for item in block(f"agent{n}.")]


class ParameterSet:
    """Every learnable weight in one flat float64 vector, addressed by named segments"""

    def __init__(self, cfg: NetworkConfig, num_agents: int, grid_shape: Tuple[int, int], values: Optional[np.ndarray] = None):
        if num_agents < 1:
            raise ConfigError(f"At least one agent is required, got {num_agents}")
        self.cfg = cfg
        self.num_agents = num_agents
        self.grid_shape = tuple(grid_shape)
        self.segments: Dict[str, Segment] = {}
        offset = 0
        for name, shape in layout(cfg, num_agents, self.grid_shape):
            self.segments[name] = Segment(offset, shape)
            offset += self.segments[name].size
        self.size = offset
        if values is None:
            values = np.zeros(offset)
        values = np.asarray(values, dtype=float)
        if values.shape != (offset,):
            raise InvalidArgumentError(f"Expected {offset} parameter values, got shape {values.shape}")
        self.values = values.copy()

    @classmethod
    def initialise(cls, cfg, num_agents, grid_shape, rng: np.random.Generator) -> "ParameterSet":
        """Weights uniform in +-init_scale/sqrt(fan_in), biases 0."""
        params = cls(cfg, num_agents, grid_shape)
        for name, segment in params.segments.items():
            if len(segment.shape) == 2:
                bound = cfg.init_scale / np.sqrt(segment.shape[0])
                params.view(name)[...] = rng.uniform(-bound, bound, size=segment.shape)
        return params

    def view(self, name: str) -> np.ndarray:
        segment = self.segments[name]
        return self.values[segment.offset:segment.offset + segment.size].reshape(segment.shape)

    def with_values(self, values: np.ndarray) -> "ParameterSet":
        return ParameterSet(self.cfg, self.num_agents, self.grid_shape, values)

    def copy(self) -> "ParameterSet":
        return self.with_values(self.values)

    def tensors(self) -> Dict[str, ad.Tensor]:
        return {name: ad.parameter(self.view(name).copy()) for name in self.segments}

    def flat_grad(self, tensors: Dict[str, ad.Tensor]) -> np.ndarray:
        grad = np.zeros(self.size)
        for name, tensor in tensors.items():
            if tensor.grad is not None:
                segment = self.segments[name]
                grad[segment.offset:segment.offset + segment.size] = tensor.grad.reshape(-1)
        return grad

    def segment_mask(self, keyword: str) -> np.ndarray:
        """Boolean mask over the flat vector for segments whose name contains `keyword`."""
        mask = np.zeros(self.size, dtype=bool)
        for name, segment in self.segments.items():
            if keyword in name:
                mask[segment.offset:segment.offset + segment.size] = True
        return mask


# ============ Forward pass ============

@dataclass
class ForwardTrace:
    """Outputs of one forward pass over a (T, N) batch of observations"""
    log_probs: ad.Tensor        # (T, N, 9)
    values: ad.Tensor           # (T, N)
    features: ad.Tensor         # (T, N, F)
    aggregated: ad.Tensor       # (T, N, A)
    attention: np.ndarray       # (T, N, N)
    scores: Optional[np.ndarray]  # (T, N, N) pre-softmax attention scores; None without attention
    tensors: Dict[str, ad.Tensor]

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs.value)


def neighbour_mask(num_agents: int, adjacency: Optional[np.ndarray] = None) -> np.ndarray:
    """Neighbour sets without self; an agent with no neighbours attends to itself."""
    if adjacency is None:
        adjacency = np.ones((num_agents, num_agents), dtype=bool)
    mask = np.asarray(adjacency, dtype=bool) & ~np.eye(num_agents, dtype=bool)
    lonely = ~mask.any(axis=1)
    mask[lonely, lonely] = True
    return mask


def encode(tensors: Dict[str, ad.Tensor], prefix: str, local: np.ndarray, coarse: np.ndarray, cfg: NetworkConfig) -> ad.Tensor:
    """(B, C, w, w) crops and (B, C, h, w) coarse maps -> (B, F) features."""
    batch = local.shape[0]
    expected = (cfg.channels, cfg.window, cfg.window)
    if local.shape[1:] != expected:
        raise InvalidArgumentError(f"Local observation shape {local.shape[1:]} does not match {expected}")
    x = ad.constant(np.ascontiguousarray(local.transpose(0, 2, 3, 1)))
    side1 = cfg.window - cfg.kernel + 1
    h1 = ad.tanh(ad.unfold(x, cfg.kernel) @ tensors[f"{prefix}encoder.conv1.kernel"] + tensors[f"{prefix}encoder.conv1.bias"])
    h1 = ad.reshape(h1, (batch, side1, side1, cfg.conv_filters[0]))
    h2 = ad.tanh(ad.unfold(h1, cfg.kernel) @ tensors[f"{prefix}encoder.conv2.kernel"] + tensors[f"{prefix}encoder.conv2.bias"])
    flat = ad.reshape(h2, (batch, cfg.conv_out * cfg.conv_out * cfg.conv_filters[1]))
    z = ad.concat([flat, ad.constant(coarse.reshape(batch, -1))], axis=-1)
    weight = tensors[f"{prefix}encoder.dense.weight"]
    if z.shape[1] != weight.shape[0]:
        raise InvalidArgumentError(f"Encoder input width {z.shape[1]} does not match dense layer {weight.shape[0]}")
    return ad.tanh(z @ weight + tensors[f"{prefix}encoder.dense.bias"])


def gat_aggregate(
    features: ad.Tensor,
    weight: ad.Tensor,
    a_src: ad.Tensor,
    a_dst: ad.Tensor,
    mask: np.ndarray,
    slope: float,
) -> Tuple[ad.Tensor, np.ndarray, np.ndarray]:
    """(T, N, F) features -> (T, N, A) aggregated features, attention weights and raw scores.

    e[m, n] = leaky(a_src . Wh_m + a_dst . Wh_n), softmax over the neighbours of m,
    h'_m = tanh(sum_n alpha[m, n] Wh_n).
    """
    steps, agents = features.shape[0], features.shape[1]
    wh = features @ weight
    src = wh @ a_src
    dst = ad.reshape(wh @ a_dst, (steps, 1, agents))
    scores = ad.leaky_relu(src + dst, slope)
    alpha = ad.masked_softmax(scores, mask)
    return ad.tanh(alpha @ wh), alpha.value, scores.value


def actor_critic_heads(
    aggregated: ad.Tensor,
    local: ad.Tensor,
    actor_weight: ad.Tensor,
    actor_bias: ad.Tensor,
    critic_weight: ad.Tensor,
    critic_bias: ad.Tensor,
) -> Tuple[ad.Tensor, ad.Tensor]:
    """Log-probabilities over the 9 actions and the state value for every agent."""
    z = ad.concat([aggregated, local], axis=-1)
    log_probs = ad.log_softmax(z @ actor_weight + actor_bias)
    value = z @ critic_weight + critic_bias
    return log_probs, ad.reshape(value, value.shape[:-1])


def _tied_forward(params: ParameterSet, t, local, coarse, mask) -> ForwardTrace:
    cfg = params.cfg
    steps, agents = local.shape[:2]
    flat_local = local.reshape((steps * agents,) + local.shape[2:])
    flat_coarse = coarse.reshape((steps * agents,) + coarse.shape[2:])
    h = ad.reshape(encode(t, "", flat_local, flat_coarse, cfg), (steps, agents, cfg.feature_dim))
    if cfg.use_attention:
        aggregated, alpha, scores = gat_aggregate(h, t["gat.weight"], t["gat.a_src"], t["gat.a_dst"], mask, cfg.leaky_slope)
    else:
        aggregated = ad.tanh(h @ t["gat.weight"])
        alpha, scores = np.broadcast_to(np.eye(agents), (steps, agents, agents)).copy(), None
    log_probs, values = actor_critic_heads(
        aggregated, h, t["actor.weight"], t["actor.bias"], t["critic.weight"], t["critic.bias"]
    )
    return ForwardTrace(log_probs, values, h, aggregated, alpha, scores, t)


def _untied_forward(params: ParameterSet, t, local, coarse) -> ForwardTrace:
    cfg = params.cfg
    steps, agents = local.shape[:2]
    feats, aggs, logps, vals = [], [], [], []
    for n in range(agents):
        p = f"agent{n}."
        h = encode(t, p, local[:, n], coarse[:, n], cfg)
        aggregated = ad.tanh(h @ t[f"{p}gat.weight"])
        log_probs, values = actor_critic_heads(
            aggregated, h, t[f"{p}actor.weight"], t[f"{p}actor.bias"], t[f"{p}critic.weight"], t[f"{p}critic.bias"]
        )
        feats.append(ad.reshape(h, (steps, 1, cfg.feature_dim)))
        aggs.append(ad.reshape(aggregated, (steps, 1, cfg.attention_dim)))
        logps.append(ad.reshape(log_probs, (steps, 1, NUM_ACTIONS)))
        vals.append(ad.reshape(values, (steps, 1)))
    alpha = np.broadcast_to(np.eye(agents), (steps, agents, agents)).copy()
    return ForwardTrace(
        ad.concat(logps, axis=1), ad.concat(vals, axis=1), ad.concat(feats, axis=1), ad.concat(aggs, axis=1),
        alpha, None, t,
    )


def forward(
    params: ParameterSet,
    local: np.ndarray,
    coarse: np.ndarray,
    adjacency: Optional[np.ndarray] = None,
) -> ForwardTrace:
    """Run the network over (T, N, C, w, w) crops and (T, N, C, h, w) coarse maps."""
    local = np.asarray(local, dtype=float)
    coarse = np.asarray(coarse, dtype=float)
    if local.ndim != 5 or coarse.ndim != 5 or local.shape[:2] != coarse.shape[:2]:
        raise InvalidArgumentError(f"Expected (T, N, ...) observation stacks, got {local.shape} and {coarse.shape}")
    agents = local.shape[1]
    if not params.cfg.tie_weights and agents != params.num_agents:
        raise InvalidArgumentError(f"Untied parameters hold {params.num_agents} agents, got {agents}")
    tensors = params.tensors()
    if params.cfg.tie_weights:
        return _tied_forward(params, tensors, local, coarse, neighbour_mask(agents, adjacency))
    return _untied_forward(params, tensors, local, coarse)


def stack_observations(observations: Sequence[Sequence[Observation]]) -> Tuple[np.ndarray, np.ndarray]:
    """T steps of N agent views -> (T, N, ...) local and coarse arrays."""
    local = np.array([[o.local for o in step] for step in observations], dtype=float)
    coarse = np.array([[o.coarse for o in step] for step in observations], dtype=float)
    return local, coarse


def policy_step(
    params: ParameterSet,
    observations: Sequence[Observation],
    rng: Optional[np.random.Generator] = None,
    greedy: bool = False,
) -> Tuple[int, ...]:
    """One joint action: sampled from each agent's policy, or its argmax when greedy."""
    local, coarse = stack_observations([observations])
    probs = forward(params, local, coarse).probabilities[0]
    if greedy:
        return tuple(int(a) for a in np.argmax(probs, axis=1))
    if rng is None:
        raise InvalidArgumentError("Sampling actions needs an rng")
    draws = rng.random(probs.shape[0])
    cumulative = np.cumsum(probs, axis=1)
    actions = [min(int(np.searchsorted(cumulative[n], draws[n] * cumulative[n, -1], side="right")), NUM_ACTIONS - 1)
               for n in range(probs.shape[0])]
    return tuple(actions)
