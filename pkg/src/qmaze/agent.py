"""Deep Q-learning with an explicit feed-forward network.

The Q-network is a plain numpy MLP (rectified-linear hidden layers, identity
output) with hand-written backpropagation, trained by adaptive-moment updates
on a Huber loss against Bellman targets from a periodically synced target
network.  Keeping the weights and gradients explicit lets the tests check the
gradients against finite differences and the fixed point against a
hand-solved toy MDP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .env import EpisodeConfig, MazeEnv, Transition, baseline_reward, greedy_policy
from .errors import NumericalInstabilityError

__all__ = [
    "QNetwork",
    "ReplayMemory",
    "AgentConfig",
    "AdamOptimizer",
    "TrainingResult",
    "select_action",
    "epsilon_schedule",
    "train_step",
    "sync_target",
    "train",
    "save_policy",
    "load_policy",
]

CHECKPOINT_VERSION = 1


class QNetwork:
    """Feed-forward action-value approximator with explicit parameters.

    Weight matrices are (fan_out, fan_in); initialization is uniform in
    +-1/sqrt(fan_in) per layer, drawn from the supplied generator.
    """

    def __init__(self, layer_sizes, rng=None, weights=None, biases=None):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layers")
        if weights is not None:
            self.weights = [np.array(w, dtype=np.float64) for w in weights]
            self.biases = [np.array(b, dtype=np.float64) for b in biases]
        else:
            rng = np.random.default_rng(rng)
            self.weights = []
            self.biases = []
            for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
                bound = 1.0 / np.sqrt(fan_in)
                self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
                self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...] (live arrays, not copies)."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def copy(self) -> "QNetwork":
        return QNetwork(self.layer_sizes, weights=[w.copy() for w in self.weights],
                        biases=[b.copy() for b in self.biases])

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Action values for a single observation."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.input_dim,):
            raise ValueError(f"observation shape {obs.shape} != ({self.input_dim},)")
        h = obs
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(w @ h + b, 0.0)
        return self.weights[-1] @ h + self.biases[-1]

    def forward_batch(self, xs: np.ndarray, return_hidden: bool = False):
        """Action values for a (batch, input_dim) matrix.

        With ``return_hidden`` also returns each layer's post-activation,
        which is what backpropagation needs.
        """
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ValueError(f"batch shape {xs.shape} incompatible with input dim {self.input_dim}")
        hidden = [xs]
        h = xs
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w.T + b, 0.0)
            hidden.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        if return_hidden:
            return out, hidden
        return out

    def backward_batch(self, hidden, dout):
        """Gradients of a scalar loss given d(loss)/d(output) for the batch.

        ``hidden`` is the activation list from forward_batch.  Returns
        gradients aligned with parameters().
        """
        grads = [None] * (2 * len(self.weights))
        delta = dout
        for layer in range(len(self.weights) - 1, -1, -1):
            grads[2 * layer] = delta.T @ hidden[layer]
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (hidden[layer] > 0.0)
        return grads


class ReplayMemory:
    """Bounded transition pool with oldest-first eviction."""

    def __init__(self, capacity: int = 10000):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._data: list[Transition] = []
        self._pos = 0

    def push(self, transition: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(transition)
        else:
            self._data[self._pos] = transition
            self._pos = (self._pos + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int):
        k = min(batch_size, len(self._data))
        idx = rng.choice(len(self._data), size=k, replace=False)
        return [self._data[i] for i in idx]

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, transition: Transition) -> bool:
        return any(t is transition for t in self._data)


@dataclass(frozen=True)
class AgentConfig:
    """Training hyper-parameters (conventional DQN defaults, all searchable)."""

    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float = 200.0
    batch_size: int = 64
    learning_rate: float = 1e-3
    target_sync: int = 20
    hidden_sizes: tuple[int, ...] = (128, 64)
    memory_capacity: int = 10000
    huber_delta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must not exceed eps_start")
        if self.eps_decay <= 0 or self.batch_size < 1 or self.target_sync < 1:
            raise ValueError("eps_decay, batch_size and target_sync must be positive")
        if self.learning_rate <= 0 or self.memory_capacity < 1:
            raise ValueError("learning_rate and memory_capacity must be positive")

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["hidden_sizes"] = list(self.hidden_sizes)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AgentConfig":
        data = dict(data)
        data["hidden_sizes"] = tuple(data["hidden_sizes"])
        return cls(**data)


class AdamOptimizer:
    """Adaptive moment estimation over a fixed parameter list."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p) for p in params]
        self._v = [np.zeros_like(p) for p in params]

    def update(self, params, grads) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def select_action(net: QNetwork, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; ties resolve to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(net.output_dim))
    return int(np.argmax(net.forward(obs)))


def epsilon_schedule(cfg: AgentConfig, epoch: int) -> float:
    """Exponential decay from eps_start to the eps_end floor."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return cfg.eps_end + (cfg.eps_start - cfg.eps_end) * float(np.exp(-epoch / cfg.eps_decay))


def _huber(diff: np.ndarray, delta: float):
    absd = np.abs(diff)
    quad = absd <= delta
    loss = np.where(quad, 0.5 * diff**2, delta * (absd - 0.5 * delta))
    grad = np.clip(diff, -delta, delta)
    return loss, grad


def train_step(policy_net: QNetwork, target_net: QNetwork, batch, cfg: AgentConfig,
               optimizer: AdamOptimizer | None = None) -> float:
    """One Bellman regression step on the policy network only.

    Targets are r for terminal transitions and r + gamma * max_a Q_target(s', a)
    otherwise.  Returns the mean Huber loss over the batch.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    if optimizer is None:
        optimizer = AdamOptimizer(policy_net.parameters(), lr=cfg.learning_rate)

    obs = np.stack([t.observation for t in batch])
    next_obs = np.stack([t.next_observation for t in batch])
    actions = np.array([t.action for t in batch])
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    terminal = np.array([t.done for t in batch])

    next_q = target_net.forward_batch(next_obs).max(axis=1)
    targets = rewards + np.where(terminal, 0.0, cfg.gamma * next_q)

    qs, hidden = policy_net.forward_batch(obs, return_hidden=True)
    taken = qs[np.arange(len(batch)), actions]
    losses, dtaken = _huber(taken - targets, cfg.huber_delta)
    loss = float(losses.mean())
    if not np.isfinite(loss):
        raise NumericalInstabilityError(f"training loss is {loss}")

    dout = np.zeros_like(qs)
    dout[np.arange(len(batch)), actions] = dtaken / len(batch)
    grads = policy_net.backward_batch(hidden, dout)
    optimizer.update(policy_net.parameters(), grads)
    return loss


def sync_target(policy_net: QNetwork, target_net: QNetwork) -> QNetwork:
    """Hard-copy the policy weights into the target network."""
    if policy_net.layer_sizes != target_net.layer_sizes:
        raise ValueError(
            f"architecture mismatch: {policy_net.layer_sizes} vs {target_net.layer_sizes}"
        )
    for dst, src in zip(target_net.parameters(), policy_net.parameters()):
        dst[...] = src
    return target_net


@dataclass
class TrainingResult:
    """Curves and artifacts of one training run (Fig.-3 style)."""

    episode_rewards: list = field(default_factory=list)
    moving_avg: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    target_evals: list = field(default_factory=list)  # (epoch, greedy reward)
    baseline: float = 0.0
    final_reward: float = 0.0
    best_reward: float = 0.0
    policy: QNetwork | None = None
    best_policy: QNetwork | None = None
    seed: int = 0

    def to_csv(self, path) -> None:
        """`epoch, episode_reward, moving_avg, target_greedy_reward, epsilon`;
        the target column repeats the latest evaluation (blank before the first)."""
        evals = dict(self.target_evals)
        lines = ["epoch,episode_reward,moving_avg,target_greedy_reward,epsilon"]
        latest = None
        for e, (r, m, eps) in enumerate(zip(self.episode_rewards, self.moving_avg,
                                            self.epsilons)):
            latest = evals.get(e, latest)
            tg = "" if latest is None else repr(latest)
            lines.append(f"{e},{r!r},{m!r},{tg},{eps!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _greedy_reward(net: QNetwork, env_config: EpisodeConfig) -> float:
    env = MazeEnv(env_config)
    obs = env.reset()
    policy = greedy_policy(net)
    while not env.done:
        obs = env.step(policy(obs)).next_observation
    return env.escape_total


def train(env_config: EpisodeConfig, agent_config: AgentConfig | None = None,
          epochs: int = 1000, seed: int = 0) -> TrainingResult:
    """Run the training loop: one epsilon-greedy episode per epoch feeding the
    replay memory, one batch update, scheduled target syncs with greedy
    evaluations.  Deterministic given the seed.

    The best target/final greedy evaluation is kept alongside the final
    policy, mirroring the best-of-many reporting used for the sweeps.
    """
    if agent_config is None:
        agent_config = AgentConfig()
    if epochs < 0:
        raise ValueError(f"epochs must be non-negative, got {epochs}")
    rng = np.random.default_rng(seed)
    env = MazeEnv(env_config)
    obs_dim = len(env.reset())
    sizes = [obs_dim, *agent_config.hidden_sizes, env.action_count]
    policy_net = QNetwork(sizes, rng=rng)
    target_net = policy_net.copy()
    optimizer = AdamOptimizer(policy_net.parameters(), lr=agent_config.learning_rate)
    memory = ReplayMemory(agent_config.memory_capacity)

    result = TrainingResult(seed=seed)
    result.baseline = baseline_reward(env_config)
    result.policy = policy_net
    result.best_policy = policy_net.copy()
    best = -np.inf

    for epoch in range(epochs):
        eps = epsilon_schedule(agent_config, epoch)
        obs = env.reset()
        while not env.done:
            action = select_action(policy_net, obs, eps, rng)
            tr = env.step(action)
            memory.push(tr)
            obs = tr.next_observation
        episode_reward = env.escape_total

        batch = memory.sample(rng, agent_config.batch_size)
        loss = train_step(policy_net, target_net, batch, agent_config, optimizer)

        result.episode_rewards.append(episode_reward)
        result.moving_avg.append(float(np.mean(result.episode_rewards[-10:])))
        result.epsilons.append(eps)
        result.losses.append(loss)

        if (epoch + 1) % agent_config.target_sync == 0:
            sync_target(policy_net, target_net)
            greedy = _greedy_reward(target_net, env_config)
            result.target_evals.append((epoch, greedy))
            if greedy > best:
                best = greedy
                result.best_policy = target_net.copy()

    result.final_reward = _greedy_reward(policy_net, env_config) if epochs else 0.0
    if epochs and result.final_reward > best:
        best = result.final_reward
        result.best_policy = policy_net.copy()
    result.best_reward = best if np.isfinite(best) else result.final_reward
    return result


def save_policy(path, net: QNetwork, meta: dict | None = None) -> None:
    """Versioned checkpoint: architecture + weights + caller metadata."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "meta": meta or {},
    }
    arrays = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, header=json.dumps(payload, sort_keys=True), **arrays)


def load_policy(path):
    """Returns (QNetwork, meta dict)."""
    with np.load(path, allow_pickle=False) as data:
        payload = json.loads(str(data["header"]))
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        sizes = payload["layer_sizes"]
        weights = [data[f"w{i}"] for i in range(len(sizes) - 1)]
        biases = [data[f"b{i}"] for i in range(len(sizes) - 1)]
    net = QNetwork(sizes, weights=weights, biases=biases)
    return net, payload["meta"]
