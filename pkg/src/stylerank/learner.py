"""Double deep Q-learning of style-adherent policies.

The value network is a small numpy multilayer perceptron with hand-written
backpropagation, trained with a smooth-L1 (Huber) loss, Adam with decoupled
weight decay, uniform experience replay and soft target-network updates.

Actions are flattened as ``index = block * num_colors + color``.
"""

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._seeding import as_rng
from .game import HIDDEN, WHITE, GridConfig, generate_grid, init_state, is_terminal, reveal_phase, step
from .styles import StyleSpec, preference_reward, resolve_styles


class TrainingDivergence(RuntimeError):
    """The loss became non-finite during training."""


# ---------------------------------------------------------------------------
# state encoding


def state_codes(state, num_colors):
    """Column index in ``CR*`` per block: colors, then hidden, then white."""
    codes = np.array(state.colors, dtype=np.int16)
    codes[codes == HIDDEN] = num_colors
    codes[codes == WHITE] = num_colors + 1
    return codes


def one_hot(codes, num_colors):
    codes = np.asarray(codes)
    eye = np.eye(num_colors + 2)
    return eye[codes]


def encode_state(state, num_colors):
    """One-hot ``(|B|, |CR| + 2)`` matrix; hidden colors are not observable."""
    return one_hot(state_codes(state, num_colors), num_colors)


def _flat_features(codes, num_colors):
    x = one_hot(codes, num_colors)
    return x.reshape(x.shape[0], -1) if x.ndim == 3 else x.reshape(1, -1)


# ---------------------------------------------------------------------------
# network


class QNetwork:
    """Fully connected ReLU network mapping a flattened state to action values."""

    def __init__(self, sizes, rng=None):
        rng = as_rng(rng)
        self.sizes = tuple(int(s) for s in sizes)
        self.params = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, size=fan_out))

    @classmethod
    def from_params(cls, params):
        net = cls.__new__(cls)
        net.params = [np.array(p, dtype=float) for p in params]
        net.sizes = (net.params[0].shape[0],) + tuple(w.shape[1] for w in net.params[::2])
        return net

    def copy(self):
        return QNetwork.from_params(self.params)

    def forward(self, x, return_cache=False):
        h = np.asarray(x, dtype=float)
        cache = [h]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ w + b
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return (h, cache) if return_cache else h

    __call__ = forward

    def backward(self, cache, grad_out):
        """Gradients of a scalar loss w.r.t. every parameter, given dL/d(output)."""
        grads = [None] * len(self.params)
        g = grad_out
        n_layers = len(self.params) // 2
        for i in reversed(range(n_layers)):
            h_in = cache[i]
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.params[2 * i].T) * (cache[i] > 0)
        return grads


def soft_update(target_net, policy_net, tau):
    """Move target parameters toward policy parameters: t <- tau*p + (1-tau)*t."""
    if [p.shape for p in target_net.params] != [p.shape for p in policy_net.params]:
        raise ValueError("target and policy networks have different shapes")
    for t, p in zip(target_net.params, policy_net.params):
        t *= 1.0 - tau
        t += tau * p
    return target_net


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params, lr=5e-4, weight_decay=1e-5, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.weight_decay, self.betas, self.eps = lr, weight_decay, betas, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            p *= 1.0 - self.lr * self.weight_decay
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# loss and targets


def huber(d, beta=1.0):
    a = np.abs(d)
    return np.where(a < beta, 0.5 * d * d / beta, a - 0.5 * beta)


def huber_grad(d, beta=1.0):
    return np.where(np.abs(d) < beta, d / beta, np.sign(d))


def td_target(reward, next_features, terminal, target_net, gamma):
    """``r`` if terminal, else ``r + gamma * max_a' Q_target(s', a')``."""
    if terminal:
        return float(reward)
    q = target_net.forward(np.asarray(next_features, dtype=float).reshape(1, -1))
    return float(reward + gamma * q.max())


def td_targets(rewards, next_x, dones, target_net, gamma, policy_net=None):
    """Batched targets. With ``policy_net`` the next action is chosen by the
    online network and evaluated by the target network (canonical double DQN);
    without it the target network's own maximum is used."""
    q_next = target_net.forward(next_x)
    if policy_net is None:
        best = q_next.max(axis=1)
    else:
        a_star = policy_net.forward(next_x).argmax(axis=1)
        best = q_next[np.arange(len(a_star)), a_star]
    return rewards + gamma * (1.0 - dones) * best


def loss_and_grads(policy_net, target_net, batch, gamma, beta=1.0, double=False):
    x, actions, rewards, next_x, dones = batch
    y = td_targets(rewards, next_x, dones, target_net, gamma, policy_net if double else None)
    q, cache = policy_net.forward(x, return_cache=True)
    idx = np.arange(len(actions))
    d = q[idx, actions] - y
    loss = float(huber(d, beta).mean())
    grad_q = np.zeros_like(q)
    grad_q[idx, actions] = huber_grad(d, beta) / len(actions)
    return loss, policy_net.backward(cache, grad_q)


def train_step(policy_net, target_net, batch, optimizer, gamma=0.7, beta=1.0, double=False):
    """One optimizer update on ``batch``; returns the pre-update mean loss."""
    loss, grads = loss_and_grads(policy_net, target_net, batch, gamma, beta, double)
    if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads):
        raise TrainingDivergence(
            f"non-finite loss {loss!r} at optimizer step {optimizer.t + 1}; "
            f"max |param| = {max(float(np.abs(p).max()) for p in policy_net.params):.3g}"
        )
    optimizer.step(policy_net.params, grads)
    return loss


# ---------------------------------------------------------------------------
# replay memory


class ReplayBuffer:
    """Ring buffer of (state codes, action, reward, next codes, done)."""

    def __init__(self, capacity, num_blocks):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = int(capacity)
        self.num_blocks = num_blocks
        self._alloc = 0
        self._size = 0
        self._pos = 0
        self._grow(min(self.capacity, 1024))

    def _grow(self, n):
        def extend(arr, shape, dtype):
            new = np.zeros(shape, dtype=dtype)
            if arr is not None:
                new[: len(arr)] = arr
            return new

        self.s = extend(getattr(self, "s", None), (n, self.num_blocks), np.int16)
        self.s2 = extend(getattr(self, "s2", None), (n, self.num_blocks), np.int16)
        self.a = extend(getattr(self, "a", None), n, np.int64)
        self.r = extend(getattr(self, "r", None), n, float)
        self.done = extend(getattr(self, "done", None), n, float)
        self._alloc = n

    def __len__(self):
        return self._size

    def add(self, s, a, r, s2, done):
        if self._pos >= self._alloc:
            self._grow(min(self.capacity, 2 * self._alloc))
        i = self._pos
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = s, a, r, s2, done
        self._pos = (self._pos + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size, rng):
        idx = rng.integers(self._size, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx]


# ---------------------------------------------------------------------------
# hyperparameters and the estimator


@dataclass
class Hyperparams:
    gamma: float = 0.7
    lr: float = 5e-4
    weight_decay: float = 1e-5
    tau: float = 5e-3
    batch_size: int = 64
    episodes: int = 10000
    replay_capacity: int = 1_000_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    huber_beta: float = 1.0
    hidden: tuple = (128, 128)
    max_steps: int = 100
    target_rule: str = "max"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.target_rule not in ("max", "double"):
            raise ValueError("target_rule must be 'max' or 'double'")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def epsilon_at(episode, episodes, start=1.0, end=0.05, decay_fraction=0.5):
    """Exponential decay from ``start`` to ``end`` over the first fraction of episodes."""
    horizon = decay_fraction * episodes
    if horizon <= 0 or episode >= horizon:
        return end
    return start * (end / start) ** (episode / horizon)


def config_fingerprint(config, hp, style, seed):
    payload = {
        "grid": config.to_dict(),
        "hyperparams": hp.to_dict(),
        "style": [style.name, *style.vector],
        "seed": int(seed),
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


class DQNAgent(BaseEstimator):
    """Style-adherent policy trained by double deep Q-learning.

    Parameters mirror :class:`Hyperparams`; ``style`` is a :class:`StyleSpec`
    or a catalog name. ``fit`` takes a :class:`GridConfig` and trains without
    a co-player; the fitted agent acts greedily through :meth:`predict`.
    """

    def __init__(self, style="I", gamma=0.7, lr=5e-4, weight_decay=1e-5, tau=5e-3,
                 batch_size=64, episodes=10000, replay_capacity=1_000_000,
                 eps_start=1.0, eps_end=0.05, eps_decay_fraction=0.5, huber_beta=1.0,
                 hidden=(128, 128), max_steps=100, target_rule="max", random_state=0):
        self.style = style
        self.gamma = gamma
        self.lr = lr
        self.weight_decay = weight_decay
        self.tau = tau
        self.batch_size = batch_size
        self.episodes = episodes
        self.replay_capacity = replay_capacity
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_fraction = eps_decay_fraction
        self.huber_beta = huber_beta
        self.hidden = hidden
        self.max_steps = max_steps
        self.target_rule = target_rule
        self.random_state = random_state

    @classmethod
    def from_hyperparams(cls, hp, style="I", random_state=0):
        return cls(style=style, random_state=random_state, **asdict(hp))

    def hyperparams(self):
        params = self.get_params()
        params.pop("style")
        params.pop("random_state")
        return Hyperparams(**params)

    def _style_spec(self):
        if isinstance(self.style, StyleSpec):
            return self.style
        return resolve_styles([self.style])[0]

    def fit(self, config, graph=None):
        hp = self.hyperparams()
        style = self._style_spec()
        config = config if isinstance(config, GridConfig) else GridConfig(**config)
        graph = generate_grid(config) if graph is None else graph
        rng = as_rng(self.random_state)
        nb, nc = graph.num_blocks, config.num_colors
        n_actions = nb * nc
        net = QNetwork((nb * (nc + 2), *hp.hidden, n_actions), rng)
        target = net.copy()
        opt = AdamW(net.params, lr=hp.lr, weight_decay=hp.weight_decay)
        memory = ReplayBuffer(hp.replay_capacity, nb)
        double = hp.target_rule == "double"
        log = []

        for episode in range(hp.episodes):
            eps = epsilon_at(episode, hp.episodes, hp.eps_start, hp.eps_end, hp.eps_decay_fraction)
            state = init_state(graph, config, rng)
            ret, losses, steps = 0.0, [], 0
            sanctions = penalties = 0
            while not is_terminal(state) and steps < hp.max_steps:
                if state.is_idle():
                    state, _ = reveal_phase(state, rng)
                    continue
                codes = state_codes(state, nc)
                if rng.random() < eps:
                    a = int(rng.integers(n_actions))
                else:
                    a = int(np.argmax(net.forward(_flat_features(codes, nc))[0]))
                action = divmod(a, nc)
                pref = preference_reward(style, state, action, graph, nc)
                out = step(graph, state, [action], rng, num_colors=nc)
                ev = out.events[0]
                sanctions += ev.sanctioned
                penalties += ev.penalties
                reward = out.base_reward[0] + pref
                nxt = out.next_state
                while nxt.is_idle():
                    nxt, _ = reveal_phase(nxt, rng)
                done = is_terminal(nxt)
                memory.add(codes, a, reward, state_codes(nxt, nc), float(done))
                if len(memory) > hp.batch_size:
                    s, acts, r, s2, d = memory.sample(hp.batch_size, rng)
                    batch = (_flat_features(s, nc), acts, r, _flat_features(s2, nc), d)
                    losses.append(train_step(net, target, batch, opt, hp.gamma, hp.huber_beta, double))
                soft_update(target, net, hp.tau)
                ret += reward
                steps += 1
                state = nxt
            log.append({
                "episode": episode,
                "loss": float(np.mean(losses)) if losses else float("nan"),
                "return": ret,
                "epsilon": eps,
                "steps": steps,
                "sanctions": sanctions,
                "penalties": penalties,
            })

        self.q_network_ = net
        self.target_network_ = target
        self.graph_ = graph
        self.config_ = config
        self.num_colors_ = nc
        self.style_spec_ = style
        self.training_log_ = log
        self.fingerprint_ = config_fingerprint(config, hp, style, self.random_state)
        return self

    def decision_function(self, states):
        """Q-values, shape ``(n_states, |B| * |CR|)``."""
        check_is_fitted(self, "q_network_")
        codes = np.stack([state_codes(s, self.num_colors_) for s in states])
        return self.q_network_.forward(_flat_features(codes, self.num_colors_))

    def predict(self, states):
        """Greedy action index per state; ties go to the lowest index."""
        return np.argmax(self.decision_function(states), axis=1)

    def act(self, state):
        """Greedy ``(block, color)`` for one state."""
        return divmod(int(self.predict([state])[0]), self.num_colors_)

    @property
    def name(self):
        return self._style_spec().name

    # -- persistence ---------------------------------------------------------

    def training_log_csv(self):
        check_is_fitted(self, "training_log_")
        buf = io.StringIO()
        cols = ["episode", "loss", "return", "epsilon", "steps", "sanctions", "penalties"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.training_log_:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()

    def save(self, path):
        """Write a checkpoint: ``.npz`` with layer arrays ``W0, b0, ...`` and a
        JSON ``meta`` entry holding style, grid, hyperparameters, seed, fingerprint
        and layer shapes. ``path`` may also be a writable binary file object."""
        check_is_fitted(self, "q_network_")
        style = self.style_spec_
        meta = {
            "format": "stylerank-policy/1",
            "style": {"name": style.name, "tone": style.tone,
                      "difficulty": style.difficulty, "approach": style.approach},
            "grid": self.config_.to_dict(),
            "layout": self.graph_.cell_block.tolist(),
            "hyperparams": self.hyperparams().to_dict(),
            "random_state": int(self.random_state),
            "fingerprint": self.fingerprint_,
            "shapes": [list(p.shape) for p in self.q_network_.params],
        }
        arrays = {}
        for i, p in enumerate(self.q_network_.params):
            arrays[("W" if i % 2 == 0 else "b") + str(i // 2)] = p
        np.savez(path, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path):
        from .game import BlockGraph

        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            n_layers = len(meta["shapes"]) // 2
            params = []
            for i in range(n_layers):
                params += [data[f"W{i}"], data[f"b{i}"]]
        style = StyleSpec(**meta["style"])
        hp = Hyperparams.from_dict(meta["hyperparams"])
        agent = cls.from_hyperparams(hp, style=style, random_state=meta["random_state"])
        agent.q_network_ = QNetwork.from_params(params)
        agent.config_ = GridConfig.from_dict(meta["grid"])
        agent.graph_ = BlockGraph(meta["layout"])
        agent.num_colors_ = agent.config_.num_colors
        agent.style_spec_ = style
        agent.fingerprint_ = meta["fingerprint"]
        agent.training_log_ = []
        return agent


def train_policy(style, config, hp=None, random_state=0, graph=None):
    """Train and return a fitted :class:`DQNAgent` for ``style``."""
    hp = Hyperparams() if hp is None else hp
    return DQNAgent.from_hyperparams(hp, style=style, random_state=random_state).fit(config, graph)
