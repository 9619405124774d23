"""Twin-delayed deterministic policy-gradient agent.

The critic target for a sampled transition (S, a, R, S', done) is

    y = R + (1 - done) * gamma * min(Q1'(S', a~), Q2'(S', a~)),
    a~ = clamp(pi'(S') + eps),  eps ~ clip(N(0, sigma), -c, c),

i.e. clipped double-Q bootstrapping from the smoothed target policy.
Both critics regress on the same y; the actor maximizes Q1(S, pi(S)) and
is updated (together with all three target networks) every
``policy_delay``-th train step.

One generator drives all agent randomness in a fixed order: network
initialization, then per-step exploration noise, then per-update
smoothing noise, then batch index sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import AdamState, LayerSpec, Network, adam_step, soft_update


class BufferTooSmall(RuntimeError):
    """train_step() called before the replay buffer can serve a batch."""


@dataclass
class Td3Hyperparams:
    gamma: float = 0.99
    tau: float = 0.005
    policy_noise_sigma: float = 0.2
    noise_clip: float = 0.5
    exploration_sigma: float = 0.1
    policy_delay: int = 2
    batch_size: int = 128
    buffer_capacity: int = 200_000
    learn_start: int = 1000
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    hidden_dim: int = 64
    # Saturation guard: quadratic penalty on the actor's pre-tanh output
    # beyond this magnitude.  Its gradient bypasses the tanh, so a railed
    # policy can always steer back once the critic favors the interior;
    # inside the cap it has no effect (tanh(3) is already 0.995).
    pretanh_cap: float = 3.0
    pretanh_penalty: float = 1.0
    # Actor-side pulse-economy regularizer: adds action_reg * mean(a^2) to
    # the actor loss.  Critic values are flat across a wide band of
    # suppressing amplitudes; this breaks the tie toward cheap pulses
    # without touching the environment reward.
    action_reg: float = 1.0
    # Episode ends here are time limits, not absorbing states, so the
    # bootstrap is not truncated by default.
    truncate_at_episode_end: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        for name in ("policy_noise_sigma", "noise_clip", "exploration_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.policy_delay < 1:
            raise ValueError(f"policy_delay must be >= 1, got {self.policy_delay}")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity must be >= batch_size")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")


@dataclass
class Transition:
    observation: np.ndarray
    action: float
    reward: float
    next_observation: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring store of transitions, sampled uniformly.

    Storage grows geometrically up to capacity, so small runs never
    allocate the full ring.  Once full, inserts overwrite the oldest
    entries.
    """

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.size = 0
        self._cursor = 0
        self._allocated = 0
        self._obs = self._next_obs = self._actions = None
        self._rewards = self._dones = None

    def _grow(self, needed: int) -> None:
        new_alloc = min(self.capacity, max(needed, 1024, 2 * self._allocated))
        def expand(arr, shape):
            fresh = np.zeros(shape)
            if arr is not None:
                fresh[: self._allocated] = arr
            return fresh
        self._obs = expand(self._obs, (new_alloc, self.obs_dim))
        self._next_obs = expand(self._next_obs, (new_alloc, self.obs_dim))
        self._actions = expand(self._actions, new_alloc)
        self._rewards = expand(self._rewards, new_alloc)
        self._dones = expand(self._dones, new_alloc)
        self._allocated = new_alloc

    def add(self, obs, action: float, reward: float, next_obs, done: bool) -> None:
        if self._cursor >= self._allocated:
            self._grow(self._cursor + 1)
        i = self._cursor
        self._obs[i] = obs
        self._next_obs[i] = next_obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._dones[i] = float(done)
        self._cursor = (self._cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self.size, batch_size)
        return {
            "obs": self._obs[idx],
            "actions": self._actions[idx],
            "rewards": self._rewards[idx],
            "next_obs": self._next_obs[idx],
            "dones": self._dones[idx],
        }

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first (for inspection and tests)."""
        if self.size < self.capacity:
            order = range(self.size)
        else:
            order = [(self._cursor + k) % self.capacity for k in range(self.capacity)]
        return [
            Transition(self._obs[i].copy(), float(self._actions[i]),
                       float(self._rewards[i]), self._next_obs[i].copy(),
                       bool(self._dones[i]))
            for i in order
        ]


def _actor_specs(obs_dim: int, hidden: int) -> list[LayerSpec]:
    return [
        LayerSpec(obs_dim, hidden, "relu"),
        LayerSpec(hidden, hidden, "relu"),
        LayerSpec(hidden, 1, "tanh"),
    ]


def _critic_specs(obs_dim: int, hidden: int) -> list[LayerSpec]:
    return [
        LayerSpec(obs_dim + 1, hidden, "relu"),
        LayerSpec(hidden, hidden, "relu"),
        LayerSpec(hidden, 1, "identity"),
    ]


class Agent:
    """Actor, twin critics, their target copies, and the update rules."""

    def __init__(self, obs_dim: int, a_max: float, hp: Td3Hyperparams,
                 rng: np.random.Generator):
        hp.validate()
        self.obs_dim = obs_dim
        self.a_max = a_max
        self.hp = hp
        self.rng = rng
        h = hp.hidden_dim
        self.actor = Network.initialize(_actor_specs(obs_dim, h), rng)
        self.critic1 = Network.initialize(_critic_specs(obs_dim, h), rng)
        self.critic2 = Network.initialize(_critic_specs(obs_dim, h), rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = AdamState.for_network(self.actor, hp.actor_lr)
        self.critic1_opt = AdamState.for_network(self.critic1, hp.critic_lr)
        self.critic2_opt = AdamState.for_network(self.critic2, hp.critic_lr)
        self.update_count = 0

    def clone(self) -> "Agent":
        """Deep copy sharing no arrays; the clone gets a detached generator."""
        other = Agent.__new__(Agent)
        other.obs_dim = self.obs_dim
        other.a_max = self.a_max
        other.hp = self.hp
        other.rng = np.random.default_rng(0)
        for name in ("actor", "critic1", "critic2",
                     "actor_target", "critic1_target", "critic2_target"):
            setattr(other, name, getattr(self, name).copy())
        for name, lr in (("actor_opt", self.hp.actor_lr),
                         ("critic1_opt", self.hp.critic_lr),
                         ("critic2_opt", self.hp.critic_lr)):
            src: AdamState = getattr(self, name)
            dst = AdamState(lr=src.lr, beta1=src.beta1, beta2=src.beta2,
                            eps=src.eps, step_count=src.step_count,
                            m=[(mw.copy(), mb.copy()) for mw, mb in src.m],
                            v=[(vw.copy(), vb.copy()) for vw, vb in src.v])
            setattr(other, name, dst)
        other.update_count = self.update_count
        return other

    # ------------------------------------------------------------------ #
    # acting

    def select_action(self, obs: np.ndarray, explore: bool = False) -> float:
        """Deterministic a_max*actor(obs); optionally with Gaussian noise."""
        a = float(self.actor.forward(obs)[0]) * self.a_max
        if explore and self.hp.exploration_sigma > 0.0:
            a += self.rng.normal(0.0, self.hp.exploration_sigma * self.a_max)
        return max(-self.a_max, min(self.a_max, a))

    def smoothed_target_actions(self, next_obs: np.ndarray,
                                noise: np.ndarray) -> np.ndarray:
        """Target-policy actions perturbed by pre-drawn clipped noise."""
        a = self.actor_target.forward(next_obs) * self.a_max
        return np.clip(a + noise[:, None], -self.a_max, self.a_max)

    def smoothed_target_action(self, next_obs: np.ndarray,
                               rng: np.random.Generator) -> float:
        """Single-observation variant drawing its own smoothing noise."""
        noise = self._draw_smoothing_noise(1, rng)
        return float(self.smoothed_target_actions(next_obs[None, :], noise)[0, 0])

    def _draw_smoothing_noise(self, n: int, rng: np.random.Generator) -> np.ndarray:
        hp = self.hp
        eps = rng.normal(0.0, hp.policy_noise_sigma, n) if hp.policy_noise_sigma > 0 \
            else np.zeros(n)
        return np.clip(eps, -hp.noise_clip, hp.noise_clip)

    # ------------------------------------------------------------------ #
    # learning

    def compute_target(self, batch: dict, rng: np.random.Generator | None = None,
                       *, noise: np.ndarray | None = None) -> np.ndarray:
        """Clipped double-Q targets y for a sampled batch.

        Smoothing noise is drawn from ``rng`` unless pre-drawn noise is
        supplied (train_step draws it up front to keep a fixed schedule).
        """
        hp = self.hp
        if noise is None:
            noise = self._draw_smoothing_noise(
                len(batch["rewards"]), rng if rng is not None else self.rng)
        next_actions = self.smoothed_target_actions(batch["next_obs"], noise)
        cin = np.concatenate([batch["next_obs"], next_actions], axis=1)
        q1 = self.critic1_target.forward(cin)[:, 0]
        q2 = self.critic2_target.forward(cin)[:, 0]
        q_min = np.minimum(q1, q2)
        if hp.truncate_at_episode_end:
            not_done = 1.0 - batch["dones"]
        else:
            not_done = np.ones_like(batch["dones"])
        return batch["rewards"] + not_done * hp.gamma * q_min

    def update_critics(self, batch: dict, targets: np.ndarray) -> tuple[float, float]:
        """One MSE descent step per critic toward the shared targets."""
        cin = np.concatenate([batch["obs"], batch["actions"][:, None]], axis=1)
        n = len(targets)
        losses = []
        for critic, opt in ((self.critic1, self.critic1_opt),
                            (self.critic2, self.critic2_opt)):
            q = critic.forward(cin)[:, 0]
            residual = q - targets
            losses.append(float(np.mean(residual * residual)))
            upstream = (2.0 / n) * residual[:, None]
            grads, _ = critic.backward(cin, upstream)
            adam_step(critic, grads, opt)
        return losses[0], losses[1]

    def _pretanh_view(self) -> Network:
        """The actor with an identity output, sharing parameter arrays."""
        specs = list(self.actor.specs)
        specs[-1] = LayerSpec(specs[-1].in_dim, specs[-1].out_dim, "identity")
        return Network(specs, self.actor.weights, self.actor.biases)

    def update_actor_and_targets(self, batch: dict) -> float:
        """Ascend mean Q1(S, pi(S)) through frozen critic1, then track targets."""
        obs = batch["obs"]
        n = obs.shape[0]
        actions = self.actor.forward(obs) * self.a_max
        cin = np.concatenate([obs, actions], axis=1)
        q = self.critic1.forward(cin)[:, 0]
        actor_loss = -float(q.mean())
        upstream = np.full((n, 1), -1.0 / n)
        _, cin_grad = self.critic1.backward(cin, upstream)
        dq_da = cin_grad[:, -1:] * self.a_max
        if self.hp.action_reg > 0.0:
            actor_loss += self.hp.action_reg * float(np.mean(actions * actions))
            dq_da = dq_da + (2.0 * self.hp.action_reg / n) * actions * self.a_max
        grads, _ = self.actor.backward(obs, dq_da)
        if self.hp.pretanh_penalty > 0.0:
            view = self._pretanh_view()
            pre = view.forward(obs)
            excess = np.sign(pre) * np.maximum(np.abs(pre) - self.hp.pretanh_cap, 0.0)
            if np.any(excess):
                actor_loss += self.hp.pretanh_penalty * float(
                    np.mean(excess * excess))
                pen_grads, _ = view.backward(
                    obs, (2.0 * self.hp.pretanh_penalty / n) * excess)
                grads = [(dw + pw, db + pb)
                         for (dw, db), (pw, pb) in zip(grads, pen_grads)]
        adam_step(self.actor, grads, self.actor_opt)
        soft_update(self.actor_target, self.actor, self.hp.tau)
        soft_update(self.critic1_target, self.critic1, self.hp.tau)
        soft_update(self.critic2_target, self.critic2, self.hp.tau)
        return actor_loss

    def train_step(self, buffer: ReplayBuffer) -> dict:
        """Sample a batch, refresh critics, and periodically the actor.

        Draw order per step: smoothing noise, then batch indices.
        """
        hp = self.hp
        if buffer.size < max(hp.batch_size, hp.learn_start):
            raise BufferTooSmall(
                f"buffer holds {buffer.size} transitions; need "
                f"{max(hp.batch_size, hp.learn_start)}"
            )
        noise = self._draw_smoothing_noise(hp.batch_size, self.rng)
        batch = buffer.sample(hp.batch_size, self.rng)
        targets = self.compute_target(batch, noise=noise)
        loss1, loss2 = self.update_critics(batch, targets)
        self.update_count += 1
        actor_loss = None
        if self.update_count % hp.policy_delay == 0:
            actor_loss = self.update_actor_and_targets(batch)
        return {
            "critic1_loss": loss1,
            "critic2_loss": loss2,
            "actor_loss": actor_loss,
            "mean_target": float(targets.mean()),
        }

    # ------------------------------------------------------------------ #
    # parameter export for checkpoints

    _NET_NAMES = ("actor", "critic1", "critic2",
                  "actor_target", "critic1_target", "critic2_target")

    def export_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for net_name in self._NET_NAMES:
            net: Network = getattr(self, net_name)
            for key, arr in net.export_params().items():
                out[f"{net_name}.{key}"] = arr
        for opt_name in ("actor_opt", "critic1_opt", "critic2_opt"):
            opt: AdamState = getattr(self, opt_name)
            for i, ((mw, mb), (vw, vb)) in enumerate(zip(opt.m, opt.v)):
                out[f"{opt_name}.m.{i}.w"] = mw.copy()
                out[f"{opt_name}.m.{i}.b"] = mb.copy()
                out[f"{opt_name}.v.{i}.w"] = vw.copy()
                out[f"{opt_name}.v.{i}.b"] = vb.copy()
        return out

    def import_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for net_name in self._NET_NAMES:
            net: Network = getattr(self, net_name)
            prefix = f"{net_name}."
            net.import_params({
                key[len(prefix):]: arr for key, arr in arrays.items()
                if key.startswith(prefix) and key.count(".") == 3
            })
        for opt_name in ("actor_opt", "critic1_opt", "critic2_opt"):
            opt: AdamState = getattr(self, opt_name)
            for i in range(len(opt.m)):
                opt.m[i] = (arrays[f"{opt_name}.m.{i}.w"].copy(),
                            arrays[f"{opt_name}.m.{i}.b"].copy())
                opt.v[i] = (arrays[f"{opt_name}.v.{i}.w"].copy(),
                            arrays[f"{opt_name}.v.{i}.b"].copy())
