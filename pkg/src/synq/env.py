"""Sequential decision environment around a coupled oscillator ensemble.

Observations are a sliding window of the temporally re-represented mean
field.  The re-representation replaces each raw sample with a weighted
sum of delayed copies of the signal,

    T(t) = sum_{n=1..n_parts} part_weight * X(t - (n-1)*onset_delay),

with the default three parts of weight 0.33 each.  The per-step reward

    R = 100 / ((X(t) - W)^2 + 10) + 3 / (|a| + 10)

rewards the mean field staying near the average W of the raw window and
penalizes large stimulation pulses; it is bounded in (0, 10.3].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import (
    EnsembleConfig,
    EnsembleState,
    init_ensemble,
    mean_field,
    step_ensemble,
)


class ActionOutOfBounds(ValueError):
    """Raised in reject mode when |action| exceeds the configured bound."""


@dataclass
class TemporalRepConfig:
    n_parts: int = 3
    part_weight: float = 0.33
    onset_delay: int = 1

    def validate(self) -> None:
        if self.n_parts < 1:
            raise ValueError(f"n_parts must be >= 1, got {self.n_parts}")
        if not self.part_weight > 0:
            raise ValueError(f"part_weight must be positive, got {self.part_weight}")
        if self.onset_delay < 1:
            raise ValueError(f"onset_delay must be >= 1, got {self.onset_delay}")


@dataclass
class EnvConfig:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    temporal: TemporalRepConfig = field(default_factory=TemporalRepConfig)
    window_len: int = 250
    a_max: float = 1.0
    episode_len: int = 1000
    warmup_steps: int = 1000
    clamp_actions: bool = True

    def validate(self) -> None:
        self.ensemble.validate()
        self.temporal.validate()
        if self.window_len < 1:
            raise ValueError(f"window_len must be >= 1, got {self.window_len}")
        if not self.a_max > 0:
            raise ValueError(f"a_max must be positive, got {self.a_max}")
        if self.episode_len < 1:
            raise ValueError(f"episode_len must be >= 1, got {self.episode_len}")
        if self.warmup_steps < 0:
            raise ValueError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.window_len < self.temporal.n_parts * self.temporal.onset_delay:
            raise ValueError(
                "window_len must cover the temporal representation span "
                f"({self.temporal.n_parts} x {self.temporal.onset_delay})"
            )


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


@dataclass
class EnvSnapshot:
    """Frozen environment moment for cheap replay of one episode."""

    state: EnsembleState
    raw: list
    transformed: list
    episode_steps: int


def temporal_representation(raw_history, cfg: TemporalRepConfig) -> float:
    """Transformed sample at the newest index of the raw history.

    Histories shorter than the representation span are padded on the left
    with their earliest sample.
    """
    last = len(raw_history) - 1
    if last < 0:
        raise ValueError("raw_history is empty")
    total = 0.0
    for n in range(cfg.n_parts):
        idx = max(last - n * cfg.onset_delay, 0)
        total += raw_history[idx]
    return cfg.part_weight * total


def compute_reward(mean_field_now: float, window_mean: float, action_mag: float) -> float:
    diff = mean_field_now - window_mean
    return 100.0 / (diff * diff + 10.0) + 3.0 / (action_mag + 10.0)


def _padded_window(samples: list, k: int) -> np.ndarray:
    """Last k samples, left-padded with the earliest one when short."""
    window = np.empty(k)
    n = len(samples)
    if n >= k:
        window[:] = samples[n - k:]
    else:
        window[: k - n] = samples[0]
        window[k - n:] = samples
    return window


class SuppressionEnv:
    """Stateful environment: reset() -> observation, step() -> StepResult.

    A single internal generator drives ensemble initialization, so
    resetting with the same seed reproduces episodes exactly; reset()
    without a seed continues the stream (fresh but reproducible
    episodes).
    """

    def __init__(self, cfg: EnvConfig):
        cfg.validate()
        self.cfg = cfg
        self._rng = np.random.default_rng(cfg.ensemble.seed)
        self._state: EnsembleState | None = None
        self._raw: list[float] = []
        self._transformed: list[float] = []
        self._episode_steps = 0

    @property
    def state(self) -> EnsembleState:
        return self._state

    @property
    def observation_dim(self) -> int:
        return self.cfg.window_len

    def _record(self, mf: float) -> None:
        self._raw.append(mf)
        self._transformed.append(
            temporal_representation(self._raw, self.cfg.temporal)
        )

    def _observation(self) -> np.ndarray:
        return _padded_window(self._transformed, self.cfg.window_len)

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._state = init_ensemble(self.cfg.ensemble, self._rng)
        self._raw = []
        self._transformed = []
        self._episode_steps = 0
        self._record(mean_field(self._state))
        for _ in range(self.cfg.warmup_steps):
            self._state = step_ensemble(self._state, 0.0, self.cfg.ensemble)
            self._record(mean_field(self._state))
        return self._observation()

    def snapshot(self) -> EnvSnapshot:
        """Freeze the current state and histories (generator state excluded)."""
        if self._state is None:
            raise RuntimeError("snapshot() before reset()")
        return EnvSnapshot(self._state.copy(), list(self._raw),
                           list(self._transformed), self._episode_steps)

    def restore(self, snap: EnvSnapshot) -> np.ndarray:
        """Rewind to a snapshot and return its observation."""
        self._state = snap.state.copy()
        self._raw = list(snap.raw)
        self._transformed = list(snap.transformed)
        self._episode_steps = snap.episode_steps
        return self._observation()

    def step(self, action: float) -> StepResult:
        if self._state is None:
            raise RuntimeError("step() before reset()")
        a = float(action)
        a_max = self.cfg.a_max
        if abs(a) > a_max:
            if not self.cfg.clamp_actions:
                raise ActionOutOfBounds(f"|{a}| exceeds bound {a_max}")
            a = max(-a_max, min(a_max, a))
        self._state = step_ensemble(self._state, a, self.cfg.ensemble)
        mf = mean_field(self._state)
        self._record(mf)
        window_mean = float(_padded_window(self._raw, self.cfg.window_len).mean())
        reward = compute_reward(mf, window_mean, abs(a))
        self._episode_steps += 1
        done = self._episode_steps >= self.cfg.episode_len
        info = {"mean_field": mf, "action": a, "t": self._state.t}
        return StepResult(self._observation(), reward, done, info)
