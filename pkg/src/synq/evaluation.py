"""Suppression metrics and the two-phase evaluation protocol.

A run first lets the ensemble oscillate freely for ``pre_steps``, then
hands control to a policy for ``post_steps``.  The suppression
coefficient compares mean-field spread before and after control onset,

    S = sigma(before) / sigma(after),

using population standard deviations; the mean point of convergence M is
the average mean field after discarding a post-onset transient, and the
energy is the summed magnitude of all control pulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .env import EnvConfig, SuppressionEnv


@dataclass
class EvalProtocol:
    pre_steps: int = 10_000
    post_steps: int = 10_000
    transient: int = 500
    measure_window: int = 5_000

    def validate(self) -> None:
        if self.pre_steps < 2 or self.post_steps < 2:
            raise ValueError("pre_steps and post_steps must be >= 2")
        if not 0 <= self.transient < self.post_steps:
            raise ValueError("transient must satisfy 0 <= transient < post_steps")
        if self.measure_window < 2:
            raise ValueError("measure_window must be >= 2")
        if self.measure_window > min(self.pre_steps, self.post_steps - self.transient):
            raise ValueError(
                "measure_window must fit in the pre phase and the "
                "post-transient controlled phase"
            )


@dataclass
class TraceRecord:
    step: int
    time: float
    mean_field: float
    action: float
    reward: float


@dataclass
class SuppressionReport:
    seed: int
    regime: str
    sigma_before: float
    sigma_after: float
    suppression: float
    convergence_mean: float
    energy: float
    mean_reward: float
    degenerate_after: bool = False


def suppression_coefficient(before, after) -> float:
    """sigma(before) / sigma(after) with population standard deviations.

    A perfectly quenched controlled phase (sigma(after) == 0) reports
    +inf rather than failing; callers can flag it.
    """
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    if before.size < 2 or after.size < 2:
        raise ValueError("slices must hold at least 2 samples")
    sigma_after = float(after.std())
    if sigma_after == 0.0:
        return math.inf
    return float(before.std()) / sigma_after


def energy(actions) -> float:
    """Sum of absolute stimulation amplitudes."""
    if len(actions) == 0:
        return 0.0
    return float(np.abs(np.asarray(actions, dtype=float)).sum())


def mean_point_of_convergence(trace, transient: int) -> float:
    """Average mean field after dropping the first ``transient`` samples."""
    trace = np.asarray(trace, dtype=float)
    if trace.size <= transient:
        raise ValueError(
            f"trace of {trace.size} samples cannot drop a {transient}-step transient"
        )
    return float(trace[transient:].mean())


def zero_policy(obs: np.ndarray) -> float:
    return 0.0


def random_policy(a_max: float, rng: np.random.Generator):
    """Uniform pulses in [-a_max, a_max]."""
    def policy(obs: np.ndarray) -> float:
        return float(rng.uniform(-a_max, a_max))
    return policy


def agent_policy(agent):
    """Greedy (noise-free) policy of a trained agent."""
    def policy(obs: np.ndarray) -> float:
        return agent.select_action(obs, explore=False)
    return policy


def run_evaluation(
    env_cfg: EnvConfig,
    policy,
    protocol: EvalProtocol,
    seed: int,
) -> tuple[SuppressionReport, list[TraceRecord]]:
    """Uncontrolled phase, controlled phase, and the report comparing them.

    The environment runs as one continuous rollout (episode boundaries do
    not reset it); sigma_before comes from the tail measure_window of the
    uncontrolled phase, sigma_after and M from the controlled phase after
    the transient, energy and mean reward from the whole controlled
    phase.  Deterministic for a fixed seed, config and policy.
    """
    protocol.validate()
    cfg = replace(env_cfg, episode_len=protocol.pre_steps + protocol.post_steps)
    env = SuppressionEnv(cfg)
    obs = env.reset(seed=seed)

    traces: list[TraceRecord] = []
    pre_mf = np.empty(protocol.pre_steps)
    for i in range(protocol.pre_steps):
        result = env.step(0.0)
        obs = result.observation
        pre_mf[i] = result.info["mean_field"]
        traces.append(TraceRecord(i, result.info["t"], result.info["mean_field"],
                                  0.0, result.reward))

    post_mf = np.empty(protocol.post_steps)
    post_actions = np.empty(protocol.post_steps)
    post_rewards = np.empty(protocol.post_steps)
    for i in range(protocol.post_steps):
        action = float(policy(obs))
        result = env.step(action)
        obs = result.observation
        post_mf[i] = result.info["mean_field"]
        post_actions[i] = result.info["action"]
        post_rewards[i] = result.reward
        traces.append(TraceRecord(protocol.pre_steps + i, result.info["t"],
                                  result.info["mean_field"],
                                  result.info["action"], result.reward))

    before = pre_mf[-protocol.measure_window:]
    after = post_mf[protocol.transient:protocol.transient + protocol.measure_window]
    sigma_before = float(before.std())
    sigma_after = float(after.std())
    report = SuppressionReport(
        seed=seed,
        regime=env_cfg.ensemble.regime.value,
        sigma_before=sigma_before,
        sigma_after=sigma_after,
        suppression=suppression_coefficient(before, after),
        convergence_mean=mean_point_of_convergence(
            post_mf[: protocol.transient + protocol.measure_window],
            protocol.transient,
        ),
        energy=energy(post_actions),
        mean_reward=float(post_rewards.mean()),
        degenerate_after=sigma_after == 0.0,
    )
    return report, traces


REPORT_CSV_HEADER = "seed,regime,sigma_before,sigma_after,S,M,energy,mean_reward"


def report_csv_row(report: SuppressionReport) -> str:
    values = [
        str(report.seed),
        report.regime,
        repr(report.sigma_before),
        repr(report.sigma_after),
        repr(report.suppression),
        repr(report.convergence_mean),
        repr(report.energy),
        repr(report.mean_reward),
    ]
    return ",".join(values)


def report_text(report: SuppressionReport) -> str:
    """Flat key-value block, one field per line."""
    lines = [
        f"seed = {report.seed}",
        f"regime = {report.regime}",
        f"sigma_before = {report.sigma_before!r}",
        f"sigma_after = {report.sigma_after!r}",
        f"S = {report.suppression!r}",
        f"M = {report.convergence_mean!r}",
        f"energy = {report.energy!r}",
        f"mean_reward = {report.mean_reward!r}",
        f"degenerate_after = {str(report.degenerate_after).lower()}",
    ]
    return "\n".join(lines) + "\n"
