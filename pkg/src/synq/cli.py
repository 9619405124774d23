"""Command-line harness: simulate, train and evaluate runs.

Every command takes a configuration file (defaults apply when omitted),
derives all randomness from the single master seed, and echoes the fully
resolved configuration into the output directory so a run can be
reproduced from its artifacts.  Trace CSVs use shortest round-trip float
formatting, so parsing them back loses nothing.

Exit codes: 0 success, 1 usage, 2 configuration, 3 numerical divergence,
4 checkpoint mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .checkpoint import (
    CheckpointError,
    CheckpointMismatch,
    load_agent,
    save_agent,
)
from .config import ConfigError, RunConfig, default_config, format_config, load_config
from .dynamics import NumericalDivergence
from .env import SuppressionEnv
from .evaluation import (
    REPORT_CSV_HEADER,
    agent_policy,
    random_policy,
    report_csv_row,
    report_text,
    run_evaluation,
    zero_policy,
)
from .td3 import Agent, ReplayBuffer

TRACE_CSV_HEADER = "step,time,mean_field,action,reward"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_trace_csv(path, records) -> None:
    lines = [TRACE_CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.step},{_fmt(r.time)},{_fmt(r.mean_field)},"
            f"{_fmt(r.action)},{_fmt(r.reward)}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        cfg["out.dir"] = args.out
    return cfg


def _prepare_out_dir(cfg: RunConfig) -> str:
    out_dir = cfg["out.dir"]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.cfg"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(cfg))
    return out_dir


def _spawn_streams(seed: int):
    """Independent child streams: environment, agent, evaluation env."""
    return np.random.SeedSequence(seed).spawn(3)


# ---------------------------------------------------------------------- #
# commands


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    if args.steps is not None:
        cfg["simulate.steps"] = args.steps
    cfg.validate()
    out_dir = _prepare_out_dir(cfg)
    steps = cfg["simulate.steps"]
    env_ss, _, _ = _spawn_streams(cfg.seed)

    env = SuppressionEnv(cfg.env_config())
    env.reset(seed=env_ss)
    records = []
    for step in range(steps):
        result = env.step(0.0)
        records.append(_TraceRow(step, result))
    trace_path = os.path.join(out_dir, "trace.csv")
    _write_trace_csv(trace_path, records)
    print(f"wrote {trace_path} ({steps} rows)")
    return 0


class _TraceRow:
    __slots__ = ("step", "time", "mean_field", "action", "reward")

    def __init__(self, step, result):
        self.step = step
        self.time = result.info["t"]
        self.mean_field = result.info["mean_field"]
        self.action = result.info["action"]
        self.reward = result.reward


def _greedy_rollout_reward(agent: Agent, env: SuppressionEnv, seed, steps: int) -> float:
    """Mean reward of a noise-free rollout on a freshly seeded episode."""
    obs = env.reset(seed=seed)
    total = 0.0
    for _ in range(steps):
        result = env.step(agent.select_action(obs, explore=False))
        obs = result.observation
        total += result.reward
    return total / steps


def _behaviour_action(agent: Agent, obs, step: int, dither: float,
                      a_max: float) -> float:
    """Training-time action: uniform before learn_start for broad coverage,
    then noisy-greedy with an occasional uniform draw so the critics keep
    seeing the whole action range.  All draws come from the agent's stream."""
    if step <= agent.hp.learn_start:
        return float(agent.rng.uniform(-a_max, a_max))
    if dither > 0.0 and agent.rng.uniform() < dither:
        return float(agent.rng.uniform(-a_max, a_max))
    return agent.select_action(obs, explore=True)


def cmd_train(args) -> int:
    from dataclasses import replace

    cfg = _load_run_config(args)
    if args.steps is not None:
        cfg["train.steps"] = args.steps
    cfg.validate()
    out_dir = _prepare_out_dir(cfg)
    checkpoint_path = args.checkpoint or os.path.join(out_dir, "checkpoint.synq")
    log_path = args.log or os.path.join(out_dir, "train_log.csv")

    env_cfg = cfg.env_config()
    hp = cfg.td3_hyperparams()
    steps = cfg["train.steps"]
    eval_interval = cfg["train.eval_interval"]
    eval_rollout = cfg["train.eval_rollout"]
    env_ss, agent_ss, eval_ss = _spawn_streams(cfg.seed)

    env = SuppressionEnv(env_cfg)
    obs = env.reset(seed=env_ss)
    agent = Agent(env_cfg.window_len, env_cfg.a_max, hp,
                  np.random.default_rng(agent_ss))
    buffer = ReplayBuffer(hp.buffer_capacity, env_cfg.window_len)
    # Evaluation never touches the training streams: cloned agent, its own
    # environment, and the same eval episode every time for comparability.
    eval_env = SuppressionEnv(replace(env_cfg, episode_len=max(eval_rollout, 1)))

    log_lines = ["step,eval_reward"]
    learn_threshold = max(hp.batch_size, hp.learn_start)
    dither = cfg["train.dither"]
    for step in range(1, steps + 1):
        action = _behaviour_action(agent, obs, step, dither, env_cfg.a_max)
        result = env.step(action)
        buffer.add(obs, action, result.reward, result.observation, result.done)
        obs = result.observation
        if buffer.size >= learn_threshold:
            agent.train_step(buffer)
        if result.done:
            obs = env.reset()
        if eval_interval > 0 and step % eval_interval == 0:
            reward = _greedy_rollout_reward(agent.clone(), eval_env, eval_ss,
                                            eval_rollout)
            log_lines.append(f"{step},{_fmt(reward)}")
            print(f"step {step}: eval reward {reward:.4f}")

    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(log_lines) + "\n")
    save_agent(checkpoint_path, agent,
               regime=env_cfg.ensemble.regime.value, seed=cfg.seed,
               steps_trained=steps)
    print(f"wrote {checkpoint_path} ({agent.update_count} updates) and {log_path}")
    return 0


def _check_agent_matches(agent: Agent, header: dict, cfg: RunConfig) -> None:
    regime = cfg["ensemble.regime"].value
    if header.get("regime") != regime:
        raise CheckpointMismatch(
            f"checkpoint regime {header.get('regime')!r} != configured {regime!r}"
        )
    if agent.obs_dim != cfg["env.window"]:
        raise CheckpointMismatch(
            f"checkpoint observation width {agent.obs_dim} != configured "
            f"window {cfg['env.window']}"
        )
    if agent.a_max != cfg["env.max_action"]:
        raise CheckpointMismatch(
            f"checkpoint action bound {agent.a_max} != configured "
            f"{cfg['env.max_action']}"
        )


def _plot_trace(path, records) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = [r.step for r in records]
    mf = [r.mean_field for r in records]
    actions = [r.action for r in records]
    fig, ax_mf = plt.subplots(figsize=(10, 4))
    ax_mf.plot(steps, mf, color="tab:blue", linewidth=0.7, label="mean field")
    ax_mf.set_xlabel("environment step")
    ax_mf.set_ylabel("mean field", color="tab:blue")
    ax_act = ax_mf.twinx()
    ax_act.plot(steps, actions, color="tab:orange", linewidth=0.5, label="action")
    ax_act.set_ylabel("action", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    if args.pre_steps is not None:
        cfg["eval.pre_steps"] = args.pre_steps
    if args.post_steps is not None:
        cfg["eval.post_steps"] = args.post_steps
    if args.transient is not None:
        cfg["eval.transient"] = args.transient
    cfg.validate()
    out_dir = _prepare_out_dir(cfg)

    env_cfg = cfg.env_config()
    protocol = cfg.protocol()
    env_ss, _, policy_ss = _spawn_streams(cfg.seed)

    if args.policy == "agent":
        if not args.checkpoint:
            raise _UsageError("--policy agent requires --checkpoint")
        agent, header = load_agent(args.checkpoint)
        _check_agent_matches(agent, header, cfg)
        policy = agent_policy(agent)
    elif args.policy == "zero":
        policy = zero_policy
    else:
        policy = random_policy(env_cfg.a_max, np.random.default_rng(policy_ss))

    report, traces = run_evaluation(env_cfg, policy, protocol, seed=env_ss)
    report.seed = cfg.seed

    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(report_text(report))
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(REPORT_CSV_HEADER + "\n" + report_csv_row(report) + "\n")
    _write_trace_csv(os.path.join(out_dir, "trace.csv"), traces)
    if args.plot:
        _plot_trace(os.path.join(out_dir, "trace.svg"), traces)
    print(report_text(report), end="")
    print(f"wrote report and trace to {out_dir}")
    return 0


# ---------------------------------------------------------------------- #
# argument plumbing


def _build_parser() -> _Parser:
    parser = _Parser(prog="synq",
                     description="Oscillator-ensemble suppression workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="configuration file (key = value lines)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory override")

    p_sim = sub.add_parser("simulate", help="zero-action rollout to a trace CSV")
    common(p_sim)
    p_sim.add_argument("--steps", type=int, help="environment steps to record")
    p_sim.set_defaults(func=cmd_simulate)

    p_train = sub.add_parser("train", help="train the suppression agent")
    common(p_train)
    p_train.add_argument("--steps", type=int, help="training environment steps")
    p_train.add_argument("--checkpoint", help="checkpoint output path")
    p_train.add_argument("--log", help="training log CSV path")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="two-phase suppression evaluation")
    common(p_eval)
    p_eval.add_argument("--checkpoint", help="trained agent checkpoint")
    p_eval.add_argument("--policy", choices=("agent", "zero", "random"),
                        default="agent")
    p_eval.add_argument("--pre-steps", type=int, dest="pre_steps")
    p_eval.add_argument("--post-steps", type=int, dest="post_steps")
    p_eval.add_argument("--transient", type=int)
    p_eval.add_argument("--plot", action="store_true",
                        help="also write an SVG of mean field and actions")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalDivergence as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 3
    except (CheckpointError, CheckpointMismatch) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
