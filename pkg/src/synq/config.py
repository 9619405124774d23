"""Flat key-value run configuration.

Files are ``key = value`` lines with ``#`` comments.  Unknown keys are
rejected; missing keys take the documented defaults.  A handful of
ensemble keys default per regime (coupling and the heterogeneity
ranges), so the effective values only exist after resolution; use
``format_config`` to echo the fully resolved configuration, which parses
back to an identical run.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import EnsembleConfig, Heterogeneity, RegimeKind
from .env import EnvConfig, TemporalRepConfig
from .evaluation import EvalProtocol
from .td3 import Td3Hyperparams


class ConfigError(ValueError):
    """Malformed configuration file or invalid setting."""


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_regime(text: str) -> RegimeKind:
    try:
        return RegimeKind(text.lower())
    except ValueError:
        raise ValueError(
            f"not a regime: {text!r} (expected regular, chaotic or bursting)"
        ) from None


# key -> (parser, default); None defaults resolve per regime.
_SCHEMA: dict[str, tuple] = {
    "seed": (int, 0),
    "ensemble.regime": (_parse_regime, RegimeKind.REGULAR),
    "ensemble.n_neurons": (int, 100),
    "ensemble.coupling": (float, None),
    "ensemble.dt": (float, 0.05),
    "ensemble.substeps": (int, 2),
    "ensemble.alpha_min": (float, None),
    "ensemble.alpha_max": (float, None),
    "ensemble.drive_min": (float, None),
    "ensemble.drive_max": (float, None),
    "temporal.parts": (int, 3),
    "temporal.part_weight": (float, 0.33),
    "temporal.onset_delay": (int, 1),
    "env.window": (int, 250),
    "env.max_action": (float, 1.0),
    "env.episode_len": (int, 1000),
    "env.warmup": (int, 1000),
    "env.clamp_actions": (_parse_bool, True),
    "td3.gamma": (float, 0.99),
    "td3.tau": (float, 0.005),
    "td3.policy_noise": (float, 0.2),
    "td3.noise_clip": (float, 0.5),
    "td3.exploration_noise": (float, 0.1),
    "td3.policy_delay": (int, 2),
    "td3.batch_size": (int, 128),
    "td3.buffer_capacity": (int, 200_000),
    "td3.learn_start": (int, 1000),
    "td3.actor_lr": (float, 3e-4),
    "td3.critic_lr": (float, 3e-4),
    "td3.hidden": (int, 64),
    "td3.pretanh_cap": (float, 3.0),
    "td3.pretanh_penalty": (float, 1.0),
    "td3.action_reg": (float, 1.0),
    "td3.truncate_at_episode_end": (_parse_bool, False),
    "train.steps": (int, 50_000),
    "train.eval_interval": (int, 1000),
    "train.eval_rollout": (int, 1000),
    "train.dither": (float, 0.1),
    "simulate.steps": (int, 10_000),
    "eval.pre_steps": (int, 10_000),
    "eval.post_steps": (int, 10_000),
    "eval.transient": (int, 500),
    "eval.measure_window": (int, 5000),
    "out.dir": (str, "run"),
}


@dataclass
class RunConfig:
    """Every resolved setting of a run, addressable by dotted key."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def __setitem__(self, key: str, value) -> None:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = value

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def ensemble_config(self) -> EnsembleConfig:
        v = self.values
        cfg = EnsembleConfig(
            regime=v["ensemble.regime"],
            n_neurons=v["ensemble.n_neurons"],
            coupling=v["ensemble.coupling"],
            dt=v["ensemble.dt"],
            substeps_per_env_step=v["ensemble.substeps"],
            heterogeneity=Heterogeneity(
                alpha_range=(v["ensemble.alpha_min"], v["ensemble.alpha_max"]),
                drive_range=(v["ensemble.drive_min"], v["ensemble.drive_max"]),
            ),
            seed=v["seed"],
        )
        return cfg

    def env_config(self) -> EnvConfig:
        v = self.values
        return EnvConfig(
            ensemble=self.ensemble_config(),
            temporal=TemporalRepConfig(
                n_parts=v["temporal.parts"],
                part_weight=v["temporal.part_weight"],
                onset_delay=v["temporal.onset_delay"],
            ),
            window_len=v["env.window"],
            a_max=v["env.max_action"],
            episode_len=v["env.episode_len"],
            warmup_steps=v["env.warmup"],
            clamp_actions=v["env.clamp_actions"],
        )

    def td3_hyperparams(self) -> Td3Hyperparams:
        v = self.values
        return Td3Hyperparams(
            gamma=v["td3.gamma"],
            tau=v["td3.tau"],
            policy_noise_sigma=v["td3.policy_noise"],
            noise_clip=v["td3.noise_clip"],
            exploration_sigma=v["td3.exploration_noise"],
            policy_delay=v["td3.policy_delay"],
            batch_size=v["td3.batch_size"],
            buffer_capacity=v["td3.buffer_capacity"],
            learn_start=v["td3.learn_start"],
            actor_lr=v["td3.actor_lr"],
            critic_lr=v["td3.critic_lr"],
            hidden_dim=v["td3.hidden"],
            pretanh_cap=v["td3.pretanh_cap"],
            pretanh_penalty=v["td3.pretanh_penalty"],
            action_reg=v["td3.action_reg"],
            truncate_at_episode_end=v["td3.truncate_at_episode_end"],
        )

    def protocol(self) -> EvalProtocol:
        v = self.values
        return EvalProtocol(
            pre_steps=v["eval.pre_steps"],
            post_steps=v["eval.post_steps"],
            transient=v["eval.transient"],
            measure_window=v["eval.measure_window"],
        )

    def validate(self) -> None:
        try:
            self.env_config().validate()
            self.td3_hyperparams().validate()
            self.protocol().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _resolve_regime_defaults(values: dict) -> None:
    regime = values["ensemble.regime"]
    het = Heterogeneity.for_regime(regime)
    if values["ensemble.coupling"] is None:
        values["ensemble.coupling"] = EnsembleConfig(regime=regime).coupling
    if values["ensemble.alpha_min"] is None:
        values["ensemble.alpha_min"] = het.alpha_range[0]
    if values["ensemble.alpha_max"] is None:
        values["ensemble.alpha_max"] = het.alpha_range[1]
    if values["ensemble.drive_min"] is None:
        values["ensemble.drive_min"] = het.drive_range[0]
    if values["ensemble.drive_max"] is None:
        values["ensemble.drive_max"] = het.drive_range[1]


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        parser, _ = _SCHEMA[key]
        try:
            values[key] = parser(raw_value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    _resolve_regime_defaults(values)
    cfg = RunConfig(values)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def default_config() -> RunConfig:
    return parse_config("")


def format_config(cfg: RunConfig) -> str:
    """Resolved configuration as a parseable key = value block."""
    lines = []
    for key in sorted(_SCHEMA):
        value = cfg.values[key]
        if isinstance(value, RegimeKind):
            rendered = value.value
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
