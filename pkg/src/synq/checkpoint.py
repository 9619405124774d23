"""Binary checkpoint format: magic "SYNQ", version 1, named float64 arrays.

Layout (all integers little-endian)::

    magic   4 bytes  b"SYNQ"
    version u32
    hlen    u32      followed by hlen bytes of UTF-8 "key = value" lines
    count   u32      number of arrays, then per array:
      nlen  u32      name bytes (UTF-8)
      ndim  u32      dims as u64 each
      data           float64 little-endian, C order

Headers are rendered with sorted keys and repr floats, so
save -> load -> save reproduces files byte for byte.
"""

from __future__ import annotations

import struct

import numpy as np

from .td3 import Agent, Td3Hyperparams

MAGIC = b"SYNQ"
VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable checkpoint file."""


class CheckpointMismatch(RuntimeError):
    """Checkpoint does not fit the requested configuration."""


def _render_header(header: dict) -> bytes:
    lines = []
    for key in sorted(header):
        value = header[key]
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_header(blob: bytes) -> dict[str, str]:
    header = {}
    for line in blob.decode("utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        header[key.strip()] = value.strip()
    return header


def save_checkpoint(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        blob = _render_header(header)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype="<f8")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise CheckpointError(f"no checkpoint at {path}") from exc

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    offset = 0
    if take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<I", take(4, "header length"))
    header = _parse_header(take(hlen, "header"))
    (count,) = struct.unpack("<I", take(4, "array count"))
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4, "name length"))
        name = take(nlen, "name").decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, "ndim"))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim, "shape"))
        n_items = int(np.prod(shape)) if ndim else 1
        raw = take(8 * n_items, f"array {name}")
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return header, arrays


_HP_FIELDS = (
    ("gamma", float), ("tau", float), ("policy_noise_sigma", float),
    ("noise_clip", float), ("exploration_sigma", float), ("policy_delay", int),
    ("batch_size", int), ("buffer_capacity", int), ("learn_start", int),
    ("actor_lr", float), ("critic_lr", float), ("hidden_dim", int),
    ("pretanh_cap", float), ("pretanh_penalty", float), ("action_reg", float),
    ("truncate_at_episode_end", lambda s: s if isinstance(s, bool) else s == "true"),
)


def save_agent(path, agent: Agent, regime: str, seed: int,
               steps_trained: int) -> None:
    header = {
        "regime": regime,
        "seed": seed,
        "steps_trained": steps_trained,
        "updates": agent.update_count,
        "obs_dim": agent.obs_dim,
        "a_max": agent.a_max,
        "opt.actor.step": agent.actor_opt.step_count,
        "opt.critic1.step": agent.critic1_opt.step_count,
        "opt.critic2.step": agent.critic2_opt.step_count,
    }
    for name, _ in _HP_FIELDS:
        header[f"td3.{name}"] = getattr(agent.hp, name)
    save_checkpoint(path, header, agent.export_arrays())


def load_agent(path) -> tuple[Agent, dict[str, str]]:
    header, arrays = load_checkpoint(path)
    try:
        hp = Td3Hyperparams(**{
            name: cast(header[f"td3.{name}"]) for name, cast in _HP_FIELDS
        })
        obs_dim = int(header["obs_dim"])
        a_max = float(header["a_max"])
    except KeyError as exc:
        raise CheckpointError(f"checkpoint header missing {exc}") from exc
    agent = Agent(obs_dim, a_max, hp, np.random.default_rng(0))
    try:
        agent.import_arrays(arrays)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint arrays do not match header: {exc}") from exc
    agent.update_count = int(header["updates"])
    agent.actor_opt.step_count = int(header["opt.actor.step"])
    agent.critic1_opt.step_count = int(header["opt.critic1.step"])
    agent.critic2_opt.step_count = int(header["opt.critic2.step"])
    return agent, header
