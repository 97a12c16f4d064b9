"""Binary checkpoint format.

Layout: 8-byte magic, u32 format version, u64 header length, a UTF-8 JSON
header, then the concatenated flat little-endian float64 parameter arrays in
the order the header declares them. Save -> load -> save round-trips bitwise.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..flowmatch.model import DiscretizationScheme, VelocityField
from ..numerics import Activation, AdamState, MlpParams
from ..rlcore.critic import Critic
from ..stochpolicy.noise import NoiseConditioning, NoiseHead
from ..stochpolicy.policy import NoisyFlowPolicy

MAGIC = b"RFLOWCK\x00"
FORMAT_VERSION = 1


def _net_header(net: MlpParams) -> dict:
    return {"widths": list(net.widths), "activation": net.activation.value}


def _net_arrays(prefix: str, net: MlpParams) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out.append((f"{prefix}.w{i}", w))
        out.append((f"{prefix}.b{i}", b))
    return out


def _rebuild_net(header: dict, arrays: dict[str, np.ndarray], prefix: str) -> MlpParams:
    widths = header["widths"]
    weights = [arrays[f"{prefix}.w{i}"] for i in range(len(widths) - 1)]
    biases = [arrays[f"{prefix}.b{i}"] for i in range(len(widths) - 1)]
    return MlpParams(widths=widths, weights=weights, biases=biases,
                     activation=Activation(header["activation"]))


def _adam_arrays(prefix: str, state: AdamState) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, (m, v) in enumerate(zip(state.m, state.v)):
        out.append((f"{prefix}.m{i}", m))
        out.append((f"{prefix}.v{i}", v))
    return out


@dataclass
class Checkpoint:
    policy: NoisyFlowPolicy
    critic: Critic
    iteration: int = 0
    seed: int = 0
    frozen_ref: NoisyFlowPolicy | None = None
    actor_adam: AdamState | None = None
    critic_adam: AdamState | None = None
    rng_states: dict | None = None
    scaler_state: dict | None = None
    extra: dict = field(default_factory=dict)


def save_checkpoint(ck: Checkpoint, path: str | Path) -> None:
    policy = ck.policy
    header: dict = {
        "iteration": ck.iteration,
        "seed": ck.seed,
        "policy": {
            "chunk_dim": policy.velocity.chunk_dim,
            "cond_dim": policy.velocity.cond_dim,
            "time_embed_dim": policy.velocity.time_embed_dim,
            "shortcut": policy.velocity.shortcut,
            "action_clip": policy.action_clip,
            "sigma_min": policy.noise.sigma_min,
            "sigma_max": policy.noise.sigma_max,
            "sigma_max_current": policy.sigma_max_current,
            "conditioning": policy.noise.conditioning.value,
            "scheme_knots": policy.scheme.knots.tolist(),
            "velocity_net": _net_header(policy.velocity.net),
            "noise_net": _net_header(policy.noise.net),
        },
        "critic_net": _net_header(ck.critic.net),
        "extra": ck.extra,
    }
    arrays: list[tuple[str, np.ndarray]] = []
    arrays += _net_arrays("velocity", policy.velocity.net)
    arrays += _net_arrays("noise", policy.noise.net)
    arrays += _net_arrays("critic", ck.critic.net)

    if ck.frozen_ref is not None:
        header["frozen_ref"] = {
            "velocity_net": _net_header(ck.frozen_ref.velocity.net),
            "noise_net": _net_header(ck.frozen_ref.noise.net),
        }
        arrays += _net_arrays("ref_velocity", ck.frozen_ref.velocity.net)
        arrays += _net_arrays("ref_noise", ck.frozen_ref.noise.net)
    for name, adam in [("actor_adam", ck.actor_adam), ("critic_adam", ck.critic_adam)]:
        if adam is not None:
            header[name] = {"step": adam.step, "beta1": adam.beta1,
                            "beta2": adam.beta2, "eps": adam.eps,
                            "n_arrays": len(adam.m)}
            arrays += _adam_arrays(name, adam)
    if ck.rng_states is not None:
        header["rng_states"] = ck.rng_states
    if ck.scaler_state is not None:
        header["scaler_state"] = ck.scaler_state

    header["arrays"] = [{"name": name, "shape": list(a.shape)} for name, a in arrays]
    blob = json.dumps(header).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < len(MAGIC) + 12 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"corrupt checkpoint header in {path}")
    offset = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} unsupported (this build reads {FORMAT_VERSION})"
        )
    (header_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    if offset + header_len > len(data):
        raise CheckpointError(f"truncated checkpoint header in {path}")
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint header in {path}: {exc}") from exc
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 8
        if offset + nbytes > len(data):
            raise CheckpointError(f"truncated checkpoint arrays in {path} at {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(
            data, dtype="<f8", count=n, offset=offset
        ).astype(np.float64).reshape(shape)
        offset += nbytes

    p = header["policy"]
    velocity = VelocityField(
        net=_rebuild_net(p["velocity_net"], arrays, "velocity"),
        chunk_dim=p["chunk_dim"], cond_dim=p["cond_dim"],
        time_embed_dim=p["time_embed_dim"], shortcut=p["shortcut"],
    )
    noise = NoiseHead(
        net=_rebuild_net(p["noise_net"], arrays, "noise"),
        sigma_min=p["sigma_min"], sigma_max=p["sigma_max"],
        conditioning=NoiseConditioning(p["conditioning"]),
        time_embed_dim=p["time_embed_dim"],
    )
    policy = NoisyFlowPolicy(velocity=velocity, noise=noise,
                             scheme=DiscretizationScheme(np.array(p["scheme_knots"])),
                             action_clip=p["action_clip"])
    policy.sigma_max_current = p["sigma_max_current"]
    critic = Critic(net=_rebuild_net(header["critic_net"], arrays, "critic"))

    frozen_ref = None
    if "frozen_ref" in header:
        ref_velocity = VelocityField(
            net=_rebuild_net(header["frozen_ref"]["velocity_net"], arrays, "ref_velocity"),
            chunk_dim=p["chunk_dim"], cond_dim=p["cond_dim"],
            time_embed_dim=p["time_embed_dim"], shortcut=p["shortcut"],
        )
        ref_noise = NoiseHead(
            net=_rebuild_net(header["frozen_ref"]["noise_net"], arrays, "ref_noise"),
            sigma_min=p["sigma_min"], sigma_max=p["sigma_max"],
            conditioning=NoiseConditioning(p["conditioning"]),
            time_embed_dim=p["time_embed_dim"],
        )
        frozen_ref = NoisyFlowPolicy(velocity=ref_velocity, noise=ref_noise,
                                     scheme=DiscretizationScheme(np.array(p["scheme_knots"])),
                                     action_clip=p["action_clip"])

    adams = {}
    for name in ("actor_adam", "critic_adam"):
        if name in header:
            meta = header[name]
            m = [arrays[f"{name}.m{i}"] for i in range(meta["n_arrays"])]
            v = [arrays[f"{name}.v{i}"] for i in range(meta["n_arrays"])]
            adams[name] = AdamState(m=m, v=v, step=meta["step"], beta1=meta["beta1"],
                                    beta2=meta["beta2"], eps=meta["eps"])

    return Checkpoint(
        policy=policy, critic=critic, iteration=header["iteration"], seed=header["seed"],
        frozen_ref=frozen_ref, actor_adam=adams.get("actor_adam"),
        critic_adam=adams.get("critic_adam"), rng_states=header.get("rng_states"),
        scaler_state=header.get("scaler_state"), extra=header.get("extra", {}),
    )
