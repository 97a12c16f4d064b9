"""Scripted PD expert and demonstration-set generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..flowmatch.dataset import FlowDataset, save_dataset
from ..numerics.rng import SeededRng
from .pointmass import PointMassConfig, PointMassEnv, PointMassState, tick_dynamics

KP = 1.0
KD = 0.8


def scripted_expert(state: PointMassState, cfg: PointMassConfig, noise: float,
                    rng: SeededRng) -> np.ndarray:
    """PD controller toward the goal, simulated forward to emit a coherent
    C-tick chunk; `noise` scales additive Gaussian action noise per tick."""
    p = state.position.copy()
    v = state.velocity.copy()
    g = state.goal
    chunk = np.empty((cfg.chunk_size, 2))
    for c in range(cfg.chunk_size):
        a = KP * (g - p) - KD * v
        if noise > 0:
            a = a + noise * rng.standard_normal(2)
        a = np.clip(a, -1.0, 1.0)
        chunk[c] = a
        p, v = tick_dynamics(cfg, p, v, a)
    return chunk


@dataclass
class DemoSet:
    dataset: FlowDataset
    episode_returns: list[float]
    episode_successes: list[bool]
    noise_level: float
    env_kind: str
    seed: int

    @property
    def mean_return(self) -> float:
        return float(np.mean(self.episode_returns))

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.episode_successes))


def generate_demos(cfg: PointMassConfig, noise: float, episodes: int,
                   rng: SeededRng) -> DemoSet:
    """Roll the scripted expert and record (observation -> executed chunk) pairs."""
    env = PointMassEnv(cfg, SeededRng(rng.seed, rng.stream + 1))
    x1_rows, cond_rows = [], []
    returns, successes = [], []
    for _ in range(episodes):
        obs = env.reset()
        ep_return = 0.0
        done = False
        while not done:
            chunk = scripted_expert(env.state, cfg, noise, rng)
            cond_rows.append(obs)
            x1_rows.append(chunk.reshape(-1))
            result = env.step_chunk(chunk)
            ep_return += result.reward
            obs = result.observation
            done = result.done
        returns.append(ep_return)
        successes.append(result.success)
    dataset = FlowDataset(x1=np.array(x1_rows), cond=np.array(cond_rows))
    return DemoSet(dataset=dataset, episode_returns=returns, episode_successes=successes,
                   noise_level=noise, env_kind=cfg.kind, seed=rng.seed)


def save_demos(demos: DemoSet, path: str | Path) -> None:
    """Dataset in the text record format plus a JSON manifest sidecar."""
    path = Path(path)
    save_dataset(demos.dataset, path)
    manifest = {
        "env_kind": demos.env_kind,
        "expert_noise": demos.noise_level,
        "episodes": len(demos.episode_returns),
        "seed": demos.seed,
        "mean_return": demos.mean_return,
        "success_rate": demos.success_rate,
    }
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
