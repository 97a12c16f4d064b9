"""Toy continuous-control environments: a 2-D point mass steered by
acceleration chunks, with a dense shaped reward or a sparse goal-reach reward.

Dynamics per tick (dt = 0.1): v <- clip(v + a*dt, +-v_max) per coordinate,
p <- clip(p + v*dt, arena box). One macro-step executes C ticks from a single
observation; the chunk reward is the sum of per-tick rewards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolationError
from ..numerics.rng import SeededRng


@dataclass
class PointMassConfig:
    kind: str = "dense"          # "dense" or "sparse"
    arena: float = 2.0
    dt: float = 0.1
    v_max: float = 2.0
    horizon: int = 64            # macro-steps per episode
    chunk_size: int = 4          # env ticks per macro-step
    goal_radius: float = 0.1
    ctrl_cost: float = 0.01
    obs_noise: float = 0.0
    start_box: float = 1.0       # reset positions uniform in +-start_box
    goal_box: float = 1.0        # goals uniform in +-goal_box

    def __post_init__(self):
        if self.kind not in ("dense", "sparse"):
            raise ValueError(f"unknown env kind {self.kind!r}")

    @property
    def obs_dim(self) -> int:
        return 6

    @property
    def action_dim(self) -> int:
        return 2

    @property
    def chunk_dim(self) -> int:
        return self.chunk_size * self.action_dim


@dataclass
class PointMassState:
    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    tick: int = 0


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    success: bool


def tick_dynamics(cfg: PointMassConfig, position, velocity, accel):
    """One physics tick; works on (2,) vectors or (E, 2) stacks."""
    velocity = np.clip(velocity + accel * cfg.dt, -cfg.v_max, cfg.v_max)
    position = np.clip(position + velocity * cfg.dt, -cfg.arena, cfg.arena)
    return position, velocity


class PointMassEnv:
    """A single seeded environment instance."""

    def __init__(self, cfg: PointMassConfig, rng: SeededRng):
        self.cfg = cfg
        self.rng = rng
        self._reached = False
        self.reset()

    def _fresh_state(self) -> PointMassState:
        cfg = self.cfg
        position = self.rng.uniform(-cfg.start_box, cfg.start_box, 2)
        goal = self.rng.uniform(-cfg.goal_box, cfg.goal_box, 2)
        return PointMassState(position=position, velocity=np.zeros(2), goal=goal)

    def reset(self) -> np.ndarray:
        self.state = self._fresh_state()
        self._reached = False
        return self.observation()

    def observation(self) -> np.ndarray:
        s = self.state
        obs = np.concatenate([s.position, s.velocity, s.goal])
        if self.cfg.obs_noise > 0:
            obs = obs + self.cfg.obs_noise * self.rng.standard_normal(6)
        return obs

    def step_chunk(self, chunk: np.ndarray) -> StepResult:
        """Execute C accelerations; auto-reset is the caller's job."""
        cfg = self.cfg
        chunk = np.asarray(chunk, dtype=np.float64).reshape(cfg.chunk_size, 2)
        if np.any(np.abs(chunk) > 1.0 + 1e-12):
            raise ContractViolationError("chunk accelerations must lie in [-1, 1]")
        s = self.state
        reward = 0.0
        reached_now = False
        for c in range(cfg.chunk_size):
            a = chunk[c]
            s.position, s.velocity = tick_dynamics(cfg, s.position, s.velocity, a)
            diff = s.position - s.goal
            dist = float(np.sqrt((diff * diff).sum()))
            if cfg.kind == "dense":
                reward += -dist - cfg.ctrl_cost * float(a @ a)
                if dist < cfg.goal_radius:
                    self._reached = True
            else:
                if not self._reached and dist < cfg.goal_radius:
                    self._reached = True
                    reached_now = True
                    reward += 1.0
        s.tick += 1
        if cfg.kind == "dense":
            done = s.tick >= cfg.horizon
        else:
            done = reached_now or self._reached or s.tick >= cfg.horizon
        return StepResult(observation=self.observation(), reward=reward,
                          done=done, success=self._reached)
