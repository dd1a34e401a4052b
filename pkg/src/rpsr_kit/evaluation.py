"""Monte-Carlo evaluation of policies, scored under each model's reward semantics.

Policies act on actions and observations only.  A trace is then replayed
through each scorer's own state tracker, which pays its expected reward at
every step (``b^T R``, ``p^T R_psr`` or ``r^T R_rpsr``).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .pomdp_model import Pomdp
from .psr import PsrModel
from .rpsr import RpsrModel
from .value_iteration import ValueFunction, greedy_action

SCORERS = ("pomdp", "psr", "rpsr")
POLICIES = ("random", "pomdp-vi", "psr-vi", "rpsr-vi")


@dataclass(frozen=True)
class ModelSet:
    pomdp: Pomdp
    psr: PsrModel
    rpsr: RpsrModel


# -- trackers ---------------------------------------------------------------

class Tracker:
    """Filtered state of one model along a history."""

    def __init__(self, start: np.ndarray, R: np.ndarray, step: Callable):
        self.x = np.array(start, dtype=float)
        self._R = R
        self._step = step

    def reward(self, a: int) -> float:
        return float(self.x @ self._R[:, a])

    def update(self, a: int, o: int) -> None:
        self.x = self._step(self.x, a, o)


def make_tracker(models: ModelSet, kind: str) -> Tracker:
    if kind == "pomdp":
        G = models.pomdp.generative

        def step(x, a, o):
            y = G[a, o] @ x
            return y / y.sum()

        return Tracker(models.pomdp.start, models.pomdp.reward, step)
    if kind == "psr":
        psr = models.psr
        return Tracker(psr.start, psr.R_psr, lambda x, a, o: (x @ psr.M[a, o]) / (x @ psr.m_ao[a, o]))
    if kind == "rpsr":
        r = models.rpsr
        return Tracker(r.start, r.R_rpsr, lambda x, a, o: (x @ r.M[a, o]) / (x @ r.m_ao_zeta[a, o]))
    raise ValueError(f"unknown model {kind!r}")


# -- policies ---------------------------------------------------------------

class RandomPolicy:
    name = "random"

    def __init__(self, num_actions: int):
        self.num_actions = num_actions

    def start(self):
        return self

    def act(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.num_actions))

    def observe(self, a: int, o: int) -> None:
        pass


class GreedyPolicy:
    """Greedy over a value function, tracking the matching model's state."""

    def __init__(self, name: str, vf: ValueFunction, models: ModelSet, tracker: str):
        self.name = name
        self.vf = vf
        self.models = models
        self.tracker_kind = tracker

    def start(self) -> "_GreedyRun":
        return _GreedyRun(self.vf, make_tracker(self.models, self.tracker_kind))


class _GreedyRun:
    def __init__(self, vf: ValueFunction, tracker: Tracker):
        self.vf = vf
        self.tracker = tracker

    def act(self, rng) -> int:
        return greedy_action(self.vf, self.tracker.x)

    def observe(self, a: int, o: int) -> None:
        self.tracker.update(a, o)


def standard_policies(models: ModelSet, vfs: Mapping[str, ValueFunction]) -> dict:
    """The four policies compared in the evaluation grid."""
    return {
        "random": RandomPolicy(models.pomdp.num_actions),
        "pomdp-vi": GreedyPolicy("pomdp-vi", vfs["pomdp"], models, "pomdp"),
        "psr-vi": GreedyPolicy("psr-vi", vfs["psr"], models, "psr"),
        "rpsr-vi": GreedyPolicy("rpsr-vi", vfs["rpsr"], models, "rpsr"),
    }


# -- simulation -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EpisodeTrace:
    start_state: int
    actions: np.ndarray
    observations: np.ndarray
    states: np.ndarray  # state in which each action was taken
    rewards: np.ndarray  # R(state, action)

    def __len__(self):
        return len(self.actions)


def episode_rngs(seed: int, episode: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Environment and policy generators for one episode, independent of batching."""
    env, pol = np.random.SeedSequence([seed, episode]).spawn(2)
    return np.random.default_rng(env), np.random.default_rng(pol)


def run_episode(m: Pomdp, policy, steps: int, seed: int, episode: int) -> EpisodeTrace:
    env_rng, pol_rng = episode_rngs(seed, episode)
    S, O = m.num_states, m.num_observations
    s = int(env_rng.choice(S, p=m.start))
    start = s
    run = policy.start()
    acts = np.empty(steps, dtype=int)
    obs = np.empty(steps, dtype=int)
    states = np.empty(steps, dtype=int)
    rewards = np.empty(steps)
    for t in range(steps):
        a = run.act(pol_rng)
        if not 0 <= a < m.num_actions:
            raise ValueError(f"policy chose non-executable action {a}")
        s2 = int(env_rng.choice(S, p=m.transition[a, s]))
        o = int(env_rng.choice(O, p=m.observation[a, s2]))
        acts[t], obs[t], states[t], rewards[t] = a, o, s, m.reward[s, a]
        run.observe(a, o)
        s = s2
    return EpisodeTrace(start, acts, obs, states, rewards)


def simulate(m: Pomdp, policy, episodes: int, steps: int, seed: int, threads: int = 1) -> list[EpisodeTrace]:
    if threads <= 1:
        return [run_episode(m, policy, steps, seed, i) for i in range(episodes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: run_episode(m, policy, steps, seed, i), range(episodes)))


def score_trace(trace: EpisodeTrace, scorer: str, models: ModelSet, gamma: float) -> float:
    tracker = make_tracker(models, scorer)
    total, disc = 0.0, 1.0
    for a, o in zip(trace.actions, trace.observations):
        total += disc * tracker.reward(int(a))
        tracker.update(int(a), int(o))
        disc *= gamma
    return total


# -- aggregation ------------------------------------------------------------

@dataclass(frozen=True)
class ReturnEstimate:
    mean: float
    std: float
    episodes: int
    scorer: str
    policy: str


def mean_std(xs: Sequence[float]) -> tuple[float, float]:
    """Welford one-pass mean and sample standard deviation."""
    n, mean, m2 = 0, 0.0, 0.0
    for x in xs:
        n += 1
        d = x - mean
        mean += d / n
        m2 += d * (x - mean)
    if n == 0:
        raise ValueError("no samples")
    return mean, math.sqrt(m2 / (n - 1)) if n > 1 else 0.0


@dataclass
class CrossEvaluation:
    cells: dict  # (scorer, policy) -> ReturnEstimate
    returns: dict  # (scorer, policy) -> np.ndarray of per-episode returns
    scorers: tuple[str, ...]
    policies: tuple[str, ...]

    def best(self, scorer: str, tol: float = 0.05) -> list[str]:
        """Policies whose mean is within ``tol`` of the best under ``scorer``."""
        means = {p: self.cells[scorer, p].mean for p in self.policies}
        top = max(means.values())
        return [p for p, v in means.items() if v >= top - tol]

    def to_json(self) -> dict:
        return {
            "scorers": list(self.scorers),
            "policies": list(self.policies),
            "cells": [
                {"scorer": s, "policy": p, "mean": c.mean, "std": c.std, "episodes": c.episodes}
                for (s, p), c in self.cells.items()
            ],
            "best": {s: self.best(s) for s in self.scorers},
        }


def cross_evaluate(
    models: ModelSet,
    policies: Mapping[str, object],
    episodes: int = 1000,
    steps: int = 100,
    seed: int = 0,
    gamma: float | None = None,
    threads: int = 1,
) -> CrossEvaluation:
    """Every policy against the POMDP, every trace scored by every model.

    Episode ``i`` uses the same seeds for all policies, so start states match.
    """
    gamma = models.pomdp.discount if gamma is None else gamma
    cells, rets = {}, {}
    for pname, policy in policies.items():
        traces = simulate(models.pomdp, policy, episodes, steps, seed, threads)
        for scorer in SCORERS:
            r = np.array([score_trace(t, scorer, models, gamma) for t in traces])
            mu, sd = mean_std(r)
            cells[scorer, pname] = ReturnEstimate(mu, sd, episodes, scorer, pname)
            rets[scorer, pname] = r
    return CrossEvaluation(cells, rets, SCORERS, tuple(policies))
