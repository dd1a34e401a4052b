"""Reward-predictive state representations.

An intent is a test followed by one extended action: a real action, whose
"outcome" is the expected reward of taking it, or the token action ``zeta``
whose reward is identically one, so that ``q zeta`` behaves like test ``q``.
``zeta`` is stored as the index ``|A|`` and never reaches the environment.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .numerics import DEFAULT_TAU, Basis, column_pseudoinverse
from .pomdp_model import InteractionSeq, Pomdp, ZeroProbabilityInteraction, belief_update, history_reward
from .psr import DependentCoreSetError, _check_independent, _interactions, extension_operators

ZETA_NAME = "zeta"


class Intent(NamedTuple):
    test: InteractionSeq
    final: int  # action index, or |A| for zeta


def zeta(m: Pomdp) -> int:
    return m.num_actions


def extended_reward(m: Pomdp) -> np.ndarray:
    """``|S| x (|A|+1)`` reward matrix with the all-ones zeta column appended."""
    return np.column_stack([m.reward, np.ones(m.num_states)])


def _check_intent(m: Pomdp, i: Intent):
    if not 0 <= i.final <= m.num_actions:
        raise IndexError(f"extended action {i.final} out of range")
    for a, o in i.test:
        m.check_interaction(a, o)


def intent_outcome(m: Pomdp, i: Intent) -> np.ndarray:
    """``u(qz)``: from each start state, Pr(q) times the expected reward of z afterwards."""
    _check_intent(m, i)
    u = extended_reward(m)[:, i.final]
    for a, o in reversed(i.test):
        u = m.generative[a, o].T @ u
    return u


def intent_reward(m: Pomdp, b: np.ndarray, i: Intent) -> float:
    return float(np.asarray(b) @ intent_outcome(m, i))


def intent_reward_by_filtering(m: Pomdp, b: np.ndarray, i: Intent) -> float:
    """Same quantity as :func:`intent_reward`, via ``Pr(q|h) * R(hq, z)`` on a filtered belief."""
    pr = 1.0
    for a, o in i.test:
        try:
            b, step = belief_update(m, b, a, o)
        except ZeroProbabilityInteraction:
            return 0.0
        pr *= step
    zr = 1.0 if i.final == zeta(m) else history_reward(m, b, i.final)
    return pr * zr


def _extended_actions(m: Pomdp) -> range:
    return range(m.num_actions + 1)


def discover_core_intents_dfs(m: Pomdp, tau: float = DEFAULT_TAU) -> list[Intent]:
    """Depth-first intent search.

    At node ``q`` each extended action ``z`` is tried; when ``q z`` is
    independent of the intents found so far it is kept and every ``a o q``
    is searched in turn.
    """
    basis = Basis(m.num_states, tau)
    found: list[Intent] = []

    def search(q: InteractionSeq):
        for z in _extended_actions(m):
            i = Intent(q, z)
            if basis.try_extend(intent_outcome(m, i)):
                found.append(i)
                for ao in _interactions(m):
                    search((ao,) + q)

    search(())
    return found


def discover_core_intents_bfs(m: Pomdp, tau: float = DEFAULT_TAU) -> list[Intent]:
    """Breadth-first intent search; tends to find shorter intents than DFS.

    Seeds with every independent ``empty z``; each round then tries ``a o q z``
    for all interactions and all intents accepted so far, until a round adds
    nothing.
    """
    basis = Basis(m.num_states, tau)
    found: list[Intent] = []
    for z in _extended_actions(m):
        i = Intent((), z)
        if basis.try_extend(intent_outcome(m, i)):
            found.append(i)
    while True:
        before = len(found)
        snapshot = list(found)
        for ao in _interactions(m):
            for i in snapshot:
                ext = Intent((ao,) + i.test, i.final)
                if ext not in found and basis.try_extend(intent_outcome(m, ext)):
                    found.append(ext)
        if len(found) == before:
            return found


@dataclass(frozen=True, eq=False)
class RpsrModel:
    pomdp: Pomdp
    core_intents: tuple[Intent, ...]
    U: np.ndarray
    U_pinv: np.ndarray
    M: np.ndarray  # |A| x |O| x k x k
    m_ao_zeta: np.ndarray  # |A| x |O| x k
    R_rpsr: np.ndarray  # k x |A|, columns m_{empty a}

    @property
    def rank(self) -> int:
        return len(self.core_intents)

    @property
    def start(self) -> np.ndarray:
        return reward_predictive_state(self, self.pomdp.start)

    def parameter(self, i: Intent) -> np.ndarray:
        return self.U_pinv @ intent_outcome(self.pomdp, i)

    def reconstruction_error(self) -> float:
        """Largest reward error over point-mass beliefs; zero up to round-off."""
        return float(np.abs(self.U @ self.R_rpsr - self.pomdp.reward).max())


def build_rpsr(
    m: Pomdp,
    core_intents: Sequence[Intent] | None = None,
    tau: float = DEFAULT_TAU,
    search: str = "bfs",
) -> RpsrModel:
    if core_intents is None:
        if search == "bfs":
            core_intents = discover_core_intents_bfs(m, tau)
        elif search == "dfs":
            core_intents = discover_core_intents_dfs(m, tau)
        else:
            raise ValueError(f"unknown search {search!r}")
    core_intents = tuple(Intent(tuple(i.test), int(i.final)) for i in core_intents)
    cols = [intent_outcome(m, i) for i in core_intents]
    _check_independent(m.num_states, cols, tau)
    U = np.column_stack(cols)
    U_pinv = column_pseudoinverse(U)
    ones = np.ones(m.num_states)
    return RpsrModel(
        pomdp=m,
        core_intents=core_intents,
        U=U,
        U_pinv=U_pinv,
        M=extension_operators(m, U, U_pinv),
        m_ao_zeta=np.einsum("ki,aoji,j->aok", U_pinv, m.generative, ones),
        R_rpsr=U_pinv @ m.reward,
    )


def reward_predictive_state(rpsr: RpsrModel, b: np.ndarray) -> np.ndarray:
    return rpsr.U.T @ np.asarray(b, dtype=float)


def rpsr_state_update(rpsr: RpsrModel, r: np.ndarray, a: int, o: int, tol: float = 1e-12) -> tuple[np.ndarray, float]:
    if a == zeta(rpsr.pomdp):
        raise ValueError("the token action cannot be executed")
    rpsr.pomdp.check_interaction(a, o)
    pr = float(r @ rpsr.m_ao_zeta[a, o])
    if pr <= tol:
        raise ZeroProbabilityInteraction(a, o, pr)
    return (r @ rpsr.M[a, o]) / pr, pr


def rpsr_rewards(rpsr: RpsrModel, r: np.ndarray, a: int) -> float:
    if a == zeta(rpsr.pomdp):
        raise ValueError("the token action has no reward to emit")
    return float(r @ rpsr.R_rpsr[:, a])


def format_intent(m: Pomdp, i: Intent) -> dict:
    return {
        "test": [[m.action_names[a], m.observation_names[o]] for a, o in i.test],
        "final": ZETA_NAME if i.final == zeta(m) else m.action_names[i.final],
    }


def analysis_report(rpsr: RpsrModel) -> dict:
    return {
        "rank": rpsr.rank,
        "core_intents": [format_intent(rpsr.pomdp, i) for i in rpsr.core_intents],
        "R_rpsr": rpsr.R_rpsr.tolist(),
        "reconstruction_error": rpsr.reconstruction_error(),
    }


__all__ = [
    "DependentCoreSetError", "Intent", "RpsrModel", "analysis_report", "build_rpsr",
    "discover_core_intents_bfs", "discover_core_intents_dfs", "extended_reward",
    "format_intent", "intent_outcome", "intent_reward", "intent_reward_by_filtering",
    "reward_predictive_state", "rpsr_rewards", "rpsr_state_update", "zeta",
]
