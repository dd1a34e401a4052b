"""Finite POMDPs: generative matrices, beliefs, test probabilities, rewards.

Everything here is the ground truth that the predictive models are checked
against.  Interactions are ``(action, observation)`` index pairs and an
interaction sequence is a plain tuple of them; the empty tuple is the empty
history / empty test.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

Interaction = tuple[int, int]
InteractionSeq = tuple[Interaction, ...]

STOCHASTIC_TOL = 1e-9


class ZeroProbabilityInteraction(ValueError):
    """Raised when an interaction has probability zero under the current state."""

    def __init__(self, action: int, observation: int, probability: float):
        super().__init__(
            f"interaction (a={action}, o={observation}) has probability {probability:.3g}"
        )
        self.action = action
        self.observation = observation
        self.probability = probability


def _check_stochastic(name: str, rows: np.ndarray, tol: float) -> np.ndarray:
    if np.any(rows < -tol) or np.any(rows > 1 + tol):
        raise ValueError(f"{name}: entries outside [0, 1]")
    sums = rows.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{name}: row {idx} sums to {sums[idx]!r}, not 1")
    rows = np.clip(rows, 0.0, None)
    return rows / rows.sum(axis=-1, keepdims=True)


def _names(given: Sequence[str] | None, n: int) -> tuple[str, ...]:
    if given is None:
        return tuple(str(i) for i in range(n))
    if len(given) != n:
        raise ValueError(f"expected {n} names, got {len(given)}")
    return tuple(given)


@dataclass(frozen=True, eq=False)
class Pomdp:
    """Dense finite POMDP.

    ``transition[a, s, s2] = Pr(s2 | s, a)``, ``observation[a, s2, o] =
    Pr(o | a, s2)`` and ``reward[s, a]``.  Stochastic rows are validated to
    ``STOCHASTIC_TOL`` and then renormalized; arrays are read-only afterwards.
    """

    transition: np.ndarray
    observation: np.ndarray
    reward: np.ndarray
    discount: float
    start: np.ndarray
    state_names: tuple[str, ...] | None = None
    action_names: tuple[str, ...] | None = None
    observation_names: tuple[str, ...] | None = None
    tol: float = field(default=STOCHASTIC_TOL, repr=False)

    def __post_init__(self):
        T = np.array(self.transition, dtype=float)
        O = np.array(self.observation, dtype=float)
        R = np.array(self.reward, dtype=float)
        b0 = np.array(self.start, dtype=float)
        if T.ndim != 3 or T.shape[1] != T.shape[2]:
            raise ValueError(f"transition must be |A|x|S|x|S|, got {T.shape}")
        A, S, _ = T.shape
        if S < 1 or A < 1:
            raise ValueError("need at least one state and one action")
        if O.ndim != 3 or O.shape[:2] != (A, S) or O.shape[2] < 1:
            raise ValueError(f"observation must be |A|x|S|x|O|, got {O.shape}")
        if R.shape != (S, A):
            raise ValueError(f"reward must be |S|x|A| = {(S, A)}, got {R.shape}")
        if b0.shape != (S,):
            raise ValueError(f"start must have {S} entries, got {b0.shape}")
        if not 0.0 <= float(self.discount) <= 1.0:
            raise ValueError(f"discount {self.discount} outside [0, 1]")
        T = _check_stochastic("transition", T, self.tol)
        O = _check_stochastic("observation", O, self.tol)
        b0 = _check_stochastic("start", b0[None, :], self.tol)[0]
        for arr in (T, O, R, b0):
            arr.setflags(write=False)
        set_ = object.__setattr__
        set_(self, "transition", T)
        set_(self, "observation", O)
        set_(self, "reward", R)
        set_(self, "start", b0)
        set_(self, "discount", float(self.discount))
        set_(self, "state_names", _names(self.state_names, S))
        set_(self, "action_names", _names(self.action_names, A))
        set_(self, "observation_names", _names(self.observation_names, O.shape[2]))

    @property
    def num_states(self) -> int:
        return self.transition.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def num_observations(self) -> int:
        return self.observation.shape[2]

    @cached_property
    def generative(self) -> np.ndarray:
        """All generative matrices, shape ``|A| x |O| x |S| x |S|``."""
        # G[a, o, i, j] = O[a, i, o] * T[a, j, i]
        G = np.einsum("aio,aji->aoij", self.observation, self.transition)
        G.setflags(write=False)
        return G

    def with_discount(self, discount: float) -> "Pomdp":
        return Pomdp(
            self.transition, self.observation, self.reward, discount, self.start,
            self.state_names, self.action_names, self.observation_names, self.tol,
        )

    def check_interaction(self, a: int, o: int) -> None:
        if not (0 <= a < self.num_actions):
            raise IndexError(f"action {a} out of range [0, {self.num_actions})")
        if not (0 <= o < self.num_observations):
            raise IndexError(f"observation {o} out of range [0, {self.num_observations})")

    def format_seq(self, q: InteractionSeq) -> str:
        """Render a sequence as ``"right travel, left loading"``."""
        return ", ".join(
            f"{self.action_names[a]} {self.observation_names[o]}" for a, o in q
        )

    def parse_seq(self, text: str) -> InteractionSeq:
        """Inverse of :meth:`format_seq`; accepts names or indices."""
        steps = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                a_tok, o_tok = chunk.split()
            except ValueError:
                raise ValueError(f"bad interaction {chunk!r}") from None
            a = _lookup(a_tok, self.action_names)
            o = _lookup(o_tok, self.observation_names)
            steps.append((a, o))
        return tuple(steps)


def _lookup(tok: str, names: tuple[str, ...]) -> int:
    if tok in names:
        return names.index(tok)
    if tok.isdigit() and int(tok) < len(names):
        return int(tok)
    raise ValueError(f"unknown name {tok!r}")


def generative_matrix(m: Pomdp, a: int, o: int) -> np.ndarray:
    """``[G_ao]_ij = Pr(s'=i, o | s=j, a)``."""
    m.check_interaction(a, o)
    return m.generative[a, o]


def generative_matrix_seq(m: Pomdp, q: InteractionSeq) -> np.ndarray:
    """``G_q = ... G_{a2 o2} G_{a1 o1}``; the empty sequence gives the identity."""
    G = np.eye(m.num_states)
    for a, o in q:
        G = generative_matrix(m, a, o) @ G
    return G


def belief_update(m: Pomdp, b: np.ndarray, a: int, o: int) -> tuple[np.ndarray, float]:
    """Bayes filter step; returns ``(b', Pr(o | b, a))``.

    Raises :class:`ZeroProbabilityInteraction` if ``o`` cannot occur.
    """
    unnorm = generative_matrix(m, a, o) @ b
    pr = float(unnorm.sum())
    if pr <= 0.0:
        raise ZeroProbabilityInteraction(a, o, pr)
    return unnorm / pr, pr


def test_probability(m: Pomdp, b: np.ndarray, q: InteractionSeq) -> float:
    """``p(q | h) = b^T G_q^T 1``."""
    v = np.asarray(b, dtype=float)
    for a, o in q:
        v = generative_matrix(m, a, o) @ v
    return float(v.sum())


test_probability.__test__ = False  # keep pytest from collecting it


def history_reward(m: Pomdp, b: np.ndarray, a: int) -> float:
    return float(np.asarray(b) @ m.reward[:, a])


def random_pomdp(
    num_states: int,
    num_actions: int,
    num_observations: int,
    seed: int,
    discount: float = 0.9,
    sparsity: float = 0.0,
) -> Pomdp:
    """Random dense POMDP.

    ``sparsity`` is the probability that an entry of T or the observation
    tensor is zeroed before renormalization (one entry per row always stays),
    which produces low-rank models more often than dense Dirichlet draws.
    """
    rng = np.random.default_rng(seed)

    def rows(shape):
        x = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
        if sparsity > 0:
            mask = rng.random(x.shape) < sparsity
            keep = rng.integers(shape[-1], size=shape[:-1])
            np.put_along_axis(mask, keep[..., None], False, axis=-1)
            x = np.where(mask, 0.0, x)
            x /= x.sum(axis=-1, keepdims=True)
        return x

    T = rows((num_actions, num_states, num_states))
    O = rows((num_actions, num_states, num_observations))
    R = rng.normal(size=(num_states, num_actions))
    b0 = rng.dirichlet(np.ones(num_states))
    return Pomdp(T, O, R, discount, b0)


def make_degenerate_pomdp(num_states: int, num_actions: int, seed: int) -> Pomdp:
    """Random POMDP with a single observation.

    Every test has probability one, so its PSR has rank 1 and its predictive
    state never moves, while beliefs and state-dependent rewards do.
    """
    if num_states < 2 or num_actions < 2:
        raise ValueError("need num_states >= 2 and num_actions >= 2")
    rng = np.random.default_rng(seed)
    T = rng.dirichlet(np.ones(num_states), size=(num_actions, num_states))
    O = np.ones((num_actions, num_states, 1))
    R = rng.normal(size=(num_states, num_actions))
    b0 = np.full(num_states, 1.0 / num_states)
    return Pomdp(T, O, R, 0.9, b0)
