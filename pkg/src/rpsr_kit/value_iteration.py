"""Exact alpha-vector value iteration for POMDPs, PSRs and R-PSRs.

All three share one backup::

    alpha = rho_a + gamma * sum_o P_ao alpha_o

with ``P_ao = G_ao^T`` and ``rho = R`` for POMDPs, and ``P_ao = M_ao`` with
the PSR or R-PSR reward matrix otherwise.  Every reachable predictive state
is ``U^T b`` for a belief ``b``, so vectors are pruned in lifted belief space
(``U alpha``) where the witness LPs are exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy.stats import qmc

from .lp import linprog
from .pomdp_model import Pomdp
from .psr import PsrModel
from .rpsr import RpsrModel

SPACES = ("belief", "predictive", "reward-predictive")
PRUNE_TOL = 1e-9
DEFAULT_EPS_BELLMAN = 1e-6
DEFAULT_MAX_ITER = 2000
TIE_TOL = 1e-9


class AlphaVector(NamedTuple):
    values: np.ndarray
    action: int


@dataclass(frozen=True, eq=False)
class LinearModel:
    """What value iteration needs from a model, in its own state space."""

    space: str
    rewards: np.ndarray  # k x |A|
    propagators: np.ndarray  # |A| x |O| x k x k
    lift: np.ndarray  # |S| x k; state x = lift^T b
    start: np.ndarray  # k

    @property
    def dim(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def num_observations(self) -> int:
        return self.propagators.shape[1]


def pomdp_linear_model(m: Pomdp) -> LinearModel:
    P = np.swapaxes(m.generative, 2, 3)
    return LinearModel("belief", m.reward, P, np.eye(m.num_states), m.start)


def psr_linear_model(psr: PsrModel) -> LinearModel:
    return LinearModel("predictive", psr.R_psr, psr.M, psr.U, psr.start)


def rpsr_linear_model(rpsr: RpsrModel) -> LinearModel:
    return LinearModel("reward-predictive", rpsr.R_rpsr, rpsr.M, rpsr.U, rpsr.start)


@dataclass(eq=False)
class ValueFunction:
    space: str
    vectors: np.ndarray  # n x k
    actions: np.ndarray  # n
    horizon: int = 0
    residual: float = float("inf")
    converged: bool = False
    history: list[int] = field(default_factory=list, repr=False)  # vector counts per iteration

    def __len__(self):
        return len(self.actions)

    def __iter__(self) -> Iterator[AlphaVector]:
        for v, a in zip(self.vectors, self.actions):
            yield AlphaVector(v, int(a))

    def value(self, x: np.ndarray) -> np.ndarray | float:
        """``max_alpha x^T alpha`` for one state or a stack of states (rows)."""
        vals = np.asarray(x) @ self.vectors.T
        return vals.max(axis=-1)

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "horizon": self.horizon,
            "residual": self.residual,
            "converged": self.converged,
            "vectors": [{"action": int(a), "values": v.tolist()} for v, a in zip(self.vectors, self.actions)],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ValueFunction":
        vecs = np.array([v["values"] for v in d["vectors"]], dtype=float)
        acts = np.array([v["action"] for v in d["vectors"]], dtype=int)
        return cls(d["space"], vecs, acts, d["horizon"], d["residual"], d.get("converged", False))


def greedy_action(vf: ValueFunction, x: np.ndarray, tie_tol: float = TIE_TOL) -> int:
    """Action of the best vector at ``x``; near-ties go to the lowest action index."""
    vals = vf.vectors @ np.asarray(x)
    best = vals.max()
    return int(vf.actions[vals >= best - tie_tol].min())


# -- pruning ------------------------------------------------------------

def find_witness(target: np.ndarray, others: np.ndarray, tol: float = PRUNE_TOL) -> np.ndarray | None:
    """A belief where ``target`` beats every row of ``others`` by more than ``tol``.

    Solves ``max delta`` s.t. ``b.(w - target) + delta <= 0`` for all ``w``,
    ``sum b = 1``, ``b >= 0`` (``delta`` split into two non-negative parts).
    """
    n = target.size
    if len(others) == 0:
        return np.full(n, 1.0 / n)
    diff = others - target  # rows w - target
    m = diff.shape[0]
    A_ub = np.hstack([diff, np.ones((m, 1)), -np.ones((m, 1))])
    A_eq = np.hstack([np.ones((1, n)), np.zeros((1, 2))])
    c = np.zeros(n + 2)
    c[n], c[n + 1] = -1.0, 1.0
    res = linprog(c, A_ub, np.zeros(m), A_eq, np.ones(1))
    if res.status != "optimal":
        raise RuntimeError(f"witness LP failed: {res.status}")
    delta = res.x[n] - res.x[n + 1]
    if delta > tol:
        b = np.clip(res.x[:n], 0.0, None)
        return b / b.sum()
    return None


def _pointwise_filter(L: np.ndarray, tol: float) -> list[int]:
    """Drop rows weakly dominated by another row; among near-equal rows keep the first."""
    n = L.shape[0]
    alive = np.ones(n, dtype=bool)
    for i in range(n):
        if not alive[i]:
            continue
        ge = np.all(L >= L[i] - tol, axis=1)  # rows that dominate i
        ge[i] = False
        ge &= alive
        if not np.any(ge):
            continue
        strictly = np.any(L[ge] > L[i] + tol, axis=1)
        earlier = np.flatnonzero(ge) < i
        if np.any(strictly | earlier):
            alive[i] = False
        else:
            # i dominates its near-duplicates that come later
            later = np.flatnonzero(ge)
            alive[later] = False
    return [int(i) for i in np.flatnonzero(alive)]


def _probe_points(n: int) -> np.ndarray:
    pts = [np.eye(n)]
    if n > 1:
        pts.append(np.full((1, n), 1.0 / n))
        rng = np.random.default_rng(12345)
        pts.append(rng.dirichlet(np.ones(n), size=4 * n))
    return np.vstack(pts)


def prune_indices(vectors: np.ndarray, lift: np.ndarray | None = None, tol: float = PRUNE_TOL) -> list[int]:
    """Indices of the vectors that attain the upper envelope somewhere.

    ``vectors`` are rows in model space; ``lift`` maps them to belief space
    (``lift @ alpha``).  Dominated or duplicate vectors are removed first;
    the rest go through Lark-style filtering, where each candidate either
    gets a witness belief (and the best candidate there is kept) or is
    discarded.  Anything discarded is within ``tol`` of the kept envelope.
    """
    vectors = np.atleast_2d(vectors)
    if len(vectors) <= 1:
        return list(range(len(vectors)))
    L = vectors if lift is None else vectors @ lift.T
    cand = _pointwise_filter(L, tol * 1e-1)
    if len(cand) <= 1:
        return cand
    keep: list[int] = []
    # cheap witnesses: clear winners at probe points are certainly needed
    probes = _probe_points(L.shape[1])
    vals = probes @ L[cand].T
    order = np.argsort(-vals, axis=1)
    for r in range(len(probes)):
        first, second = order[r, 0], order[r, 1]
        if vals[r, first] - vals[r, second] > tol:
            j = cand[first]
            if j not in keep:
                keep.append(j)
    rest = [i for i in cand if i not in keep]
    while rest:
        i = rest[0]
        w = find_witness(L[i], L[keep], tol)
        if w is None:
            rest.pop(0)
            continue
        scores = L[rest] @ w
        top = scores.max()
        tied = [rest[k] for k in np.flatnonzero(scores >= top - 1e-12)]
        j = max(tied, key=lambda t: tuple(L[t]))
        keep.append(j)
        rest.remove(j)
    return sorted(keep)


def _lexsort_rows(vectors: np.ndarray, actions: np.ndarray) -> np.ndarray:
    keys = [actions] + [vectors[:, k] for k in range(vectors.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def prune(vectors: np.ndarray, actions: np.ndarray, lift: np.ndarray | None = None,
          tol: float = PRUNE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Pruned ``(vectors, actions)``, after a fixed lexicographic ordering."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    actions = np.asarray(actions, dtype=int)
    order = _lexsort_rows(vectors, actions)
    vectors, actions = vectors[order], actions[order]
    idx = prune_indices(vectors, lift, tol)
    return vectors[idx], actions[idx]


# -- backups --------------------------------------------------------------

def initial_value_function(model: LinearModel) -> ValueFunction:
    """The zero vector; one backup from here gives the one-step rewards."""
    return ValueFunction(model.space, np.zeros((1, model.dim)), np.zeros(1, dtype=int), horizon=0)


def vi_backup(model: LinearModel, vf: ValueFunction, gamma: float, tol: float = PRUNE_TOL) -> ValueFunction:
    """One exact backup with incremental pruning of the cross-sums."""
    if len(vf) == 0:
        raise ValueError("empty value function")
    A, O = model.num_actions, model.num_observations
    lift = model.lift
    out_v, out_a = [], []
    for a in range(A):
        rho = model.rewards[:, a] / O
        cross = None
        for o in range(O):
            proj = rho + gamma * vf.vectors @ model.propagators[a, o].T
            proj, _ = prune(proj, np.zeros(len(proj), dtype=int), lift, tol)
            if cross is None:
                cross = proj
            else:
                summed = (cross[:, None, :] + proj[None, :, :]).reshape(-1, model.dim)
                cross, _ = prune(summed, np.zeros(len(summed), dtype=int), lift, tol)
        out_v.append(cross)
        out_a.append(np.full(len(cross), a))
    vecs, acts = prune(np.vstack(out_v), np.concatenate(out_a), lift, tol)
    return ValueFunction(model.space, vecs, acts, horizon=vf.horizon + 1, history=vf.history + [len(acts)])


def evaluation_points(model: LinearModel, n_interior: int = 256) -> np.ndarray:
    """Polytope vertices plus fixed quasi-random interior points, in model space."""
    S = model.lift.shape[0]
    beliefs = [np.eye(S)]
    if S > 1:
        u = qmc.Halton(d=S, scramble=False).random(n_interior + 1)[1:]
        x = -np.log(np.clip(u, 1e-12, 1.0))
        beliefs.append(x / x.sum(axis=1, keepdims=True))
    return np.vstack(beliefs) @ model.lift


def solve(
    model: LinearModel,
    gamma: float,
    eps_bellman: float = DEFAULT_EPS_BELLMAN,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = PRUNE_TOL,
) -> ValueFunction:
    """Back up until the sup-norm change at the evaluation points is at most
    ``eps * (1 - gamma) / (2 gamma)``; stops early at ``max_iter``."""
    pts = evaluation_points(model)
    vf = vi_backup(model, initial_value_function(model), gamma, tol)
    if gamma == 0.0:
        vf.residual, vf.converged = 0.0, True
        return vf
    threshold = eps_bellman * (1.0 - gamma) / (2.0 * gamma)
    prev = vf.value(pts)
    while vf.horizon < max_iter:
        vf = vi_backup(model, vf, gamma, tol)
        cur = vf.value(pts)
        vf.residual = float(np.abs(cur - prev).max())
        prev = cur
        if vf.residual <= threshold:
            vf.converged = True
            break
    return vf
