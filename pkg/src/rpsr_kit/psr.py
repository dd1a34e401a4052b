"""Linear PSRs built from a POMDP, and how well they model its rewards."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import DEFAULT_TAU, Basis, column_pseudoinverse
from .pomdp_model import InteractionSeq, Pomdp, ZeroProbabilityInteraction

DEFAULT_EPS_ACC = 1e-6


class DependentCoreSetError(ValueError):
    pass


def outcome(m: Pomdp, q: InteractionSeq) -> np.ndarray:
    """``u(q)``: probability of the test's observations from each start state."""
    u = np.ones(m.num_states)
    for a, o in reversed(q):
        m.check_interaction(a, o)
        u = m.generative[a, o].T @ u
    return u


def _interactions(m: Pomdp):
    for a in range(m.num_actions):
        for o in range(m.num_observations):
            yield (a, o)


def discover_core_tests(
    m: Pomdp,
    tau: float = DEFAULT_TAU,
    prefer: Iterable[InteractionSeq] = (),
) -> list[InteractionSeq]:
    """Breadth-first search for a maximal set of linearly independent tests.

    Tests in ``prefer`` are offered to the basis first, in the given order.
    Then all length-one tests are offered (actions, then observations, in
    declaration order), then the empty test, and each round extends every
    test accepted in the previous round to ``a o q``.  The search stops when
    a round accepts nothing; since rejected outcomes stay in the span as it
    grows, only the newest tests need extending.
    """
    basis = Basis(m.num_states, tau)
    core: list[InteractionSeq] = []

    def offer(q):
        if q not in core and basis.try_extend(outcome(m, q)):
            core.append(q)
            return True
        return False

    frontier = [tuple(q) for q in prefer if offer(tuple(q))]
    frontier += [(ao,) for ao in _interactions(m) if offer((ao,))]
    offer(())
    while frontier:
        new = []
        for q in frontier:
            for ao in _interactions(m):
                if offer((ao,) + q):
                    new.append((ao,) + q)
        frontier = new
    return core


@dataclass(frozen=True)
class Accuracy:
    accurate: bool
    d_inf: float
    rel_d_inf: float
    R_tilde: np.ndarray


@dataclass(frozen=True, eq=False)
class PsrModel:
    pomdp: Pomdp
    core_tests: tuple[InteractionSeq, ...]
    U: np.ndarray
    U_pinv: np.ndarray
    M: np.ndarray  # |A| x |O| x k x k, M[a, o][:, i] = m_{a o q_i}
    m_ao: np.ndarray  # |A| x |O| x k
    R_psr: np.ndarray  # k x |A|
    accuracy: Accuracy

    @property
    def rank(self) -> int:
        return len(self.core_tests)

    @property
    def start(self) -> np.ndarray:
        return predictive_state(self, self.pomdp.start)

    def parameter(self, q: InteractionSeq) -> np.ndarray:
        """``m_q = U^+ u(q)``."""
        return self.U_pinv @ outcome(self.pomdp, q)


def _check_independent(basis_dim: int, cols: Sequence[np.ndarray], tau: float):
    b = Basis(basis_dim, tau)
    for i, c in enumerate(cols):
        if not b.try_extend(c):
            raise DependentCoreSetError(f"core element {i} is linearly dependent on the previous ones")


def extension_operators(m: Pomdp, U: np.ndarray, U_pinv: np.ndarray) -> np.ndarray:
    """``M[a, o] = U^+ G_ao^T U``: column i is the parameter of ``a o`` prefixed to core i."""
    return np.einsum("ki,aoji,jc->aokc", U_pinv, m.generative, U)


def reward_accuracy(R: np.ndarray, U: np.ndarray, U_pinv: np.ndarray, eps_acc: float) -> Accuracy:
    R_tilde = U @ (U_pinv @ R)
    d_inf = float(np.abs(R - R_tilde).max()) if R.size else 0.0
    scale = float(np.abs(R).max()) if R.size else 0.0
    rel = d_inf / scale if scale > 0 else 0.0
    return Accuracy(d_inf <= eps_acc, d_inf, rel, R_tilde)


def build_psr(
    m: Pomdp,
    core_tests: Sequence[InteractionSeq] | None = None,
    tau: float = DEFAULT_TAU,
    eps_acc: float = DEFAULT_EPS_ACC,
) -> PsrModel:
    if core_tests is None:
        core_tests = discover_core_tests(m, tau)
    core_tests = tuple(tuple(q) for q in core_tests)
    cols = [outcome(m, q) for q in core_tests]
    _check_independent(m.num_states, cols, tau)
    U = np.column_stack(cols)
    U_pinv = column_pseudoinverse(U)
    ones = np.ones(m.num_states)
    m_ao = np.einsum("ki,aoji,j->aok", U_pinv, m.generative, ones)
    return PsrModel(
        pomdp=m,
        core_tests=core_tests,
        U=U,
        U_pinv=U_pinv,
        M=extension_operators(m, U, U_pinv),
        m_ao=m_ao,
        R_psr=U_pinv @ m.reward,
        accuracy=reward_accuracy(m.reward, U, U_pinv, eps_acc),
    )


def predictive_state(psr: PsrModel, b: np.ndarray) -> np.ndarray:
    """``p = U^T b``; entry i is the probability of core test i."""
    return psr.U.T @ np.asarray(b, dtype=float)


def psr_state_update(psr: PsrModel, p: np.ndarray, a: int, o: int, tol: float = 1e-12) -> tuple[np.ndarray, float]:
    psr.pomdp.check_interaction(a, o)
    pr = float(p @ psr.m_ao[a, o])
    if pr <= tol:
        raise ZeroProbabilityInteraction(a, o, pr)
    return (p @ psr.M[a, o]) / pr, pr


def psr_rewards(psr: PsrModel, p: np.ndarray, a: int) -> float:
    return float(p @ psr.R_psr[:, a])


def analysis_report(psr: PsrModel) -> dict:
    m = psr.pomdp
    acc = psr.accuracy
    return {
        "rank": psr.rank,
        "core_tests": [[[m.action_names[a], m.observation_names[o]] for a, o in q] for q in psr.core_tests],
        "accurate": bool(acc.accurate),
        "d_inf": acc.d_inf,
        "rel_d_inf": acc.rel_d_inf,
        "R_psr": psr.R_psr.tolist(),
        "R_tilde": acc.R_tilde.tolist(),
    }
