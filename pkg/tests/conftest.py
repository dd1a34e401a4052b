import numpy as np
import pytest

from rpsr_kit.fixtures import load_fixture
from rpsr_kit.pomdp_model import random_pomdp


@pytest.fixture(scope="session")
def loadunload():
    return load_fixture("loadunload")


def random_model(seed, max_states=5, max_actions=3, max_obs=3, sparsity=None):
    rng = np.random.default_rng(seed)
    S = int(rng.integers(1, max_states + 1))
    A = int(rng.integers(1, max_actions + 1))
    O = int(rng.integers(1, max_obs + 1))
    sp = float(rng.choice([0.0, 0.5, 0.8])) if sparsity is None else sparsity
    return random_pomdp(S, A, O, seed=seed, sparsity=sp), rng


def random_seq(m, rng, max_len=3):
    n = int(rng.integers(0, max_len + 1))
    return tuple((int(rng.integers(m.num_actions)), int(rng.integers(m.num_observations))) for _ in range(n))


def random_belief(m, rng):
    return rng.dirichlet(np.ones(m.num_states))


@pytest.fixture(scope="session")
def loadunload_models(loadunload):
    from rpsr_kit.evaluation import ModelSet
    from rpsr_kit.fixtures import LOADUNLOAD_REFERENCE_TESTS
    from rpsr_kit.psr import build_psr
    from rpsr_kit.rpsr import build_rpsr

    m = loadunload
    psr = build_psr(m, [m.parse_seq(t) for t in LOADUNLOAD_REFERENCE_TESTS])
    return ModelSet(m, psr, build_rpsr(m))


@pytest.fixture(scope="session")
def loadunload_vfs(loadunload_models):
    from rpsr_kit import value_iteration as vi

    ms = loadunload_models
    g = ms.pomdp.discount
    return {
        "pomdp": vi.solve(vi.pomdp_linear_model(ms.pomdp), g),
        "psr": vi.solve(vi.psr_linear_model(ms.psr), g),
        "rpsr": vi.solve(vi.rpsr_linear_model(ms.rpsr), g),
    }


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
