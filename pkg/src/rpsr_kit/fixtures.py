"""Bundled ``.pomdp`` files."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .parser import parse_pomdp
from .pomdp_model import Pomdp

# The five core tests listed for load/unload, as "action observation" chains.
LOADUNLOAD_REFERENCE_TESTS = (
    "left loading",
    "right travel",
    "right unloading",
    "right travel, left loading",
    "left travel, right travel",
)


def fixture_names() -> list[str]:
    return sorted(p.name[:-6] for p in resources.files(__package__).joinpath("data").iterdir()
                  if p.name.endswith(".pomdp"))


def fixture_text(name: str) -> str:
    res = resources.files(__package__).joinpath("data", f"{name}.pomdp")
    if not res.is_file():
        raise FileNotFoundError(f"no bundled fixture {name!r}; have {fixture_names()}")
    return res.read_text(encoding="utf-8")


def load_fixture(name: str) -> Pomdp:
    return parse_pomdp(fixture_text(name))


def read_model_text(spec: str) -> str:
    """File contents for a path, or for ``builtin:NAME``."""
    if spec.startswith("builtin:"):
        return fixture_text(spec[len("builtin:"):])
    return Path(spec).read_text(encoding="utf-8")
