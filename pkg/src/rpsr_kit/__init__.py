"""PSRs and reward-predictive PSRs built from finite POMDPs."""
from .parser import PomdpParseError, load_pomdp, parse_pomdp, serialize_pomdp
from .pomdp_model import Pomdp, ZeroProbabilityInteraction
from .psr import PsrModel, build_psr, discover_core_tests
from .rpsr import Intent, RpsrModel, build_rpsr

__version__ = "0.1.0"

__all__ = [
    "Intent", "Pomdp", "PomdpParseError", "PsrModel", "RpsrModel", "ZeroProbabilityInteraction",
    "build_psr", "build_rpsr", "discover_core_tests", "load_pomdp", "parse_pomdp", "serialize_pomdp",
]
