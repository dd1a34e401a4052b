"""Command-line front end: ``rpsr-kit {parse,analyze,solve,compare}``.

Exit codes: 0 success, 1 other failure, 2 parse or validation error,
3 value iteration did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import evaluation as ev
from . import psr as psr_mod
from . import rpsr as rpsr_mod
from . import value_iteration as vi
from .fixtures import read_model_text
from .numerics import DEFAULT_TAU
from .parser import PomdpParseError, parse_pomdp
from .pomdp_model import Pomdp

SCHEMA_VERSION = 1
EXIT_OK, EXIT_OTHER, EXIT_PARSE, EXIT_NONCONVERGED = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _probability(text: str) -> float:
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return x


def _positive_int(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return n


def _positive_float(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return x


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rpsr-kit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats=("text", "json", "csv")):
        sp.add_argument("file", help="a .pomdp file, or builtin:NAME for a bundled one")
        sp.add_argument("--format", choices=formats, default="text")
        sp.add_argument("--gamma", type=_probability, help="override the file's discount")

    def model_flags(sp):
        sp.add_argument("--tau", type=_positive_float, default=DEFAULT_TAU, help="independence tolerance")
        sp.add_argument("--eps-acc", type=_positive_float, default=psr_mod.DEFAULT_EPS_ACC,
                        help="PSR reward accuracy threshold on d_inf")
        sp.add_argument("--search", choices=("bfs", "dfs"), default="bfs", help="R-PSR intent search")
        sp.add_argument("--prefer-tests", default="",
                        help="semicolon-separated tests offered first to the PSR core search, "
                             "e.g. 'left loading; right travel, left loading'")

    def vi_flags(sp):
        sp.add_argument("--eps-bellman", type=_positive_float, default=vi.DEFAULT_EPS_BELLMAN)
        sp.add_argument("--max-iter", type=_positive_int, default=vi.DEFAULT_MAX_ITER)
        sp.add_argument("--prune-tol", type=_positive_float, default=vi.PRUNE_TOL,
                        help="witness margin below which a vector is dropped")

    sp = sub.add_parser("parse", help="summarize a model file")
    common(sp)

    sp = sub.add_parser("analyze", help="PSR reward accuracy and R-PSR construction")
    common(sp)
    model_flags(sp)

    sp = sub.add_parser("solve", help="value iteration for one model")
    common(sp)
    model_flags(sp)
    vi_flags(sp)
    sp.add_argument("--model", choices=("pomdp", "psr", "rpsr"), default="pomdp")
    sp.add_argument("-o", "--output", help="write the value function JSON here")
    sp.add_argument("--agreement", type=int, default=0, metavar="N",
                    help="also solve the POMDP and compare greedy actions on N random beliefs")
    sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("compare", help="cross-evaluate the four policies under the three reward models")
    common(sp)
    model_flags(sp)
    vi_flags(sp)
    sp.add_argument("--episodes", type=_positive_int, default=1000)
    sp.add_argument("--steps", type=_positive_int, default=100)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=_positive_int, default=1)
    sp.add_argument("--undiscounted", action="store_true", help="sum rewards without discounting")
    return p


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RPSR_KIT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"RPSR_KIT_SEED={env!r} is not an integer") from None


def _load(args) -> Pomdp:
    m = parse_pomdp(read_model_text(args.file))
    if args.gamma is not None:
        m = m.with_discount(args.gamma)
    return m


def _models(m: Pomdp, args) -> ev.ModelSet:
    prefer = []
    for chunk in args.prefer_tests.split(";"):
        if chunk.strip():
            try:
                prefer.append(m.parse_seq(chunk))
            except ValueError as e:
                raise UsageError(f"--prefer-tests: {e}") from None
    core = psr_mod.discover_core_tests(m, args.tau, prefer=prefer)
    psr = psr_mod.build_psr(m, core, args.tau, args.eps_acc)
    rpsr = rpsr_mod.build_rpsr(m, tau=args.tau, search=args.search)
    return ev.ModelSet(m, psr, rpsr)


def _emit(out, fmt: str, payload: dict, text: str, rows: list[list] | None = None):
    if fmt == "json":
        out.write(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2) + "\n")
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for r in rows if rows is not None else [[k, json.dumps(v)] for k, v in payload.items()]:
            w.writerow(r)
        out.write(buf.getvalue())
    else:
        out.write(text)


def _matrix_text(M: np.ndarray, indent: str = "  ") -> str:
    return "\n".join(indent + " ".join(f"{x: .4f}" for x in row) for row in np.atleast_2d(M)) + "\n"


# -- commands ---------------------------------------------------------------

def cmd_parse(args, out) -> int:
    m = _load(args)
    payload = {
        "states": m.num_states,
        "actions": m.num_actions,
        "observations": m.num_observations,
        "discount": m.discount,
        "start": m.start.tolist(),
        "state_names": list(m.state_names),
        "action_names": list(m.action_names),
        "observation_names": list(m.observation_names),
    }
    text = (
        f"states={m.num_states} actions={m.num_actions} observations={m.num_observations}\n"
        f"discount={m.discount:g}\n"
        f"start={' '.join(f'{x:g}' for x in m.start)}\n"
    )
    _emit(out, args.format, payload, text)
    return EXIT_OK


def cmd_analyze(args, out) -> int:
    m = _load(args)
    models = _models(m, args)
    p_rep = psr_mod.analysis_report(models.psr)
    r_rep = rpsr_mod.analysis_report(models.rpsr)
    payload = {"psr": p_rep, "rpsr": r_rep}
    acc = models.psr.accuracy
    text = (
        f"states={m.num_states} psr_rank={models.psr.rank} rpsr_rank={models.rpsr.rank}\n"
        f"core tests:\n"
        + "".join(f"  {m.format_seq(q) or '(empty)'}\n" for q in models.psr.core_tests)
        + f"accurate={str(acc.accurate).lower()} d_inf={acc.d_inf:.6g} rel_d_inf={acc.rel_d_inf:.6g}\n"
        f"R_psr:\n{_matrix_text(models.psr.R_psr)}"
        f"R_tilde:\n{_matrix_text(acc.R_tilde)}"
        f"rpsr_reconstruction_error={models.rpsr.reconstruction_error():.3g}\n"
    )
    rows = [
        ["model", "rank", "accurate", "d_inf", "rel_d_inf", "reconstruction_error"],
        ["psr", models.psr.rank, acc.accurate, acc.d_inf, acc.rel_d_inf, acc.d_inf],
        ["rpsr", models.rpsr.rank, True, 0.0, 0.0, models.rpsr.reconstruction_error()],
    ]
    _emit(out, args.format, payload, text, rows)
    return EXIT_OK


def _linear(models: ev.ModelSet, which: str) -> vi.LinearModel:
    if which == "pomdp":
        return vi.pomdp_linear_model(models.pomdp)
    if which == "psr":
        return vi.psr_linear_model(models.psr)
    return vi.rpsr_linear_model(models.rpsr)


def greedy_agreement(models: ev.ModelSet, vf_pomdp, vf_other, which: str, n: int, seed: int) -> int:
    """Number of disagreements between POMDP-VI and another model's greedy action."""
    rng = np.random.default_rng(seed)
    lift = _linear(models, which).lift
    bad = 0
    for b in rng.dirichlet(np.ones(models.pomdp.num_states), size=n):
        if vi.greedy_action(vf_pomdp, b) != vi.greedy_action(vf_other, lift.T @ b):
            bad += 1
    return bad


def cmd_solve(args, out) -> int:
    m = _load(args)
    models = _models(m, args)
    vf = vi.solve(_linear(models, args.model), m.discount, args.eps_bellman, args.max_iter, args.prune_tol)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, **vf.to_json()}, fh, indent=2)
    payload = {
        "model": args.model,
        "space": vf.space,
        "horizon": vf.horizon,
        "residual": vf.residual,
        "converged": vf.converged,
        "vectors": len(vf),
        "dimension": int(vf.vectors.shape[1]),
        "start_value": float(vf.value(_linear(models, args.model).start)),
    }
    if args.agreement > 0:
        vf_p = vf if args.model == "pomdp" else vi.solve(
            vi.pomdp_linear_model(m), m.discount, args.eps_bellman, args.max_iter, args.prune_tol)
        payload["agreement"] = {
            "samples": args.agreement,
            "disagreements": greedy_agreement(models, vf_p, vf, args.model, args.agreement, _seed(args)),
        }
    text = "".join(f"{k}={v}\n" for k, v in payload.items() if k != "agreement")
    if "agreement" in payload:
        ag = payload["agreement"]
        text += f"greedy agreement with pomdp: {ag['samples'] - ag['disagreements']}/{ag['samples']}\n"
    _emit(out, args.format, payload, text)
    return EXIT_OK if vf.converged else EXIT_NONCONVERGED


def cmd_compare(args, out) -> int:
    m = _load(args)
    models = _models(m, args)
    vfs = {k: vi.solve(_linear(models, k), m.discount, args.eps_bellman, args.max_iter, args.prune_tol)
           for k in ev.SCORERS}
    gamma = 1.0 if args.undiscounted else m.discount
    grid = ev.cross_evaluate(models, ev.standard_policies(models, vfs), args.episodes, args.steps,
                             _seed(args), gamma, args.threads)
    payload = {
        "episodes": args.episodes,
        "steps": args.steps,
        "seed": _seed(args),
        "gamma": gamma,
        "converged": {k: v.converged for k, v in vfs.items()},
        **grid.to_json(),
    }
    width = 16
    lines = ["model".ljust(8) + "".join(p.rjust(width) for p in grid.policies)]
    for s in grid.scorers:
        best = set(grid.best(s))
        cells = []
        for p in grid.policies:
            c = grid.cells[s, p]
            mark = "*" if p in best else " "
            cells.append(f"{c.mean:.1f} ± {c.std:.1f}{mark}".rjust(width))
        lines.append(s.ljust(8) + "".join(cells))
    text = "\n".join(lines) + "\n(* best policy for the model)\n"
    rows = [["scorer"] + [f"{p}_{k}" for p in grid.policies for k in ("mean", "std")]]
    for s in grid.scorers:
        rows.append([s] + [x for p in grid.policies for x in (grid.cells[s, p].mean, grid.cells[s, p].std)])
    _emit(out, args.format, payload, text, rows)
    return EXIT_OK if all(v.converged for v in vfs.values()) else EXIT_NONCONVERGED


COMMANDS = {"parse": cmd_parse, "analyze": cmd_analyze, "solve": cmd_solve, "compare": cmd_compare}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (PomdpParseError, UsageError) as e:
        print(f"rpsr-kit: {e}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as e:
        print(f"rpsr-kit: {e}", file=sys.stderr)
        return EXIT_OTHER
    except Exception as e:  # noqa: BLE001
        print(f"rpsr-kit: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
