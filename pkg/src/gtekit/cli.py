"""``gte`` command line: scoring, evaluation, oracles, expressiveness checkers, synthetic data.

Exit codes: 0 success, 1 usage error, 2 data error, 3 a checker found a
counterexample.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import expressiveness as ex
from .errors import DataError, GteError, InvariantViolation, MemoryBudgetError, PreconditionError
from .evaluation import DEFAULT_TOPN, evaluate, tc_difference_experiment, write_tcdiff_csv
from .graph_core import load_interactions, load_split
from .gte import DEFAULT_LAYERS, DEFAULT_MEMORY_BUDGET, recommend
from .paradigm import (FROZEN_SEARCH_SEED, EmbeddingSet, SearchParams, kendall_vs_ideal, search_tc_violation,
                       simplified_propagate, verify_walk_expansion)
from .report import EvalReport, MetricRow, emit_report, report_to_csv
from .synthetic import SyntheticConfig, generate_split, write_split
from .tc_oracle import augmented_adjacency, tc_bruteforce, tc_matrix_power, tc_user_items

log = logging.getLogger("gtekit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VIOLATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _topn_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive")
    return values


def _nonneg(text) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _positive(text) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _existing(text) -> Path:
    p = Path(text)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return p


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = (x.strip() for x in s.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=_existing, help="key=value file; command-line flags take precedence")
    common.add_argument("--threads", type=_positive, default=1, help="worker threads (default 1)")
    common.add_argument("--memory-budget", type=_positive, default=DEFAULT_MEMORY_BUDGET // 2**20,
                        help="dense-matrix budget in MiB (default %(default)s)")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="gte", description="Learning-less graph topology encoder toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("score", parents=[common], help="top-N recommendations per user")
    s.add_argument("--train", type=_existing, required=True, help="interaction file")
    s.add_argument("--layers", type=_nonneg, default=DEFAULT_LAYERS)
    s.add_argument("--topn", type=_positive, default=20)
    s.add_argument("--exclude-train", action=argparse.BooleanOptionalAction, default=True,
                   help="drop each user's training items from the ranking (default on)")
    s.add_argument("--user", action="append", help="raw user ID to score (repeatable; default all)")
    s.add_argument("--batch-size", type=_positive, default=256)

    e = sub.add_parser("eval", parents=[common], help="all-rank Recall/NDCG evaluation")
    e.add_argument("--train", type=_existing, required=True)
    e.add_argument("--test", type=_existing, required=True)
    e.add_argument("--layers", type=_nonneg, default=DEFAULT_LAYERS)
    e.add_argument("--topn", type=_topn_list, default=list(DEFAULT_TOPN), help="cutoffs, e.g. 20,40")
    e.add_argument("--exclude-train", action=argparse.BooleanOptionalAction, default=True)
    e.add_argument("--format", choices=["csv", "json"], default="csv")
    e.add_argument("--batch-size", type=_positive, default=256)

    t = sub.add_parser("tc", parents=[common], help="user-item topological closeness table")
    t.add_argument("--graph", type=_existing, required=True)
    t.add_argument("--k", type=_nonneg, default=DEFAULT_LAYERS)
    t.add_argument("--user", action="append", help="raw user ID (repeatable; default all)")
    t.add_argument("--method", choices=["propagate", "matrix", "bruteforce"], default="propagate")

    pr = sub.add_parser("prove", parents=[common], help="exhaustive expressiveness checkers")
    pr.add_argument("--theorem", choices=["2", "3", "4", "wl"], required=True,
                    help="2: residual separation table, 3: no Type II on bipartite, "
                         "4: residual separation on bipartite, wl: 1-WL soundness")
    pr.add_argument("--nmax", type=_positive, default=None,
                    help="largest node count (default 7 for 2, 8 for 3/4, 6 for wl)")
    pr.add_argument("--rounds", type=_positive, default=None, help="refinement rounds (default: node count)")

    pa = sub.add_parser("paradigm", parents=[common], help="random-embedding propagation experiments")
    pa.add_argument("action", choices=["verify-lemma6", "search-violation", "kendall"])
    pa.add_argument("--graph", type=_existing, help="interaction file (verify-lemma6, kendall)")
    pa.add_argument("--dim", type=_positive, default=32)
    pa.add_argument("--layers", type=_nonneg, default=DEFAULT_LAYERS)
    pa.add_argument("--seed", type=int, default=FROZEN_SEARCH_SEED)
    pa.add_argument("--trials", type=_nonneg, default=10_000)
    pa.add_argument("--tol", type=float, default=1e-9)
    pa.add_argument("--max-users", type=_positive, default=10)
    pa.add_argument("--max-items", type=_positive, default=10)
    pa.add_argument("--edge-prob", type=float, default=0.35)
    pa.add_argument("--scorer", choices=["paradigm", "gte"], default="paradigm")

    d = sub.add_parser("tcdiff", parents=[common], help="closeness of test positives vs sampled negatives")
    d.add_argument("--train", type=_existing, required=True)
    d.add_argument("--test", type=_existing, required=True)
    d.add_argument("--samples", type=_nonneg, default=400)
    d.add_argument("--k", type=_nonneg, default=DEFAULT_LAYERS)
    d.add_argument("--seed", type=int, default=0)

    gp = sub.add_parser("gen", parents=[common], help="synthetic community-structured train/test split")
    gp.add_argument("--users", type=_positive, required=True)
    gp.add_argument("--items", type=_positive, required=True)
    gp.add_argument("--edges", type=_nonneg, required=True)
    gp.add_argument("--communities", type=_positive, default=10)
    gp.add_argument("--intra", type=float, default=0.85, help="probability an edge stays inside the user's group")
    gp.add_argument("--test-fraction", type=float, default=0.2)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--out-dir", type=Path, required=True)
    return p


def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags, filling anything not given on the command line from ``--config``."""
    parser = build_parser()
    subparsers = parser._subparsers._group_actions[0].choices
    required = {}
    for name, sp in subparsers.items():
        required[name] = [a for a in sp._actions if a.required]
        for a in required[name]:
            a.required = False
    args = parser.parse_args(argv)
    sub = subparsers[args.command]
    if args.config is not None:
        _merge_config(parser, sub, args, argv)
    for action in required[args.command]:
        if getattr(args, action.dest, None) is None:
            sub.error(f"the following arguments are required: {action.option_strings[0]}")
    return args


def _merge_config(parser, sub, args, argv) -> None:
    actions = {a.dest: a for a in sub._actions}
    given = set()
    for tok in (argv if argv is not None else sys.argv[1:]):
        if tok.startswith("--"):
            name = tok[2:].split("=", 1)[0]
            if name.startswith("no-"):
                name = name[3:]
            given.add(name.replace("-", "_"))
    try:
        values = read_config(args.config)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"gte: error: {exc}\n")
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            parser.exit(EXIT_USAGE, f"gte: error: unknown config key {key!r} for '{args.command}'\n")
        if key in given:
            continue
        try:
            if isinstance(action, argparse.BooleanOptionalAction) or action.nargs == 0:
                value = _parse_bool(raw)
            elif isinstance(action, argparse._AppendAction):
                value = [x.strip() for x in raw.split(",") if x.strip()]
            elif action.type is not None:
                value = action.type(raw)
            else:
                value = raw
        except (argparse.ArgumentTypeError, ValueError, UsageError) as exc:
            parser.exit(EXIT_USAGE, f"gte: error: config key {key!r}: {exc}\n")
        if action.choices is not None and value not in action.choices:
            parser.exit(EXIT_USAGE, f"gte: error: config key {key!r}: {value!r} not in {list(action.choices)}\n")
        setattr(args, key, value)


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _user_indices(ids, raw_users):
    if not raw_users:
        return None
    missing = [u for u in raw_users if u not in ids.user_index]
    if missing:
        raise DataError(f"unknown user id(s): {', '.join(missing)}")
    return np.array([ids.user_index[u] for u in raw_users], dtype=np.int64)


def _batch_size(args, g) -> int:
    # each batch column holds user and item states plus a float shadow in the worst case
    per_column = 3 * 8 * max(g.num_nodes, 1)
    cap = max(1, (args.memory_budget * 2**20) // per_column)
    return int(min(args.batch_size, cap))


def cmd_score(args) -> int:
    g, ids = load_interactions(args.train)
    args.batch_size = _batch_size(args, g)
    users = _user_indices(ids, args.user)
    with _output(args.out) as fh:
        fh.write("user,rank,item,score\n")
        for r in recommend(g, args.layers, args.topn, args.exclude_train, users, args.batch_size):
            uid = ids.user_ids[r.user]
            for rank, (item, score) in enumerate(zip(r.items, r.scores), 1):
                fh.write(f"{uid},{rank},{ids.item_ids[item]},{score}\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    split = load_split(args.train, args.test)
    args.batch_size = _batch_size(args, split.train)
    report = evaluate(split, args.layers, args.topn, args.exclude_train, args.batch_size, args.threads)
    log.info("evaluation finished in %.2f s", report.runtime_seconds)
    if args.out is None:
        sys.stdout.write(report_to_csv(report))
    else:
        emit_report(report, args.out, args.format)
    print(f"runtime_seconds={report.runtime_seconds:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_tc(args) -> int:
    g, ids = load_interactions(args.graph)
    users = _user_indices(ids, args.user)
    users = np.arange(g.num_users) if users is None else users
    if args.method == "matrix":
        need = 2 * 8 * g.num_nodes**2
        if need > args.memory_budget * 2**20:
            raise MemoryBudgetError(f"dense closeness matrix needs {need / 2**20:.1f} MiB; use --method propagate")
        tc = tc_matrix_power(g, args.k).entries
    aug = augmented_adjacency(g) if args.method == "propagate" else None
    with _output(args.out) as fh:
        fh.write("u,v,k,tc\n")
        for u in users:
            if args.method == "propagate":
                row = tc_user_items(g, int(u), args.k, aug)
            elif args.method == "matrix":
                row = tc[u, g.num_users:]
            else:
                row = [tc_bruteforce(g, int(u), g.item_node(i), args.k) for i in range(g.num_items)]
            for i, value in enumerate(row):
                fh.write(f"{ids.user_ids[u]},{ids.item_ids[i]},{args.k},{int(value)}\n")
    return EXIT_OK


def cmd_prove(args) -> int:
    if args.theorem == "2":
        report = ex.sweep_residual_separation(args.nmax or 7, args.rounds)
    elif args.theorem in ("3", "4"):
        lemma, thm = ex.sweep_bipartite(args.nmax or ex.MAX_BIPARTITE_SWEEP_NODES, args.rounds)
        report = lemma if args.theorem == "3" else thm
    else:
        report = ex.sweep_wl(args.nmax or 6)
    with _output(args.out) as fh:
        fh.write(report.summary() + "\n")
        fh.write(f"{len(report.violations)} violations\n")
        for v in report.violations:
            fh.write(json.dumps(v, default=str) + "\n")
    if not report.ok:
        raise InvariantViolation(f"{len(report.violations)} counterexample(s) found")
    return EXIT_OK


def cmd_paradigm(args) -> int:
    if args.action == "search-violation":
        params = SearchParams(max_users=args.max_users, max_items=args.max_items, edge_prob=args.edge_prob,
                              dim=args.dim, layers=args.layers)
        res = search_tc_violation(params, args.trials, args.seed, args.scorer)
        with _output(args.out) as fh:
            if res.found:
                fh.write(json.dumps(res.counterexample.to_dict(), indent=2, sort_keys=True) + "\n")
            else:
                fh.write(json.dumps({"result": "none found", "trials": res.trials_run}) + "\n")
        return EXIT_OK
    if args.graph is None:
        raise UsageError(f"paradigm {args.action} needs --graph")
    g, ids = load_interactions(args.graph)
    e0 = EmbeddingSet.random(g.num_nodes, args.dim, args.seed)
    if args.action == "verify-lemma6":
        rep = verify_walk_expansion(g, e0, args.layers, args.tol)
        with _output(args.out) as fh:
            fh.write(f"layers={rep.layers} max_relative_deviation={rep.max_relative_deviation:.3e} "
                     f"tol={rep.tol:.1e} {'PASS' if rep.ok else 'FAIL'}\n")
        if not rep.ok:
            raise InvariantViolation("walk-count expansion does not match propagation")
        return EXIT_OK
    scores = simplified_propagate(g, e0, args.layers).scores
    ks = kendall_vs_ideal(g, scores, args.layers)
    report = EvalReport([MetricRow("kendall_tau", None, ks.mean, ks.evaluated, ks.skipped)], 0.0,
                        {"layers": args.layers, "dim": args.dim, "seed": args.seed})
    with _output(args.out) as fh:
        fh.write(report_to_csv(report))
        fh.write("\nuser,tau\n")
        for u, tau in enumerate(ks.per_user):
            fh.write(f"{ids.user_ids[u]},{'' if np.isnan(tau) else repr(float(tau))}\n")
    return EXIT_OK


def cmd_tcdiff(args) -> int:
    split = load_split(args.train, args.test)
    res = tc_difference_experiment(split, args.samples, args.k, args.seed)
    if args.out is None:
        sys.stdout.write("user,pos,neg,k,diff\n")
        for s in res.samples:
            sys.stdout.write(f"{split.ids.user_ids[s.user]},{split.ids.item_ids[s.pos]},"
                             f"{split.ids.item_ids[s.neg]},{s.k},{s.diff}\n")
    else:
        write_tcdiff_csv(res, args.out, split.ids)
    print(json.dumps(res.summary(), sort_keys=True), file=sys.stderr)
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = SyntheticConfig(args.users, args.items, args.edges, args.communities, args.intra,
                          args.test_fraction, args.seed)
    split = generate_split(cfg)
    train, test = write_split(split, args.out_dir)
    print(f"wrote {train} ({split.train.num_edges} edges) and {test}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "score": cmd_score, "eval": cmd_eval, "tc": cmd_tc, "prove": cmd_prove,
    "paradigm": cmd_paradigm, "tcdiff": cmd_tcdiff, "gen": cmd_gen,
}


def run(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gte: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"gte: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"gte: invariant violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (GteError, OSError) as exc:
        print(f"gte: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
