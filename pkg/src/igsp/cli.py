"""Command-line entry point: ``igsp {simulate,learn,equiv,enumerate,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from igsp.bench import FAMILY_GENERATORS, ExperimentPlan, family_targets, run_experiment, write_results
from igsp.enumeration import cross_validate_theorems, default_battery, enumerate_dags, partition_imec
from igsp.exceptions import IgspError, InternalError, InvalidArgumentError, PreconditionError
from igsp.graph import Permutation, dump_graph, load_graph
from igsp.interventions import i_markov_equivalent, i_markov_equivalent_conservative, load_family
from igsp.search import SearchConfig, igsp_search
from igsp.semsim import (
    KINDS,
    InterventionSpec,
    read_dataset_csv,
    sample_data,
    sample_random_dag,
    sample_weights,
    write_dataset_csv,
    write_model_json,
)
from igsp.stats import (
    DEFAULT_ALPHA_CI,
    DEFAULT_ALPHA_INV,
    DsepCiOracle,
    FisherZDecider,
    GaussianInvarianceDecider,
    HsicInvarianceDecider,
    IdagInvarianceOracle,
    TestCache,
    TestLog,
)

log = logging.getLogger("igsp")

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _on_off(s: str) -> bool:
    if s not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {s!r}")
    return s == "on"


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    if args.targets:
        fam = load_family(args.targets)
        if fam.p != args.p:
            raise InvalidArgumentError(f"--targets covers {fam.p} nodes but --p is {args.p}")
        targets = [sorted(t) for t in fam if t]
    else:
        plan = ExperimentPlan(p=args.p, family=args.family, k=args.k, replicates=1)
        targets = family_targets(plan, args.seed)
    g = sample_random_dag(args.p, args.avg_neighborhood, args.seed)
    m = sample_weights(g, args.seed)
    specs = [
        InterventionSpec(args.kind, t, factor=args.factor, alpha=args.mix_alpha, shift_var=args.shift_var) for t in targets
    ]
    data = sample_data(m, specs, args.n, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_graph(g, out / "graph.json")
    write_model_json(m, out / "model.json")
    write_dataset_csv(data, out / "data.csv")
    _write_json(data.fam.to_dict(), out / "targets.json")
    log.info("wrote %s (%d blocks, %d rows each)", out, len(data.blocks), args.n)
    return EXIT_OK


def _parse_pi0(spec: str, p: int) -> Permutation | None:
    if spec == "random":
        return None
    if not spec.startswith("given:"):
        raise InvalidArgumentError(f"--pi0 must be 'random' or 'given:<comma-separated order>', got {spec!r}")
    try:
        order = tuple(int(v) for v in spec[len("given:"):].split(","))
    except ValueError:
        raise InvalidArgumentError(f"--pi0: cannot parse {spec!r}") from None
    if sorted(order) != list(range(1, p + 1)):
        raise InvalidArgumentError(f"--pi0 must be a permutation of 1..{p}")
    return Permutation(order)


def cmd_learn(args) -> int:
    fam = load_family(args.targets) if args.targets else None
    data = read_dataset_csv(args.data, fam)
    fam = data.fam
    cache = TestCache()
    test_log = TestLog(args.test_log) if args.test_log else None
    if args.oracle_graph:
        truth = load_graph(args.oracle_graph)
        if truth.p != data.p:
            raise InvalidArgumentError(f"--oracle-graph has {truth.p} nodes but the data has {data.p}")
        ci, inv = DsepCiOracle(truth), IdagInvarianceOracle(truth, fam)
    else:
        ci = FisherZDecider(data, args.alpha_ci, cache, test_log)
        if args.test == "gaussian":
            inv = GaussianInvarianceDecider(data, args.alpha_inv, cache, test_log)
        else:
            inv = HsicInvarianceDecider(data, args.alpha_inv, cache, test_log, max_points=args.hsic_max_points or None)
    cfg = SearchConfig(
        ci, inv, fam, pool=args.pool, rng_seed=args.seed, max_restarts=args.restarts, screen_targets=args.screen_targets
    )
    res = igsp_search(data, cfg, _parse_pi0(args.pi0, data.p))
    out = {
        "graph": res.g.to_dict(),
        "permutation": list(res.pi.order),
        "n_contradictory": res.n_contradictory,
        "truncated": res.truncated,
        "targets": fam.to_dict(),
        "tests": {"ci": ci.n_tests, "invariance": inv.n_tests},
        "trace": [s.to_dict() for s in res.trace.steps],
        "trace_summary": res.trace.summary(),
    }
    _write_json(out, args.out)
    return EXIT_OK


def cmd_equiv(args) -> int:
    g1, g2 = load_graph(args.g1), load_graph(args.g2)
    fam = load_family(args.targets)
    if fam.has_empty():
        verdict, criterion = i_markov_equivalent(g1, g2, fam), "skeleton-vstructure"
    elif fam.is_conservative():
        verdict, criterion = i_markov_equivalent_conservative(g1, g2, fam), "relabeled"
    else:
        raise PreconditionError("family neither contains the empty target nor is conservative")
    _write_json({"equivalent": verdict, "criterion": criterion}, args.out)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    cat = enumerate_dags(args.p, allow_large=args.allow_p6)
    fam = load_family(args.targets) if args.targets else None
    if fam is not None and fam.p != args.p:
        raise InvalidArgumentError(f"--targets covers {fam.p} nodes but --p is {args.p}")
    if args.emit == "classes":
        if fam is None:
            raise InvalidArgumentError("--emit classes needs --targets")
        classes = partition_imec(cat, fam)
        out = {
            "p": args.p,
            "targets": fam.to_dict(),
            "n_dags": len(cat),
            "n_classes": len(classes),
            "classes": [[cat[k].sorted_edges() for k in c] for c in classes],
        }
    else:
        battery = [fam] if fam is not None else default_battery(args.p, seed=args.seed)
        report = cross_validate_theorems(cat, battery)
        out = report.to_dict()
    _write_json(out, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.plan:
        plan = ExperimentPlan.from_json(Path(args.plan).read_text())
    else:
        plan = ExperimentPlan(
            p=args.p, avg_neighborhood=args.avg_neighborhood, n_per_block=args.n, kind=args.kind,
            factor=args.factor, mix_alpha=args.mix_alpha, shift_var=args.shift_var, family=args.family, k=args.k,
            replicates=args.replicates, seed=args.seed, ci=args.ci, inv=args.inv, alpha_ci=args.alpha_ci,
            alpha_inv=args.alpha_inv, pool=args.pool, restarts=args.restarts, screen_targets=args.screen_targets,
        )
    res = run_experiment(plan, threads=args.threads)
    paths = write_results(res, args.out, args.name)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    _write_json(res.summary, None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=int, default=10, help="number of variables")
    p.add_argument("--avg-neighborhood", type=float, default=1.5)
    p.add_argument("--kind", choices=KINDS, default="perfect")
    p.add_argument("--factor", type=float, default=10.0, help="inhibiting: divide incoming weights by this")
    p.add_argument("--mix-alpha", type=float, default=0.5, help="imperfect: per-sample success probability")
    p.add_argument("--shift-var", type=float, default=1.0, help="shift: added noise variance")
    p.add_argument("--family", choices=FAMILY_GENERATORS, default="all-singletons")
    p.add_argument("--k", type=int, default=1, help="targets for the k-subset family")


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommands accept the global flags too; SUPPRESS keeps a value given
        # before the subcommand from being reset by the subparser default
        g = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=d(0), help="base random seed (default 0)")
        g.add_argument("--threads", type=int, default=d(1), help="worker threads for replicates (default 1)")
        g.add_argument("--log-level", default=d("WARNING"), choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        return g

    common = global_flags(suppress=True)
    parser = _Parser(
        prog="igsp", description="Causal structure learning from general interventions.", parents=[global_flags(False)]
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="sample a random linear SEM and interventional data")
    _add_sim_args(s)
    s.add_argument("--n", type=int, default=1000, help="samples per block")
    s.add_argument("--targets", help="JSON target family (overrides --family)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("learn", parents=[common], help="run the search on a dataset")
    s.add_argument("--data", required=True, help="dataset CSV")
    s.add_argument("--targets", help="JSON target family; default: read from the CSV target column")
    s.add_argument("--alpha-ci", type=float, default=DEFAULT_ALPHA_CI)
    s.add_argument("--alpha-inv", type=float, default=DEFAULT_ALPHA_INV)
    s.add_argument("--test", choices=["hsic", "gaussian"], default="hsic")
    s.add_argument("--hsic-max-points", type=int, default=500, help="subsample cap per HSIC test; 0 disables")
    s.add_argument("--oracle-graph", help="use d-separation oracles for this graph instead of tests")
    s.add_argument("--pool", type=_on_off, default=False, metavar="{on,off}")
    s.add_argument("--screen-targets", type=_on_off, default=True, metavar="{on,off}")
    s.add_argument("--pi0", default="random", help="'random' or 'given:3,1,2'")
    s.add_argument("--restarts", type=int, default=1, help="number of starting permutations")
    s.add_argument("--test-log", help="append every executed test to this CSV")
    s.add_argument("--out", default="-", help="result JSON (default stdout)")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("equiv", parents=[common], help="are two DAGs interventionally Markov equivalent?")
    s.add_argument("--g1", required=True)
    s.add_argument("--g2", required=True)
    s.add_argument("--targets", required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("enumerate", parents=[common], help="exhaustive equivalence classes / criterion battery")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--targets", help="JSON target family; for --emit report the default battery is used without it")
    s.add_argument("--emit", choices=["classes", "report"], default="report")
    s.add_argument("--allow-p6", action="store_true", help="lift the p <= 5 cap to 6")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("bench", parents=[common], help="run a replicated simulation study")
    s.add_argument("--plan", help="JSON experiment plan (other plan flags are ignored)")
    _add_sim_args(s)
    s.add_argument("--n", type=int, default=1000, help="samples per block")
    s.add_argument("--replicates", type=int, default=100)
    s.add_argument("--ci", choices=["fisher_z", "oracle"], default="fisher_z")
    s.add_argument("--inv", choices=["hsic", "gaussian", "oracle"], default="gaussian")
    s.add_argument("--alpha-ci", type=float, default=DEFAULT_ALPHA_CI)
    s.add_argument("--alpha-inv", type=float, default=DEFAULT_ALPHA_INV)
    s.add_argument("--pool", type=_on_off, default=False, metavar="{on,off}")
    s.add_argument("--screen-targets", type=_on_off, default=True, metavar="{on,off}")
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--name", default="experiment")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1 or args.seed < 0:
        print("igsp: error: --threads must be positive and --seed non-negative", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except InternalError as e:
        print(f"igsp: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (IgspError, OSError) as e:
        print(f"igsp: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # anything unexpected is an invariant violation on our side
        log.debug("unexpected failure", exc_info=True)
        print(f"igsp: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
