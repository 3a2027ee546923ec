"""``stylerank`` command line: train, simulate, rank, aggregate, nash.

Every flag can also come from an environment variable named ``STYLERANK_`` plus
the flag name in upper case with dashes turned into underscores
(``--alpha-grid`` -> ``STYLERANK_ALPHA_GRID``). Precedence is flag, then
environment, then the ``--config`` file, then built-in defaults.

Outputs are written atomically and start with a comment line carrying the
fingerprint of the configuration that produced them.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time

from . import __version__
from .alpharank import AlphaRank, alpha_grid, alpha_sweep, response_graph
from .config import PipelineConfig, parse_grid_spec
from .egta import CsvFormatError, PayoffTensor, aggregate, estimate_payoffs, pure_nash
from .files import atomic_write, resolve_input
from .game import ConfigError, generate_grid
from .learner import DQNAgent, TrainingDivergence, config_fingerprint

ENV_PREFIX = "STYLERANK_"


class CliError(Exception):
    """A user-facing failure; printed without a traceback, exit status 2."""


def _env(flag):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"))


def _option(args, flag, cast=str):
    """Flag value, else the environment override, else None."""
    value = getattr(args, flag.replace("-", "_"), None)
    if value is None:
        raw = _env(flag)
        if raw is not None and raw != "":
            try:
                value = cast(raw)
            except ValueError:
                raise CliError(f"{ENV_PREFIX}{flag.upper().replace('-', '_')}={raw!r} is not valid") from None
    return value


def load_config(args):
    path = _option(args, "config")
    cfg = PipelineConfig.load(path) if path else PipelineConfig()
    overrides = {
        "seed": _option(args, "seed", int),
        "out": _option(args, "out"),
        "runs": _option(args, "runs", int),
        "alpha": _option(args, "alpha", float),
        "m": _option(args, "pop-size", int),
        "edge_threshold": _option(args, "edge-threshold", float),
    }
    grid = _option(args, "alpha-grid")
    if grid is not None:
        overrides["alpha_grid"] = parse_grid_spec(grid)
    return cfg.with_overrides(**overrides)


def _header(lines):
    return "".join(f"# {line}\n" for line in lines)


def _fingerprint_line(fp):
    return f"config fingerprint: {fp}"


# ---------------------------------------------------------------------------
# train / simulate


def _seats(cfg):
    return (0, 1) if cfg.independent_seats else (None,)


def checkpoint_name(style, seat=None):
    return style if seat is None else f"{style}.seat{seat}"


def expected_fingerprint(cfg, style, seat=None):
    return config_fingerprint(cfg.grid, cfg.hyperparams, cfg.style(style), cfg.train_seed(style, seat))


def cmd_train(args):
    cfg = load_config(args)
    names = args.styles or cfg.style_names
    for name in names:
        cfg.style(name)
    graph = generate_grid(cfg.grid)
    ckpt_dir = os.path.join(cfg.out, "checkpoints")
    log_dir = os.path.join(cfg.out, "logs")
    for name in names:
        for seat in _seats(cfg):
            label = checkpoint_name(name, seat)
            t0 = time.perf_counter()
            agent = DQNAgent.from_hyperparams(cfg.hyperparams, style=cfg.style(name),
                                              random_state=cfg.train_seed(name, seat))
            try:
                agent.fit(cfg.grid, graph)
            except TrainingDivergence as exc:
                raise CliError(f"training diverged for style {name}: {exc}") from None
            buf = io.BytesIO()
            agent.save(buf)
            atomic_write(os.path.join(ckpt_dir, label + ".npz"), buf.getvalue())
            text = _header([f"training log for style {label}", _fingerprint_line(agent.fingerprint_)])
            atomic_write(os.path.join(log_dir, label + ".csv"), text + agent.training_log_csv())
            print(f"trained {label}: {cfg.hyperparams.episodes} episodes in "
                  f"{time.perf_counter() - t0:.1f}s, fingerprint {agent.fingerprint_}")
    return 0


def load_policies(cfg, ckpt_dir):
    """Load every configured checkpoint, refusing ones trained under another config."""
    seats = [{} for _ in _seats(cfg)]
    for name in cfg.style_names:
        for k, seat in enumerate(_seats(cfg)):
            path = os.path.join(ckpt_dir, checkpoint_name(name, seat) + ".npz")
            if not os.path.exists(path):
                raise CliError(f"missing checkpoint for style {name}: {path}")
            agent = DQNAgent.load(path)
            want = expected_fingerprint(cfg, name, seat)
            if agent.fingerprint_ != want:
                raise CliError(
                    f"checkpoint {path} does not match the configuration: "
                    f"checkpoint fingerprint {agent.fingerprint_}, config fingerprint {want}")
            seats[k][name] = agent
    return seats[0] if len(seats) == 1 else tuple(seats)


def cmd_simulate(args):
    cfg = load_config(args)
    ckpt_dir = args.checkpoints or os.path.join(cfg.out, "checkpoints")
    policies = load_policies(cfg, ckpt_dir)
    graph = generate_grid(cfg.grid)
    t0 = time.perf_counter()
    tensor, stats = estimate_payoffs(policies, cfg.grid, cfg.runs, seed=cfg.seed,
                                     strategies=cfg.style_names, graph=graph,
                                     max_rounds=cfg.max_rounds, n_jobs=args.n_jobs,
                                     with_violations=True, antithetic=cfg.antithetic)
    fp = cfg.fingerprint()
    tensor.comments = [
        "empirical payoff matrix: mean base reward per seat",
        _fingerprint_line(fp),
        f"seed {cfg.seed}, {cfg.runs} games per profile",
    ]
    out = args.payoffs or os.path.join(cfg.out, "payoffs.csv")
    atomic_write(out, tensor.to_csv())

    buf = io.StringIO()
    buf.write(_header(["final-board violation rate per profile", _fingerprint_line(fp)]))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_strategy", "col_strategy", "violation_rate", "games", "truncated"])
    for (r, c), s in stats.items():
        w.writerow([r, c, repr(s["violation_rate"]), s["games"], s["truncated"]])
    vout = os.path.join(os.path.dirname(os.path.abspath(out)), "violations.csv")
    atomic_write(vout, buf.getvalue())
    print(f"simulated {len(stats)} profiles x {cfg.runs} games in {time.perf_counter() - t0:.1f}s")
    print(f"wrote {out} and {vout}")
    return 0


# ---------------------------------------------------------------------------
# analysis commands


def read_payoffs(path, payoff_order="row-first"):
    path = resolve_input(path)
    try:
        tensor = PayoffTensor.read_csv(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    if payoff_order == "col-first":
        tensor = PayoffTensor(tensor.row_strategies, tensor.p2, tensor.p1, tensor.runs,
                              tensor.col_strategies, comments=tensor.comments)
    return tensor


def _rank_fingerprint(tensor, rank):
    blob = json.dumps({"payoffs": tensor.to_csv(), "alpha": rank.alpha, "m": rank.m,
                       "alpha_grid": list(rank.alpha_grid),
                       "edge_threshold": rank.edge_threshold}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def cmd_rank(args):
    cfg = load_config(args)
    rank = cfg.rank
    tensor = read_payoffs(args.payoffs, args.payoff_order)
    out = cfg.out
    fp = _rank_fingerprint(tensor, rank)
    header = [f"alpha-Rank of {args.payoffs}", _fingerprint_line(fp)]

    est = AlphaRank(alpha=rank.alpha, m=rank.m, populations=args.populations).fit(tensor)
    res = est.result_
    buf = io.StringIO()
    buf.write(_header(header + [f"alpha {rank.alpha:g}, m {rank.m}, residual {res.residual:.3g}"]))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "profile", "mass"])
    for i, (label, mass) in enumerate(res.ranking, start=1):
        w.writerow([i, label, repr(mass)])
    atomic_write(os.path.join(out, "rankings.csv"), buf.getvalue())

    graph = response_graph(res, rank.edge_threshold)
    atomic_write(os.path.join(out, "response_graph.dot"),
                 f"// {_fingerprint_line(fp)}\n" + graph.to_dot(min_mass=args.min_mass))
    doc = graph.to_dict()
    doc["fingerprint"] = fp
    atomic_write(os.path.join(out, "response_graph.json"), json.dumps(doc, indent=2) + "\n")

    if not args.no_sweep:
        grid = alpha_grid(*rank.alpha_grid)
        records, _, failures = alpha_sweep(tensor, grid, rank.m, args.populations)
        buf = io.StringIO()
        buf.write(_header(header + [f"alpha grid {':'.join(f'{v:g}' for v in rank.alpha_grid)}, m {rank.m}"]))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "profile", "mass"])
        for a, label, mass in records:
            w.writerow([repr(a), label, repr(mass)])
        atomic_write(os.path.join(out, "alpha_sweep.csv"), buf.getvalue())
        for a, msg in failures:
            print(f"warning: alpha={a:g} failed: {msg}", file=sys.stderr)

    print(f"alpha={rank.alpha:g} m={rank.m} (method {res.method}, residual {res.residual:.2e})")
    top = res.ranking[:args.top]
    width = max((len(label) for label, _ in top), default=0)
    for i, (label, mass) in enumerate(top, start=1):
        print(f"{i:3d}  {label:<{width}s}  {mass:.4f}")
    print("MCC members: " + ", ".join(sorted(graph.labels[i] for i in graph.mcc_members)))
    return 0


def cmd_aggregate(args):
    tensors = [read_payoffs(p) for p in args.payoffs]
    try:
        merged = aggregate(tensors)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    merged.comments = [f"cell-wise mean of {len(tensors)} payoff matrices"]
    merged.comments += [f"input: {p}" for p in args.payoffs]
    text = merged.to_csv()
    if args.output:
        atomic_write(args.output, text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_nash(args):
    tensor = read_payoffs(args.payoffs, args.payoff_order)
    eq = pure_nash(tensor)
    if not eq:
        print("no pure Nash equilibria")
    for r, c in eq:
        p1, p2 = tensor.entry(r, c)
        print(f"({r},{c})  {p1:g}, {p2:g}")
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline YAML file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")

    ranking = argparse.ArgumentParser(add_help=False)
    ranking.add_argument("--alpha", type=float, help="selection intensity (default 2)")
    ranking.add_argument("--pop-size", type=int, help="population size m (default 100)")
    ranking.add_argument("--alpha-grid", metavar="START:END:STEP", help="sweep grid (default 0.1:10:0.01)")
    ranking.add_argument("--edge-threshold", type=float,
                         help="keep response-graph edges with rho/rho_m above this (default 1)")

    order = argparse.ArgumentParser(add_help=False)
    order.add_argument("--payoff-order", choices=("row-first", "col-first"), default="row-first",
                       help="whether p1 is the row seat's payoff (default) or the column seat's")

    p = argparse.ArgumentParser(prog="stylerank", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train one policy per style")
    t.add_argument("--styles", nargs="+", metavar="NAME", help="subset of configured styles")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", parents=[common], help="estimate the empirical payoff matrix")
    s.add_argument("--runs", type=int, help="games per profile (default 5000)")
    s.add_argument("--checkpoints", help="checkpoint directory (default OUT/checkpoints)")
    s.add_argument("--payoffs", help="payoff CSV path (default OUT/payoffs.csv)")
    s.add_argument("--n-jobs", type=int, default=1, help="parallel workers over profiles")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rank", parents=[common, ranking, order], help="alpha-Rank a payoff CSV")
    r.add_argument("payoffs", help="payoff CSV, or fixture:NAME for a bundled fixture")
    r.add_argument("--populations", choices=("multi", "single"), default="multi")
    r.add_argument("--top", type=int, default=10, help="profiles to print")
    r.add_argument("--min-mass", type=float, default=0.0, help="hide lighter nodes in the DOT file")
    r.add_argument("--no-sweep", action="store_true", help="skip the alpha sweep")
    r.set_defaults(func=cmd_rank)

    a = sub.add_parser("aggregate", help="cell-wise mean of payoff CSVs")
    a.add_argument("payoffs", nargs="+")
    a.add_argument("-o", "--output", help="output CSV (default stdout)")
    a.set_defaults(func=cmd_aggregate)

    n = sub.add_parser("nash", parents=[order], help="list pure Nash equilibria")
    n.add_argument("payoffs")
    n.set_defaults(func=cmd_nash)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, CsvFormatError, FileNotFoundError) as exc:
        print(f"stylerank: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
