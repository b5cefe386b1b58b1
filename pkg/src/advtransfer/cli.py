"""Command line entry point.

    advtransfer <subcommand> --config <path> [--out <dir>] [--workers N] [--seed K]

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("advtransfer")


def _cmd_train_zoo(cfg, args):
    lab = ex.open_lab(cfg)
    zoo = ex.train_zoo(lab)
    lab.finish()
    print(f"{len(zoo.admitted)}/{len(zoo.models)} models admitted -> {cfg.out_dir / 'zoo.csv'}")


def _cmd_attack(cfg, args):
    if not args.model:
        raise ConfigError("attack needs --model <spec id>")
    engine = args.engine or cfg.engines[0]
    if engine not in ("pwws", "ga"):
        raise ConfigError(f"unknown attack engine {engine!r}")
    print(ex.run_attack(cfg, args.model, engine))


def _cmd_transfer_matrix(cfg, args):
    for engine, m in ex.run_transfer_matrix(cfg).items():
        print(f"{engine}: {len(m.model_ids)}x{len(m.model_ids)} -> {cfg.out_dir / f'transfer_{engine}.csv'}")


def _cmd_factor_study(cfg, args):
    study = ex.run_factor_study(cfg)
    for engine, scores in study.scores.items():
        ranking = sorted(scores, key=lambda a: -scores[a])
        print(engine + ": " + " > ".join(f"{a} ({scores[a]:.3f})" for a in ranking))


def _cmd_ensemble_sweep(cfg, args):
    for p in ex.run_ensemble_sweep(cfg):
        print(f"m={p.size}: genetic {p.genetic_realized:.3f}  greedy {p.greedy_realized:.3f}  "
              f"single {p.single_realized:.3f}")


def _cmd_mine_rules(cfg, args):
    uawr, pmi, members = ex.run_mine_rules(cfg)
    print(f"{len(uawr)} UAWR rules, {len(pmi)} PMI rules from ensemble {'+'.join(members)}")


def _cmd_eval_rules(cfg, args):
    res = ex.run_eval_rules(cfg)
    for rho in res.rhos:
        u, p = res.uawr[rho]["ALL"][0], res.pmi[rho]["ALL"][0]
        print(f"rho={rho:.2f}: UAWR {u:.1f}%  PMI {p:.1f}%")


def _cmd_report(cfg, args):
    print(ex.run_report(cfg))


def _cmd_desk_data(cfg, args):
    from .desk import write_desk_assets

    out = args.out or "desk"
    paths = write_desk_assets(out)
    print(f"desk assets written; run e.g. `advtransfer factor-study --config {paths['config']}`")


COMMANDS = {
    "train-zoo": (_cmd_train_zoo, "train (or load cached) zoo models and apply the admission floor"),
    "attack": (_cmd_attack, "attack one model on the seed-sampled attack pool"),
    "transfer-matrix": (_cmd_transfer_matrix, "pairwise transfer matrix for every configured attack"),
    "factor-study": (_cmd_factor_study, "base rates, factor significance and class-level tables"),
    "ensemble-sweep": (_cmd_ensemble_sweep, "genetic vs greedy ensembles across sizes, realized transfer"),
    "mine-rules": (_cmd_mine_rules, "mine UAWR rules from an ensemble and PMI baseline rules"),
    "eval-rules": (_cmd_eval_rules, "evaluate mined rules on the victim pool over the budget list"),
    "report": (_cmd_report, "summarize existing tables into summary.json"),
    "desk-data": (_cmd_desk_data, "write the synthetic desk corpus, lexicon, vectors and config"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advtransfer", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides config and $ADVTRANSFER_OUT)")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--seed", type=int, help="sampling/search seed")
        if name == "attack":
            p.add_argument("--model", help="spec id of the model to attack")
            p.add_argument("--engine", choices=["pwws", "ga"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    fn = COMMANDS[args.command][0]
    try:
        if args.command == "desk-data":
            fn(None, args)
            return EXIT_OK
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config, {"workers": args.workers, "seed": args.seed}, out=args.out)
        fn(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ex.ExperimentError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
