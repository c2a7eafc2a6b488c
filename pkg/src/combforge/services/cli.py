import argparse
import json
import logging
import sys
from typing import List, Sequence

from combforge import __version__
from combforge.config import load_config
from combforge.core.errors import CombForgeError
from combforge.repositories.artifacts import ArtifactStore
from combforge.services.scenarios import ScenarioId, ScenarioReport, describe_scenarios, run_scenario, run_simulation
from combforge.settings import settings

logging.basicConfig(level=settings.log_level, format="%(asctime)s [%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

SCENARIO_IDS: List[str] = [s.value for s in ScenarioId]


def _epilog() -> str:
    lines = ["scenarios:"]
    lines += [f"  {sid:<28} {title}" for sid, title in describe_scenarios()]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combforge",
        description="dc-SQUID Josephson radiation comb simulator",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run one config file")
    simulate.add_argument("--config", help="YAML/JSON RunConfig; omitted keys take the default device")
    simulate.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    simulate.add_argument("--out", help="output directory (overrides output_dir)")

    scenario = sub.add_parser("scenario", help="run a named scenario", epilog=_epilog(),
                              formatter_class=argparse.RawDescriptionHelpFormatter)
    scenario.add_argument("scenario_id", choices=SCENARIO_IDS, metavar="ID", help="one of: " + ", ".join(SCENARIO_IDS))
    scenario.add_argument("--out", required=True, help="output directory")
    scenario.add_argument("--quick", action="store_true", help="fewer ensemble realizations, marked reduced accuracy")
    scenario.add_argument("--seed", type=int, help="unsigned 64-bit ensemble seed")
    scenario.add_argument("--threads", type=int, help="worker threads for bin simulations")

    sub.add_parser("list-scenarios", help="print scenario ids")
    return parser


def _report_error(record: dict) -> None:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _simulate(args: argparse.Namespace) -> int:
    overrides: Sequence[str] = list(args.overrides)
    if args.out:
        overrides = [*overrides, f"output_dir={args.out}"]
    try:
        config = load_config(args.config, overrides)
    except CombForgeError as exc:
        record = {**exc.to_record(), "config": args.config}
        if args.out:
            ArtifactStore(args.out).write_error(record)
        _report_error(record)
        return 1
    return _finish(run_simulation(config))


def _finish(report: ScenarioReport) -> int:
    if report.error is not None:
        _report_error(report.error)
    else:
        logger.info("Outputs dir=%s files=%s", report.out_dir, ",".join(report.files))
    return report.status


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    if args.command == "list-scenarios":
        for sid, title in describe_scenarios():
            print(f"{sid}\t{title}")
        return 0
    if args.command == "simulate":
        return _simulate(args)
    return _finish(run_scenario(args.scenario_id, args.out, quick=args.quick, seed=args.seed, workers=args.threads))


if __name__ == "__main__":
    sys.exit(main())
