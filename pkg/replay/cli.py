"""
voxfield command line

    python -m replay.cli run --config run.cfg --scenario world.json \
        [--sweep connectivity] [--slice axis=z,index=5] [--out out/] \
        [--esdf.connectivity C26 ...]

Exit status: 0 success, 1 data/config/bounds error, 2 internal corruption.
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

from core.config import load_config
from core.errors import CorruptionError, DataError, DllError, VoxFieldError
from .runner import SWEEPS, open_source, run_all

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CORRUPTION = 2


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxfield", description="Incremental ESDF replay driver")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="replay a dataset or scenario")
    run.add_argument("--config", default=None, help="key=value config file")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset", default=None, help="directory with poses.csv and cloud_<i>.csv")
    source.add_argument("--scenario", default=None, help="scenario JSON file")
    run.add_argument("--sweep", choices=sorted(SWEEPS), default=None)
    run.add_argument("--slice", action="append", default=[], help="axis=z,index=K[,max=D]")
    run.add_argument("--out", default=None, help="output directory (run.output_dir)")
    run.add_argument("--verify", action="store_true", help="full invariant scan after every epoch")
    run.add_argument("--log-level", default="INFO")
    return parser


def split_overrides(argv: Sequence[str]) -> Tuple[List[str], Dict[str, str]]:
    """Pull '--section.key value' pairs out of argv"""
    rest: List[str] = []
    overrides: Dict[str, str] = {}
    i = 0
    while i < len(argv):
        arg = argv[i]
        name = arg[2:] if arg.startswith("--") else ""
        if "." in name:
            if "=" in name:
                key, value = name.split("=", 1)
                i += 1
            elif i + 1 < len(argv):
                key, value = name, argv[i + 1]
                i += 2
            else:
                raise DataError(f"missing value for {arg}")
            overrides[key] = value
            continue
        rest.append(arg)
        i += 1
    return rest, overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_arg_parser()
    try:
        rest, overrides = split_overrides(argv)
    except DataError as e:
        parser.error(str(e))
    args = parser.parse_args(rest)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    load_dotenv()

    if args.out is not None:
        overrides["run.output_dir"] = args.out
    if args.slice:
        overrides["run.slices"] = ";".join(args.slice)
    if args.verify:
        overrides["run.verify"] = "true"

    try:
        config = load_config(args.config, overrides)
        source = open_source(dataset=args.dataset, scenario=args.scenario)
        run_all(config, source, sweep=args.sweep)
    except (CorruptionError, DllError) as e:
        logger.error("Internal corruption: %s", e)
        return EXIT_CORRUPTION
    except DataError as e:
        logger.error("%s", e)
        return EXIT_DATA
    except VoxFieldError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
