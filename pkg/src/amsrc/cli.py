"""Command-line entry point.

    amsrc synth|extract|train|score|eval|ablate [--config PATH]
          [--preset NAME] [--seed N] [--out DIR]

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure during training.
"""

import argparse
import sys

from .config import PRESETS, load_config
from .errors import ConfigError, DataError, NumericalError
from .pipeline import COMMANDS, run_pipeline


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="amsrc",
                     description="Two-stream appearance-motion video anomaly "
                                 "detection pipeline")
    parser.add_argument("command", choices=COMMANDS,
                        help="pipeline stage to run")
    parser.add_argument("--config", default=None,
                        help="flat key=value config file")
    parser.add_argument("--preset", default=None, choices=PRESETS,
                        help="named preset loaded before the config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override train.seed")
    parser.add_argument("--out", default="amsrc_out",
                        help="output root directory (default: amsrc_out)")
    return parser


def _format_result(result):
    if isinstance(result, dict):
        parts = []
        for key, value in result.items():
            if isinstance(value, dict):
                inner = value.get("auroc")
                parts.append(f"{key}: auroc={inner}"
                             + (f" error={value['error']}" if value.get("error") else ""))
            else:
                parts.append(f"{key}={value}")
        return "\n".join(parts)
    return str(result)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        overrides = {}
        if args.seed is not None:
            overrides["train.seed"] = args.seed
        cfg = load_config(path=args.config, preset=args.preset,
                          overrides=overrides)
        result = run_pipeline(args.command, cfg, args.out)
    except ConfigError as exc:
        print(f"amsrc: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"amsrc: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"amsrc: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(_format_result(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
