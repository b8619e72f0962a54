"""Command-line entry point: one verb per pipeline stage.

    ppmlab synth   --config run.json        # generate the synthetic log
    ppmlab ingest  --config run.json        # parse + validate the event CSV
    ppmlab bins    --config run.json        # fit duration bins
    ppmlab embed   --config run.json        # build the pseudo-embedding
    ppmlab build   --config run.json        # build graph/sequence reps
    ppmlab train   --config run.json        # train the configured model
    ppmlab tune    --config run.json        # hypermodel search + final train
    ppmlab eval    --config run.json        # evaluate on the validation split
    ppmlab report  --config run.json        # print the summary JSON to stdout

Flags override config keys (flag > config > default). Logs go to stderr;
artifacts to the output directory. Exit codes: 0 ok, 2 config error,
3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import PpmLabError
from .pipeline import Pipeline, RunConfig

_VERB_STAGE = {
    "synth": "data",
    "ingest": "data",
    "bins": "bins",
    "embed": "embed",
    "build": "build",
    "train": "train",
    "tune": "train",
    "eval": "eval",
    "report": "eval",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppmlab", description="outcome prediction lab for event logs")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _VERB_STAGE:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="path to the run config JSON")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--jobs", type=int, default=None, help="parallel trials during tune")
        p.add_argument("--brackets", type=int, nargs="*", default=None,
                       help="restrict hyperband to these brackets")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config(args) -> RunConfig:
    raw = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.verb == "tune":
        raw.setdefault("tune", {})["enabled"] = True
    if args.jobs is not None:
        raw.setdefault("tune", {})["jobs"] = args.jobs
    if args.brackets is not None:
        raw.setdefault("tune", {})["brackets"] = args.brackets
    return RunConfig.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args)
        pipeline = Pipeline(config)
        manifest = pipeline.run(upto=_VERB_STAGE[args.verb])
        if args.verb == "report":
            report_path = pipeline.out / "report.json"
            summary = {
                "config_hash": manifest["config_hash"],
                "objective": manifest.get("objective"),
                "stages": {name: s["key"] for name, s in manifest["stages"].items()},
            }
            if report_path.exists():
                summary["report"] = json.loads(report_path.read_text())
            print(json.dumps(summary, sort_keys=True, indent=1))
    except PpmLabError as exc:
        logging.getLogger("ppmlab").error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
