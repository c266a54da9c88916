"""Adapter CLI: export an interchange dataset from posed images."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import AdapterError
from .export import export_dataset


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grounding-adapter",
        description="Build a spinseg interchange dataset from posed images via "
                    "assistant/grounder/embedding HTTP services",
    )
    parser.add_argument("frames_dir", help="directory of images with .pose.json sidecars")
    parser.add_argument("--cloud", required=True, help="PLY point cloud to bundle")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--assistant-url", default=None)
    parser.add_argument("--grounder-url", default=None)
    parser.add_argument("--embed-url", default=None)
    parser.add_argument("--concurrency", type=int, default=4)
    args = parser.parse_args(argv)
    try:
        out = export_dataset(
            args.frames_dir,
            args.cloud,
            args.out,
            assistant_url=args.assistant_url,
            grounder_url=args.grounder_url,
            embed_url=args.embed_url,
            concurrency=args.concurrency,
        )
    except (AdapterError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    print(f"wrote dataset to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
