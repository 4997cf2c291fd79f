#!/usr/bin/env python3
"""Generate a small task and audit the analytic gradients against
central finite differences.  Exits nonzero if any term drifts."""

import argparse
import sys
import tempfile
from pathlib import Path

from dissim.cli import main as dissim_main


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--draws", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "audit.txt"
        code = dissim_main([
            "generate", "--classes", "3", "--per-class", "4",
            "--seed", str(args.seed), "--out", str(data),
        ])
        if code != 0:
            sys.exit(code)
        sys.exit(dissim_main([
            "gradcheck", "--data", str(data),
            "--draws", str(args.draws), "--seed", str(args.seed),
        ]))


if __name__ == "__main__":
    main()
