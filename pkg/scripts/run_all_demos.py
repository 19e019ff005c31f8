#!/usr/bin/env python3
"""Run every named demonstration experiment with reduced trial counts and
collect their CSV output under ./out/."""

import sys

from dynmis.cli import DEMOS, main


def run() -> int:
    for name in DEMOS:
        print(f"=== demo: {name}")
        rc = main(["demo", name, "--out-dir", "out"])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run())
