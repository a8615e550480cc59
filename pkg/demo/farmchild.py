#!/usr/bin/env python3
"""Scripted managed process for demos and tests.

Emits "EVENT <name>" lines on stdout per --plan, interleaved with log
chatter, then idles until terminated (or exits per --exit-after).

    --plan allocated:0.2,connecting:0.4,mapped:0.6   events at offsets (s)
    --exit-after 5.0      exit after this many seconds
    --exit-code 3         exit code to use with --exit-after
    --trap-term           ignore SIGTERM (forces the daemon to escalate)
"""
import argparse
import signal
import sys
import time


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--plan", default="allocated:0.2,connecting:0.4,mapped:0.6")
    ap.add_argument("--exit-after", type=float, default=None)
    ap.add_argument("--exit-code", type=int, default=0)
    ap.add_argument("--trap-term", action="store_true")
    args = ap.parse_args()

    if args.trap_term:
        signal.signal(signal.SIGTERM, signal.SIG_IGN)

    start = time.monotonic()
    steps = []
    if args.plan:
        for item in args.plan.split(","):
            name, _, offset = item.partition(":")
            steps.append((float(offset or 0.0), name.strip()))
    steps.sort()

    print("child starting", flush=True)
    for offset, name in steps:
        delay = start + offset - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        print(f"EVENT {name}", flush=True)
        print(f"did {name}", flush=True)

    while True:
        if args.exit_after is not None and time.monotonic() - start >= args.exit_after:
            print("child exiting", flush=True)
            return args.exit_code
        time.sleep(0.05)


if __name__ == "__main__":
    sys.exit(main())
