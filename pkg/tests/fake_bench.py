"""Stand-in benchmark for process-adapter tests.

Sleeps ``base + scale * (((x - 30) / 100)^2 + (y - 0.25)^2)`` seconds, so the
fastest setting is x=30, y=0.25.  Extra switches force failure modes.
"""

import argparse
import os
import sys
import time

OPT_X, OPT_Y = 30, 0.25


def sleep_seconds(x, y, base, scale):
    return base + scale * (((x - OPT_X) / 100.0) ** 2 + (y - OPT_Y) ** 2)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--x", type=float, default=OPT_X)
    p.add_argument("--y", type=float, default=OPT_Y)
    p.add_argument("--base", type=float, default=0.05)
    p.add_argument("--scale", type=float, default=0.5)
    p.add_argument("--fail-above", type=float, help="exit 3 when x exceeds this")
    p.add_argument("--exit", type=int, default=0)
    p.add_argument("--print", dest="text", help="print this line last")
    p.add_argument("--sleep", type=float, help="sleep this long instead")
    p.add_argument("--env", help="print the value of this environment variable")
    args = p.parse_args()

    if args.fail_above is not None and args.x > args.fail_above:
        print("refusing", file=sys.stderr)
        return 3
    time.sleep(args.sleep if args.sleep is not None else sleep_seconds(args.x, args.y, args.base, args.scale))
    if args.env:
        print(os.environ.get(args.env, "<unset>"))
    if args.text is not None:
        print("warming up")
        print(args.text)
        print("")
    return args.exit


if __name__ == "__main__":
    sys.exit(main())
