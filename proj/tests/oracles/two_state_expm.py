"""High-precision reference values for the two-state linear test problem.

Generator plus cost G = [[-1, 1], [1, 0]] (rate 1 each way, cost 1 in state 1),
terminal cost g = 0, horizon T = 1. The value is exp((T - s) G) @ exp(g).
Run with --check FILE to compare against the constants frozen in a C++ header.
"""

import re
import sys

import mpmath as mp

mp.mp.dps = 40

G = mp.matrix([[-1, 1], [1, 0]])
ONES = mp.matrix([1, 1])


def values(span):
    return mp.expm(span * G) * ONES


def frozen(path):
    text = open(path).read()
    return {name: float(val) for name, val in re.findall(r"(k\w+) = ([0-9.eE+-]+);", text)}


def main():
    table = {
        "kTwoStateSpan1State0": values(1)[0],
        "kTwoStateSpan1State1": values(1)[1],
        "kTwoStateSpanHalfState0": values(mp.mpf("0.5"))[0],
        "kTwoStateSpanHalfState1": values(mp.mpf("0.5"))[1],
    }
    if len(sys.argv) == 3 and sys.argv[1] == "--check":
        stored = frozen(sys.argv[2])
        bad = 0
        for name, value in table.items():
            got = stored.get(name)
            ok = got is not None and abs(got - float(value)) <= 1e-15 * abs(float(value))
            print(f"{name}: {'ok' if ok else 'MISMATCH'} ({got} vs {mp.nstr(value, 20)})")
            bad += not ok
        sys.exit(1 if bad else 0)
    for name, value in table.items():
        print(f"{name} = {mp.nstr(value, 25)}")


if __name__ == "__main__":
    main()
