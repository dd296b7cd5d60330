#!/usr/bin/env python3
"""Compare 2 f(x0) of the problem corpus with the reference table."""
import argparse
import sys

from dfbgn.problems import REFERENCE_TWO_F0, reference_tolerance, validate_against_reference


def main(argv=None) -> int:
    argparse.ArgumentParser(description=__doc__).parse_args(argv)
    table = validate_against_reference()
    print(f"{'problem':<10} {'n':>6} {'computed':>18} {'reference':>18} {'rel err':>9} {'tol':>7}  ok")
    for (name, n), (val, ref, ok) in sorted(table.items()):
        tol = reference_tolerance(REFERENCE_TWO_F0[(name, n)][1])
        rel = abs(val - ref) / abs(ref)
        print(f"{name:<10} {n:>6} {val:>18.10g} {ref:>18.10g} {rel:>9.1e} {tol:>7.0e}  {'yes' if ok else 'NO'}")
    return 0 if all(ok for *_, ok in table.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
