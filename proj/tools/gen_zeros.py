#!/usr/bin/env python3
"""Write a zeta-zero ordinate table (one ordinate per line) using mpmath.

    gen_zeros.py COUNT DIGITS OUT
"""
import sys

import mpmath


def main():
    count, digits, out = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
    mpmath.mp.dps = digits + 10
    with open(out, "w") as f:
        for n in range(1, count + 1):
            gamma = mpmath.zetazero(n).imag
            # DIGITS places after the decimal point
            f.write(mpmath.nstr(gamma, len(str(int(gamma))) + digits, strip_zeros=False) + "\n")


if __name__ == "__main__":
    main()
