#!/usr/bin/env python3
"""Writes the first K zeta-zero ordinates (index, gamma) as plain text.

Ordinates come from Arb's certified zero isolation (python-flint,
acb.zeta_zeros) at 80 bits. The C++ side re-verifies every ordinate on
ingestion.

Usage: gen_zeros.py COUNT OUTPUT
"""
import sys

import flint

BATCH = 500


def main():
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
    out = sys.argv[2] if len(sys.argv) > 2 else "data/zeros_10000.txt"
    flint.ctx.prec = 80
    with open(out, "w") as fh:
        n = 1
        while n <= count:
            batch = flint.acb.zeta_zeros(n, min(BATCH, count - n + 1))
            for z in batch:
                gamma = z.imag
                if gamma.rad() > 1e-15:
                    raise RuntimeError(f"zero {n} not resolved: {gamma}")
                fh.write(f"{n} {gamma.mid().str(20, radius=False)}\n")
                n += 1
            print(n - 1, file=sys.stderr, flush=True)


if __name__ == "__main__":
    main()
