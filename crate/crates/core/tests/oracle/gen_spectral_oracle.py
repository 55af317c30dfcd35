"""Liouville norms of fixed random fields, summed at 50 digits.

    python3 crates/core/tests/oracle/gen_spectral_oracle.py
"""

import json
import os
import random

import mpmath as mp

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "liouville_ref.json")


def random_field(rng, dim, band_k, count):
    r = int(mp.ceil(mp.sqrt(band_k)))
    modes = {}
    while len(modes) < count:
        n = tuple(rng.randint(-r, r) for _ in range(dim))
        if sum(c * c for c in n) < band_k:
            modes[n] = [rng.uniform(-1, 1) * 10 ** rng.uniform(-6, 0), rng.uniform(-1, 1)]
    return sorted(modes.items())


def main():
    mp.mp.dps = 50
    rng = random.Random(1009)
    cases = []
    for dim, band_k in [(1, 50.0), (2, 64.0), (3, 40.0), (4, 30.0), (2, 1e4)]:
        coeffs = random_field(rng, dim, band_k, 10)
        for a in [2.0, 0.0, -1.0, 1.5, 3.7]:
            total = mp.mpf(0)
            for n, (re, im) in coeffs:
                w = (1 + sum(mp.mpf(c) ** 2 for c in n)) ** mp.mpf(a)
                total += w * (mp.mpf(re) ** 2 + mp.mpf(im) ** 2)
            cases.append({
                "dim_n": dim,
                "band_k": band_k,
                "a": a,
                "coeffs": [[list(n), c] for n, c in coeffs],
                "norm": mp.nstr(mp.sqrt(total), 30),
            })
    with open(OUT, "w") as fh:
        json.dump({"seed": 1009, "digits": 50, "cases": cases}, fh, indent=1)


if __name__ == "__main__":
    main()
