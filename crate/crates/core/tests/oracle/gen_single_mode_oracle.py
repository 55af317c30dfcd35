"""Single-mode solutions t^(rho-1) E_{rho,rho}(-lambda t^rho) at 50 digits.

    python3 crates/core/tests/oracle/gen_single_mode_oracle.py
"""

import json
import os

import mpmath as mp

from gen_ml_oracle import series

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "single_mode_ref.json")


def main():
    mp.mp.dps = 50
    cases = []
    for rho in ["0.3", "0.5", "0.7", "0.9"]:
        for mode in [[1, 2], [3, 0]]:
            lam = sum(c * c for c in mode)
            for t in ["0.01", "0.1", "1"]:
                r, tt = mp.mpf(rho), mp.mpf(t)
                e, _ = series(r, r, -lam * tt ** r)
                v = tt ** (r - 1) * e
                cases.append({"rho": float(rho), "mode": mode, "t": float(t), "value": mp.nstr(v, 30)})
    with open(OUT, "w") as f:
        json.dump({"digits": 50, "cases": cases}, f, indent=1)


if __name__ == "__main__":
    main()
