"""Finite-difference verification of every hand-written gradient.

All backward passes in the library are derived by hand (there is no
autograd), so this is the first thing to run after touching any of them.
Each suite builds a small random network, evaluates the analytic gradient
of its training loss, and compares against central differences.

Usage:
    python demos/gradient_check.py [n_seeds]
"""

import sys
import time

from acrl.cli import gradcheck_suite


def main():
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    worst = {}
    t0 = time.time()
    for seed in range(n_seeds):
        for name, err in gradcheck_suite(seed=seed).items():
            worst[name] = max(worst.get(name, 0.0), err)
    elapsed = time.time() - t0
    print(f"{n_seeds} seeds in {elapsed:.1f}s")
    for name, err in worst.items():
        verdict = "ok" if err < 1e-4 else "FAIL"
        print(f"  {name:<14} worst rel err {err:.3e}  {verdict}")


if __name__ == "__main__":
    main()
