"""Time the compiled kernels against their NumPy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` time for each
backend and the speed-up. Also times one full PMP frame at the default
system size with whichever backend is active.
"""

import argparse
import timeit

import numpy as np

from parmimo import _fallback, comms, system
from parmimo.precoders import precode_pmp

try:
    from parmimo import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    n = 2 * 100 * 128
    w = rng.standard_normal(n)
    g = rng.standard_normal(n)
    A = rng.standard_normal((8, 24))
    s = rng.standard_normal(8)
    llr = rng.standard_normal((10, 432)) * 4
    L = 2.0 * np.linalg.norm(A, 2) ** 2 * 1.001

    def step(mod):
        x = np.zeros(n)
        y_out = np.empty(n)
        return lambda: mod.truncation_step(w, g, 0.01, 5.0, x, 0.5, y_out)

    return {
        "linf_threshold (n=25600)": lambda mod: (lambda: mod.linf_threshold(w, 5.0)),
        "truncation_step (n=25600)": step,
        "fitra_dense (8x24, K=2000)": lambda mod: (lambda: mod.fitra_dense(A, s, 0.25, L, 2000, np.zeros(24))),
        "viterbi_decode (10 x 216 bits)": lambda mod: (lambda: mod.viterbi_decode(llr)),
    }


def best(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(1)

    print(f"{'kernel':34s} {'python':>12s} {'compiled':>12s} {'speed-up':>9s}")
    for name, make in cases(rng).items():
        t_py = best(make(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:34s} {t_py * 1e3:10.3f}ms {'n/a':>12s} {'':>9s}")
            continue
        t_c = best(make(_kernels), args.repeat)
        print(f"{name:34s} {t_py * 1e3:10.3f}ms {t_c * 1e3:10.3f}ms {t_py / t_c:8.1f}x")

    plan = system.make_toneplan_80211n_40mhz()
    chan = system.draw_channel(rng, 100, 10, 4, plan.W)
    payloads = comms.make_payloads(rng, 10, plan.n_active)
    frame = precode_pmp(payloads.symbols, plan, chan, lam=0.25, K=2000)
    it = frame.info["seconds"] / frame.info["iterations"]
    print(f"PMP frame N=100 M=10 W=128 K=2000: {frame.info['seconds']:.2f}s solver ({it * 1e6:.0f} us/iteration)")


if __name__ == "__main__":
    main()
