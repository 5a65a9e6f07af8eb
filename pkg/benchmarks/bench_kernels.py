"""Compare the compiled LSTM kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The compiled backend must be importable (build it with
`pip install -e . --no-build-isolation`). Timings cover lstm_forward and
lstm_backward over a grid of sequence lengths and hidden sizes.
"""

import argparse
import time

import numpy as np

from mlnet.kernels import pure

try:
    from mlnet.kernels import _fastcore
except ImportError:
    _fastcore = None


def make_case(rng, t, d, h):
    x = rng.normal(size=(t, d))
    mask = np.ones(t, dtype=np.uint8)
    w = rng.uniform(-0.1, 0.1, size=(d, 4 * h))
    u = rng.uniform(-0.1, 0.1, size=(h, 4 * h))
    b = np.zeros(4 * h)
    b[h:2 * h] = 1.0
    return x, mask, w, u, b


def time_backend(mod, case, repeats):
    x, mask, w, u, b = case
    # warm up and capture forward state for the backward pass
    h_out, gates, h_states, c_states = mod.lstm_forward(x, mask, w, u, b)
    dh = np.ones_like(h_out)

    start = time.perf_counter()
    for _ in range(repeats):
        mod.lstm_forward(x, mask, w, u, b)
    fwd = (time.perf_counter() - start) / repeats

    start = time.perf_counter()
    for _ in range(repeats):
        mod.lstm_backward(x, mask, w, u, gates, h_states, c_states, dh)
    bwd = (time.perf_counter() - start) / repeats
    return fwd, bwd


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    if _fastcore is None:
        print("compiled backend not available; reinstall with the extension built")
        return 1

    rng = np.random.default_rng(0)
    grid = [(8, 16, 16), (32, 50, 50), (64, 100, 100), (128, 200, 100)]
    print(f"{'T':>5} {'D':>5} {'H':>5} | {'pure fwd':>10} {'fast fwd':>10} "
          f"{'speedup':>8} | {'pure bwd':>10} {'fast bwd':>10} {'speedup':>8}")
    for t, d, h in grid:
        case = make_case(rng, t, d, h)
        pf, pb = time_backend(pure, case, args.repeats)
        ff, fb = time_backend(_fastcore, case, args.repeats)
        print(f"{t:>5} {d:>5} {h:>5} | {pf * 1e3:>8.3f}ms {ff * 1e3:>8.3f}ms "
              f"{pf / ff:>7.1f}x | {pb * 1e3:>8.3f}ms {fb * 1e3:>8.3f}ms "
              f"{pb / fb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
