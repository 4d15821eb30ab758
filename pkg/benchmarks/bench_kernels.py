"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from wavefront_dcs import _fallback
from wavefront_dcs.wavelet import SYM5_LOWPASS

try:
    from wavefront_dcs import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    x32 = rng.standard_normal((32, 32))
    x256 = rng.standard_normal((256, 256))
    return {
        "dwt2_forward 32x32 L4": lambda k: k.dwt2_forward(x32, SYM5_LOWPASS, 4),
        "dwt2_inverse 32x32 L4": lambda k: k.dwt2_inverse(x32, SYM5_LOWPASS, 4),
        "dwt2_forward 256x256 L4": lambda k: k.dwt2_forward(x256, SYM5_LOWPASS, 4),
        "tv_chambolle 256x256 50it": lambda k: k.tv_chambolle(x256, 0.05, 50, 0.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}" + "".join(f"{name + ' (ms)':>16}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases(rng).items():
        times = []
        for _, mod in backends:
            fn(mod)
            t = timeit.Timer(lambda: fn(mod))
            n, _ = t.autorange()
            times.append(min(t.repeat(args.repeat, n)) / n * 1e3)
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{label:<28}" + "".join(f"{t:>16.3f}" for t in times) + speed)


if __name__ == "__main__":
    main()
