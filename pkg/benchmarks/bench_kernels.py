"""Time the compiled and pure-Python numkernel backends on batched inputs.

Usage: python3 benchmarks/bench_kernels.py [--tones 484] [--repeat 5]

Each kernel runs on a stack of ``--tones`` complex matrices shaped like the
default scenario's workloads; the best of ``--repeat`` runs is reported
together with the largest disagreement between the two backends.
"""
import argparse
import timeit

import numpy as np

from bdprecode import numkernel as nk


def _cases(rng, tones):
    def crandn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    a68 = crandn(tones, 6, 8)
    a88 = crandn(tones, 8, 8)
    a22 = crandn(tones, 2, 2)
    herm = a88 @ nk.hermitian(a88)
    return {
        "svd 6x8": (lambda: nk.svd(a68), lambda r: r.S),
        "qr 8x6": (lambda: nk.qr(np.swapaxes(a68, -1, -2), mode="thin"), lambda r: r.R),
        "evd 8x8": (lambda: nk.herm_evd(herm), lambda r: r[0]),
        "pinv 8x8": (lambda: nk.pinv(a88), lambda r: r),
        "clll 2x2": (lambda: nk.clll(a22), lambda r: r.reduced),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--tones", type=int, default=484)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = [b for b in ("compiled", "python") if _available(b)]
    print(f"{'kernel':10s}" + "".join(f"{b:>14s}" for b in backends) + f"{'speedup':>10s}{'max diff':>11s}")
    cases = _cases(np.random.default_rng(7), args.tones)
    for name, (fn, key) in cases.items():
        times, outputs = {}, {}
        for b in backends:
            prev = nk.use_backend(b)
            try:
                outputs[b] = np.asarray(key(fn()))
                times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            finally:
                nk.use_backend(prev)
        row = f"{name:10s}" + "".join(f"{1e3 * times[b]:11.2f} ms" for b in backends)
        if len(backends) == 2:
            diff = float(np.max(np.abs(outputs["compiled"] - outputs["python"])))
            row += f"{times['python'] / times['compiled']:9.2f}x{diff:11.1e}"
        print(row)


def _available(name):
    try:
        prev = nk.use_backend(name)
    except ImportError:
        return False
    nk.use_backend(prev)
    return True


if __name__ == "__main__":
    main()
