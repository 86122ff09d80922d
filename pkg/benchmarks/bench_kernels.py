"""Compiled vs NumPy kernels on encoding applications and a short QSVT run.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from qsvtemu import emulator
from qsvtemu.emulator import FastEncoding
from qsvtemu.encoders import encode
from qsvtemu.matrices import laplacian, toeplitz_for_kappa
from qsvtemu.phases import generate
from qsvtemu.qsvt import qsvt_solve

CASES = [
    ("l2d_8x8_ddrr", "arcsin"),
    ("l2d_8x8_ddrr", "prepare_select"),
    ("l3d_4x8x8_dnrrdd", "arcsin"),
    ("l3d_4x8x8_dnrrdd", "fable"),
    ("l3d_4x8x8_dnrrdd", "prepare_select"),
]


def best_of(fn, repeat):
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    have_ext = True
    try:
        emulator.set_backend("cython")
    except ImportError:
        have_ext = False
    backends = ["python", "cython"] if have_ext else ["python"]

    print(f"{'case':<22}{'scheme':<16}{'qubits':>7}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    rng = np.random.default_rng(0)
    for name, scheme in CASES:
        c = encode(laplacian(name), scheme)
        fe = FastEncoding(c)
        v0 = rng.standard_normal((1, 1 << c.n_qubits)) + 0j
        times = []
        for b in backends:
            emulator.set_backend(b)
            v = v0.copy()
            times.append(best_of(lambda: fe.apply(v), args.repeat))
        sp = times[0] / times[-1] if len(times) > 1 else float("nan")
        print(f"{name:<22}{scheme:<16}{c.n_qubits:>7}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + f"{sp:>9.1f}x")

    a = toeplitz_for_kappa(32, 28.8)
    _, ps = generate(50.0, 1e-2)
    row = []
    for b in backends:
        emulator.set_backend(b)
        row.append(best_of(lambda: qsvt_solve(a, np.ones(32), "prepare_select", ps, classical=False), 1))
    sp = row[0] / row[-1] if len(row) > 1 else float("nan")
    print(f"{'toeplitz32 qsvt d=' + str(ps.degree):<38}{'':>7}" + "".join(f"{t:>11.2f}s" for t in row) + f"{sp:>9.1f}x")


if __name__ == "__main__":
    main()
