"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Reports the best-of-N time per call for nearest-neighbour distance scans
over map sizes from the augmented datasets and for HOG cell histograms of a
512x128 panorama, and checks that both backends return the same bits.
"""

import argparse
import timeit

import numpy as np

from hierloc import kernels

CASES_NN = [(556, 2048), (556, 4096), (3892, 2048), (20016, 1024)]
CASES_HOG = [((128, 512), 16, 8), ((128, 512), 8, 9)]


def best_ms(fn, repeat):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args(argv)

    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':<10}{'shape':<22}{'cython ms':>11}{'python ms':>11}{'speed-up':>10}  same bits")
    for n, m in CASES_NN:
        X = rng.random((n, m), dtype=np.float32)
        q = rng.random(m, dtype=np.float32).astype(np.float64)
        rp, rc = py.prepare_rows(X), cy.prepare_rows(X)
        tp = best_ms(lambda: py.sq_dists(rp, q), args.repeat)
        tc = best_ms(lambda: cy.sq_dists(rc, q), args.repeat)
        same = py.sq_dists(rp, q).tobytes() == np.asarray(cy.sq_dists(rc, q)).tobytes()
        print(f"{'sq_dists':<10}{f'{n} x {m}':<22}{tc:>11.3f}{tp:>11.3f}{tp / tc:>9.1f}x  {same}")
    for (h, w), cell, bins in CASES_HOG:
        gray = rng.random((h, w)) * 255
        tp = best_ms(lambda: py.hog_cell_histograms(gray, cell, bins), args.repeat)
        tc = best_ms(lambda: cy.hog_cell_histograms(gray, cell, bins), args.repeat)
        same = py.hog_cell_histograms(gray, cell, bins).tobytes() == \
            np.asarray(cy.hog_cell_histograms(gray, cell, bins)).tobytes()
        shape = f"{w}x{h} c{cell} b{bins}"
        print(f"{'hog':<10}{shape:<22}{tc:>11.3f}{tp:>11.3f}{tp / tc:>9.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
