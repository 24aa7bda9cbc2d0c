"""Elbow choices of k_m and k when each modality carries extra noise-only basis coordinates."""

import argparse
import csv
import math

import numpy as np

from latentgraph.model import ScoreBundle
from latentgraph.selection import elbow_k, elbow_k_m
from latentgraph.synth import NoiseSpec, SyntheticSpec, rng_for, simulate


def pad(data, extra, var, seed):
    rng = rng_for(seed, 77)
    out = []
    for y in data.scores:
        km = y.shape[0] // data.p
        noise = math.sqrt(var) * rng.standard_normal((data.p, extra, data.N))
        out.append(np.concatenate([y.reshape(data.p, km, -1), noise], axis=1).reshape(-1, data.N))
    return ScoreBundle(data.p, tuple(out))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--extra", type=int, default=6)
    ap.add_argument("--out", default="elbow_check.csv")
    args = ap.parse_args(argv)

    rows = []
    for seed in range(args.seeds):
        data, _ = simulate(SyntheticSpec("G2", 50, r=9, r_m=(9, 9), noise=NoiseSpec("NM1", 0.05),
                                         N=100, seed=seed))
        wide = pad(data, args.extra, 0.05, seed)
        top = 9 + args.extra
        km = elbow_k_m(wide, list(range(3, top + 1, 3)))
        k = elbow_k(wide, top)
        rows.append({"seed": seed, "k_m": " ".join(map(str, km)), "k": k})
        print(rows[-1])
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["seed", "k_m", "k"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
