#!/usr/bin/env python3
"""Generate the parity-check matrices shipped with the package.

- ccsds_128_64.alist: the CCSDS telecommand (128,64) protograph LDPC code,
  built from 4x8 blocks of 16x16 circulants (weight-2 blocks on the
  diagonal, one zero and one identity block per block row).
- small_32_16.alist: a seeded (3,6)-regular code used where brute-force ML
  decoding must stay feasible.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from nbpd.graph import TannerGraph, gf2_row_reduce, serialize_alist  # noqa: E402

M = 16


def circ(shift: int) -> np.ndarray:
    """16x16 circulant with row r having its one at column (r + shift) mod 16."""
    out = np.zeros((M, M), dtype=np.uint8)
    for r in range(M):
        out[r, (r + shift) % M] = 1
    return out


def ccsds_128_64() -> np.ndarray:
    Z = np.zeros((M, M), dtype=np.uint8)
    I = circ(0)

    def ip(shift):  # identity plus a shifted circulant
        return (I + circ(shift)) % 2

    blocks = [
        [ip(7), circ(2), circ(14), circ(6), Z, circ(0), circ(13), I],
        [circ(6), ip(15), circ(0), circ(1), I, Z, circ(0), circ(7)],
        [circ(4), circ(1), ip(15), circ(14), circ(11), I, Z, circ(3)],
        [circ(0), circ(1), circ(9), ip(13), circ(14), circ(1), I, Z],
    ]
    return np.block(blocks)


def small_32_16(seed: int = 7) -> np.ndarray:
    """Random (3,6)-regular 16x32 parity-check matrix with full rank."""
    rng = np.random.default_rng(seed)
    m, n, dv, dc = 16, 32, 3, 6
    while True:
        sockets = np.repeat(np.arange(m), dc)
        for _ in range(200):
            rng.shuffle(sockets)
            pairs = set()
            ok = True
            for e, v in enumerate(np.repeat(np.arange(n), dv)):
                c = sockets[e]
                if (v, c) in pairs:
                    ok = False
                    break
                pairs.add((v, c))
            if ok:
                break
        if not ok:
            continue
        H = np.zeros((m, n), dtype=np.uint8)
        for v, c in pairs:
            H[c, v] = 1
        _, pivots = gf2_row_reduce(H)
        if len(pivots) == m:
            return H


def main():
    out_dir = Path(__file__).resolve().parent.parent / "src" / "nbpd" / "codes"
    out_dir.mkdir(parents=True, exist_ok=True)

    H = ccsds_128_64()
    assert H.shape == (64, 128)
    assert H.sum() == 512, H.sum()
    assert set(H.sum(axis=1).tolist()) == {8}
    _, pivots = gf2_row_reduce(H)
    print(f"ccsds rank = {len(pivots)} (want 64), "
          f"d_vmax = {H.sum(axis=0).max()}")
    assert len(pivots) == 64
    g = TannerGraph.from_parity_check(H)
    (out_dir / "ccsds_128_64.alist").write_text(serialize_alist(g))

    Hs = small_32_16()
    gs = TannerGraph.from_parity_check(Hs)
    print(f"small code: n={gs.n} m={gs.m} E={gs.num_edges} d_vmax={gs.d_vmax}")
    (out_dir / "small_32_16.alist").write_text(serialize_alist(gs))
    print("wrote", out_dir)


if __name__ == "__main__":
    main()
