"""Tanner graph representation, alist parsing and GF(2) code utilities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AlistError(ValueError):
    """Raised for malformed alist input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite code graph with a global edge index.

    Edges are numbered VN-major: all edges of VN 0 first (sorted by CN
    index), then VN 1, and so on. Adjacency lists hold edge ids sorted
    ascending by counterpart node index, which fixes the message and
    feature ordering everywhere downstream.
    """

    n: int
    m: int
    edge_vn: np.ndarray  # (E,) VN index of each edge
    edge_cn: np.ndarray  # (E,) CN index of each edge
    vn_adjacency: tuple[tuple[int, ...], ...]  # per VN, edge ids
    cn_adjacency: tuple[tuple[int, ...], ...]  # per CN, edge ids

    # Padded index tables for vectorized message passing, built once.
    vn_edge_table: np.ndarray = field(repr=False, default=None)  # (n, d_vmax)
    cn_edge_table: np.ndarray = field(repr=False, default=None)  # (m, d_cmax)
    vn_degrees: np.ndarray = field(repr=False, default=None)
    cn_degrees: np.ndarray = field(repr=False, default=None)

    @property
    def num_edges(self) -> int:
        return int(self.edge_vn.shape[0])

    @property
    def d_vmax(self) -> int:
        return int(self.vn_degrees.max()) if self.n else 0

    @property
    def d_cmax(self) -> int:
        return int(self.cn_degrees.max()) if self.m else 0

    @property
    def avg_cn_degree(self) -> float:
        return self.num_edges / self.m

    @classmethod
    def from_edges(cls, n: int, m: int, pairs) -> "TannerGraph":
        """Build a graph from (vn, cn) pairs; duplicates are rejected."""
        seen = set()
        for v, c in pairs:
            if not (0 <= v < n and 0 <= c < m):
                raise ValueError(f"edge ({v},{c}) out of range for n={n}, m={m}")
            if (v, c) in seen:
                raise ValueError(f"duplicate edge ({v},{c})")
            seen.add((v, c))
        # VN-major edge ids, CN ascending within each VN
        ordered = sorted(seen)
        edge_vn = np.array([v for v, _ in ordered], dtype=np.int64)
        edge_cn = np.array([c for _, c in ordered], dtype=np.int64)
        vn_adj = [[] for _ in range(n)]
        cn_adj = [[] for _ in range(m)]
        for e, (v, c) in enumerate(ordered):
            vn_adj[v].append(e)
        # CN adjacency sorted ascending by VN index; edge ids are VN-major so
        # ascending edge id within a CN is ascending VN index already.
        for e in np.argsort(edge_cn, kind="stable"):
            cn_adj[int(edge_cn[e])].append(int(e))
        vn_deg = np.array([len(a) for a in vn_adj], dtype=np.int64)
        cn_deg = np.array([len(a) for a in cn_adj], dtype=np.int64)
        d_vmax = int(vn_deg.max()) if n else 0
        d_cmax = int(cn_deg.max()) if m else 0
        E = len(ordered)
        # Padded tables point at a dummy edge slot E whose message is pinned
        # to the aggregation identity by the decoder engines.
        vn_tab = np.full((n, d_vmax), E, dtype=np.int64)
        cn_tab = np.full((m, d_cmax), E, dtype=np.int64)
        for v, adj in enumerate(vn_adj):
            vn_tab[v, : len(adj)] = adj
        for c, adj in enumerate(cn_adj):
            cn_tab[c, : len(adj)] = adj
        g = cls(
            n=n,
            m=m,
            edge_vn=edge_vn,
            edge_cn=edge_cn,
            vn_adjacency=tuple(tuple(a) for a in vn_adj),
            cn_adjacency=tuple(tuple(a) for a in cn_adj),
            vn_edge_table=vn_tab,
            cn_edge_table=cn_tab,
            vn_degrees=vn_deg,
            cn_degrees=cn_deg,
        )
        for arr in (g.edge_vn, g.edge_cn, g.vn_edge_table, g.cn_edge_table,
                    g.vn_degrees, g.cn_degrees):
            arr.setflags(write=False)
        return g

    @classmethod
    def from_parity_check(cls, H) -> "TannerGraph":
        H = np.asarray(H)
        m, n = H.shape
        rows, cols = np.nonzero(H % 2)
        return cls.from_edges(n, m, zip(cols.tolist(), rows.tolist()))

    def parity_check_matrix(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.edge_cn, self.edge_vn] = 1
        return H

    def neighbors_of_vn(self, v: int) -> list[int]:
        return [int(self.edge_cn[e]) for e in self.vn_adjacency[v]]

    def neighbors_of_cn(self, c: int) -> list[int]:
        return [int(self.edge_vn[e]) for e in self.cn_adjacency[c]]


def parse_alist(text: str) -> TannerGraph:
    """Parse alist text into a TannerGraph.

    Layout: line 1 "n m"; line 2 "max_vn_deg max_cn_deg"; line 3 the n VN
    degrees; line 4 the m CN degrees; then n lines of 1-based CN indices
    (one per VN) and m lines of 1-based VN indices (one per CN). Zero
    entries used as padding by some emitters are skipped.
    """
    lines = text.splitlines()

    def ints(idx: int, what: str) -> list[int]:
        if idx >= len(lines):
            raise AlistError(f"unexpected end of input, expected {what}", idx + 1)
        try:
            return [int(t) for t in lines[idx].split()]
        except ValueError:
            raise AlistError(f"non-integer token in {what}", idx + 1) from None

    header = ints(0, "header 'n m'")
    if len(header) != 2:
        raise AlistError("header must be exactly 'n m'", 1)
    n, m = header
    if n <= 0 or m <= 0:
        raise AlistError(f"non-positive dimensions n={n}, m={m}", 1)

    maxdeg = ints(1, "max degrees")
    if len(maxdeg) != 2:
        raise AlistError("expected 'max_vn_deg max_cn_deg'", 2)

    vn_deg = ints(2, "VN degree list")
    if len(vn_deg) != n:
        raise AlistError(f"expected {n} VN degrees, got {len(vn_deg)}", 3)
    cn_deg = ints(3, "CN degree list")
    if len(cn_deg) != m:
        raise AlistError(f"expected {m} CN degrees, got {len(cn_deg)}", 4)
    if max(vn_deg, default=0) > maxdeg[0]:
        raise AlistError("a VN degree exceeds the declared maximum", 3)
    if max(cn_deg, default=0) > maxdeg[1]:
        raise AlistError("a CN degree exceeds the declared maximum", 4)

    vn_block: list[list[int]] = []
    for v in range(n):
        lineno = 5 + v
        entries = [e for e in ints(4 + v, f"CN list of VN {v + 1}") if e != 0]
        if len(entries) != vn_deg[v]:
            raise AlistError(
                f"VN {v + 1} lists {len(entries)} CNs, degree line says {vn_deg[v]}",
                lineno,
            )
        for e in entries:
            if not 1 <= e <= m:
                raise AlistError(f"CN index {e} out of range 1..{m}", lineno)
        if len(set(entries)) != len(entries):
            raise AlistError(f"VN {v + 1} lists a CN twice", lineno)
        vn_block.append(entries)

    cn_block: list[list[int]] = []
    for c in range(m):
        lineno = 5 + n + c
        entries = [e for e in ints(4 + n + c, f"VN list of CN {c + 1}") if e != 0]
        if len(entries) != cn_deg[c]:
            raise AlistError(
                f"CN {c + 1} lists {len(entries)} VNs, degree line says {cn_deg[c]}",
                lineno,
            )
        for e in entries:
            if not 1 <= e <= n:
                raise AlistError(f"VN index {e} out of range 1..{n}", lineno)
        cn_block.append(entries)

    edges_from_vns = {(v, c - 1) for v, row in enumerate(vn_block) for c in row}
    edges_from_cns = {(v - 1, c) for c, row in enumerate(cn_block) for v in row}
    if edges_from_vns != edges_from_cns:
        diff = edges_from_vns.symmetric_difference(edges_from_cns)
        v, c = sorted(diff)[0]
        raise AlistError(
            f"VN block and CN block disagree, e.g. edge (VN {v + 1}, CN {c + 1})",
            5 + n,
        )
    return TannerGraph.from_edges(n, m, edges_from_vns)


def serialize_alist(g: TannerGraph) -> str:
    """Serialize a graph to normalized alist text (sorted, no padding)."""
    out = [f"{g.n} {g.m}", f"{g.d_vmax} {g.d_cmax}"]
    out.append(" ".join(str(int(d)) for d in g.vn_degrees))
    out.append(" ".join(str(int(d)) for d in g.cn_degrees))
    for v in range(g.n):
        out.append(" ".join(str(c + 1) for c in g.neighbors_of_vn(v)))
    for c in range(g.m):
        out.append(" ".join(str(v + 1) for v in g.neighbors_of_cn(c)))
    return "\n".join(out) + "\n"


def syndrome_ok(g: TannerGraph, bits) -> bool:
    """True iff H @ bits = 0 over GF(2)."""
    bits = np.asarray(bits)
    if bits.shape != (g.n,):
        raise ValueError(f"expected {g.n} bits, got shape {bits.shape}")
    # Per-CN parity via bincount of set bits.
    ones = bits[g.edge_vn].astype(np.int64)
    parity = np.bincount(g.edge_cn, weights=ones, minlength=g.m).astype(np.int64) % 2
    return not parity.any()


def syndrome_ok_batch(g: TannerGraph, bits: np.ndarray) -> np.ndarray:
    """Vectorized syndrome check for bits of shape (B, n); returns (B,) bool."""
    contrib = bits[:, g.edge_vn].astype(np.int64)
    parity = np.zeros((bits.shape[0], g.m), dtype=np.int64)
    np.add.at(parity, (slice(None), g.edge_cn), contrib)
    return ~(parity % 2).any(axis=1)


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generator in row form; H @ row = 0 over GF(2) for every row."""

    k: int
    rows: np.ndarray  # (k, n) uint8
    column_permutation: np.ndarray  # pivot columns first, then free columns

    @property
    def n(self) -> int:
        return int(self.rows.shape[1])


def gf2_row_reduce(H: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """In-place style GF(2) Gaussian elimination with column pivoting.

    Returns the reduced matrix and the list of pivot columns.
    """
    A = (np.asarray(H) % 2).astype(np.uint8).copy()
    m, n = A.shape
    pivots: list[int] = []
    r = 0
    for col in range(n):
        if r >= m:
            break
        hits = np.nonzero(A[r:, col])[0]
        if hits.size == 0:
            continue
        pivot = r + int(hits[0])
        if pivot != r:
            A[[r, pivot]] = A[[pivot, r]]
        eliminate = np.nonzero(A[:, col])[0]
        for row in eliminate:
            if row != r:
                A[row] ^= A[r]
        pivots.append(col)
        r += 1
    return A, pivots


def derive_generator(g: TannerGraph) -> GeneratorMatrix:
    """Generator matrix via GF(2) elimination; raises if the code is trivial."""
    H = g.parity_check_matrix()
    A, pivots = gf2_row_reduce(H)
    rank = len(pivots)
    k = g.n - rank
    if k == 0:
        raise ValueError("parity-check matrix has full column rank, k = 0")
    free = [c for c in range(g.n) if c not in set(pivots)]
    perm = np.array(pivots + free, dtype=np.int64)
    # In permuted coordinates A[:rank, perm] = [I | P]; codeword rows are
    # [P^T | I] mapped back through the permutation.
    P = A[np.ix_(range(rank), free)]
    rows = np.zeros((k, g.n), dtype=np.uint8)
    for j in range(k):
        rows[j, free[j]] = 1
        rows[j, pivots] = P[:, j]
    gen = GeneratorMatrix(k=k, rows=rows, column_permutation=perm)
    gen.rows.setflags(write=False)
    gen.column_permutation.setflags(write=False)
    return gen


def encode(gen: GeneratorMatrix, msg) -> np.ndarray:
    """Codeword msg @ G over GF(2)."""
    msg = np.asarray(msg)
    if msg.shape != (gen.k,):
        raise ValueError(f"expected message of length {gen.k}, got {msg.shape}")
    return (msg.astype(np.int64) @ gen.rows.astype(np.int64)) % 2


def encode_batch(gen: GeneratorMatrix, msgs: np.ndarray) -> np.ndarray:
    """Codewords for msgs of shape (B, k)."""
    return (msgs.astype(np.int64) @ gen.rows.astype(np.int64)) % 2


MAX_ENUM_K = 24


def enumerate_codewords(gen: GeneratorMatrix):
    """Yield all 2^k codewords exactly once (k capped at 24)."""
    if gen.k > MAX_ENUM_K:
        raise ValueError(f"k={gen.k} exceeds enumeration cap {MAX_ENUM_K}")
    word = np.zeros(gen.n, dtype=np.uint8)
    yield word.copy()
    # Gray-code walk: one generator row flips per step.
    for i in range(1, 2**gen.k):
        flip = (i & -i).bit_length() - 1
        word ^= gen.rows[flip]
        yield word.copy()


def count_weights(g: TannerGraph) -> int:
    """Trainable decoder weight count: one per edge direction plus one per VN."""
    return 2 * g.num_edges + g.n
