"""Scale-free interaction network: generation, sampling, persistence.

The network constrains which agent pairs may interact. It is generated
once per calibration task with the Barabasi-Albert preferential-attachment
process and shared read-only by every simulation replicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng


@dataclass(frozen=True)
class SocialNetwork:
    """Immutable undirected graph over ``n`` agents.

    Neighbor lists are stored in CSR form (``csr_ptr``, ``csr_idx``) with
    each node's neighbors sorted ascending; ``edges`` is the flat list of
    undirected pairs (i, j) with i < j.
    """

    n: int
    edges: np.ndarray            # shape (E, 2), int64, i < j
    csr_ptr: np.ndarray          # shape (n + 1,), int64
    csr_idx: np.ndarray          # shape (2E,), int64
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        degrees = np.diff(self.csr_ptr)
        object.__setattr__(self, "degrees", degrees)
        for arr in (self.edges, self.csr_ptr, self.csr_idx, degrees):
            arr.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbor ids of node i (read-only view)."""
        return self.csr_idx[self.csr_ptr[i]:self.csr_ptr[i + 1]]

    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.n

    def is_connected(self) -> bool:
        """Breadth-first reachability from node 0."""
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for v in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        nxt.append(int(v))
            frontier = nxt
        return bool(seen.all())


def from_edges(n: int, pairs: np.ndarray) -> SocialNetwork:
    """Build a network from an (E, 2) array of undirected pairs.

    Pairs may arrive in either orientation; duplicates are not checked.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    edges = np.stack([lo, hi], axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]

    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    csr_idx = dst[order]
    counts = np.bincount(src, minlength=n)
    csr_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=csr_ptr[1:])
    return SocialNetwork(n=n, edges=edges, csr_ptr=csr_ptr, csr_idx=csr_idx)


def generate_ba(n: int, m: int, seed: int) -> SocialNetwork:
    """Barabasi-Albert preferential-attachment network.

    Starts from a complete core on m + 1 nodes, then attaches each new
    node with m edges to distinct existing nodes chosen with probability
    proportional to current degree (repeated-nodes urn; duplicates within
    one attachment round are rejected). Deterministic for fixed
    (n, m, seed).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    rng = make_rng(seed)

    core = m + 1
    pairs = [(i, j) for i in range(core) for j in range(i + 1, core)]
    # Urn with one entry per edge endpoint; core nodes start with degree m.
    urn = [i for i in range(core) for _ in range(m)]

    for source in range(core, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(urn[rng.integers(0, len(urn))])
        for t in sorted(targets):
            pairs.append((t, source))
            urn.append(t)
        urn.extend([source] * m)

    return from_edges(n, np.array(pairs, dtype=np.int64))


def random_edge(network: SocialNetwork, rng: np.random.Generator) -> tuple[int, int]:
    """Uniformly random edge, endpoint order decided by a fair coin flip."""
    if network.n_edges == 0:
        raise ValueError("network has no edges")
    e = int(rng.integers(0, network.n_edges))
    i, j = network.edges[e]
    if rng.integers(0, 2):
        return int(j), int(i)
    return int(i), int(j)


def save_edgelist(network: SocialNetwork, path) -> None:
    """Write one "i j" pair per line, 0-indexed, ascending."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in network.edges:
            fh.write(f"{i} {j}\n")


def load_edgelist(path) -> SocialNetwork:
    """Rebuild a network pinned by :func:`save_edgelist`."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
            i, j = int(parts[0]), int(parts[1])
            if i == j:
                raise ValueError(f"line {lineno}: self-loop {i}")
            pairs.append((i, j))
    if not pairs:
        raise ValueError("empty edge list")
    arr = np.array(pairs, dtype=np.int64)
    return from_edges(int(arr.max()) + 1, arr)
