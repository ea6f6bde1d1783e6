"""Membership hops and k-hop membership sets on the original hypergraph.

The membership hop of (v, e) is the largest clique-expansion distance from v
to a member of e. Distances are found by breadth-first search that alternates
node -> hyperedge -> node over the incidence lists, so the clique expansion
is never materialised. Only hops up to K + 1 are ever consumed, hence the
search stops at depth K + 1.
"""
import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from exceptions import ConfigError, DatasetError

_EMPTY = np.zeros(0, dtype=np.int64)


def node_hops(h, anchor: int, depth_limit: int) -> Dict[int, int]:
    """Clique-expansion hop from ``anchor`` to every node within ``depth_limit``"""
    if not 0 <= anchor < h.num_nodes:
        raise DatasetError(f"Anchor {anchor} outside [0, {h.num_nodes})")
    if depth_limit < 1:
        raise ConfigError(f"depth_limit must be >= 1, got {depth_limit}")

    hops = {anchor: 0}
    seen_edges = set()
    queue = deque([anchor])
    while queue:
        node = queue.popleft()
        depth = hops[node]
        if depth == depth_limit:
            # FIFO order: every later node is at depth_limit too
            break
        for e in h.node_edges[node]:
            if e in seen_edges:
                continue
            seen_edges.add(e)
            for member in h.edge_nodes[e]:
                member = int(member)
                if member not in hops:
                    hops[member] = depth + 1
                    queue.append(member)
    return hops


class MembershipIndex:
    """M_k(v) for every node v and k = 1..K+1, stored as sorted hyperedge id arrays"""

    def __init__(self, hop_range: int, sets: List[List[np.ndarray]]):
        self.hop_range = hop_range
        self._sets = sets

    @property
    def num_nodes(self):
        return len(self._sets)

    def members(self, v: int, k: int) -> np.ndarray:
        """M_k(v); empty for k outside 1..K+1"""
        if 1 <= k <= self.hop_range + 1:
            return self._sets[v][k - 1]
        return _EMPTY

    def set_sizes(self):
        """|V| x (K+1) matrix of set sizes"""
        return np.array([[s.size for s in per_node] for per_node in self._sets], dtype=np.int64)

    def describe(self, v: int):
        """JSON-ready mapping k -> hyperedge ids for one node"""
        return {str(k): self.members(v, k).tolist() for k in range(1, self.hop_range + 2)}


def build_index(h, hop_range: int, logger=None) -> MembershipIndex:
    """Assign every hyperedge with max member hop k <= K+1 to M_k(v), for each node v"""
    logger = logger or logging.getLogger('SEHSSL')
    if hop_range < 1:
        raise ConfigError(f"Hop range K must be >= 1, got {hop_range}")

    started = time.perf_counter()
    depth = hop_range + 1
    hop_of = np.full(h.num_nodes, -1, dtype=np.int64)
    sets = []
    for v in range(h.num_nodes):
        hops = node_hops(h, v, depth)
        reached = np.fromiter(hops.keys(), dtype=np.int64, count=len(hops))
        hop_of[reached] = np.fromiter(hops.values(), dtype=np.int64, count=len(hops))

        buckets = [[] for _ in range(depth)]
        candidates = {int(e) for u in reached for e in h.node_edges[u]}
        for e in sorted(candidates):
            member_hops = hop_of[h.edge_nodes[e]]
            if np.any(member_hops < 0):
                # a member lies beyond K+1
                continue
            k = int(member_hops.max())
            if k >= 1:
                buckets[k - 1].append(e)
        sets.append([np.asarray(b, dtype=np.int64) for b in buckets])
        hop_of[reached] = -1

    index = MembershipIndex(hop_range, sets)
    sizes = index.set_sizes().sum(axis=0)
    logger.info(f"Membership index built for K={hop_range} in {time.perf_counter() - started:.3f}s; "
                f"set sizes per hop: {sizes.tolist()}")
    return index


@dataclass(frozen=True)
class PairSample:
    positives: np.ndarray
    negatives: np.ndarray

    @property
    def skip(self):
        """True when the (v, k) term has no positive or no negative"""
        return self.positives.size == 0 or self.negatives.size == 0


def sample_pairs(index: MembershipIndex, v: int, k: int, d: int, rng) -> PairSample:
    """Uniformly sample up to d positives from M_k(v) and d negatives from M_{k+1}(v)"""
    if not 1 <= k <= index.hop_range:
        raise ConfigError(f"k must lie in [1, {index.hop_range}], got {k}")
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")

    def draw(pool):
        if pool.size <= d:
            return pool.copy()
        return np.sort(rng.choice(pool, size=d, replace=False))

    return PairSample(positives=draw(index.members(v, k)), negatives=draw(index.members(v, k + 1)))
