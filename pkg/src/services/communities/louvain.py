"""Greedy modularity maximization (local moving plus aggregation)."""

from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import structlog

from src.models.pipeline import DetectionConfig, NodeWeightMode
from src.services.communities.affinity import AFFINITY_TRANSFORM, AffinityGraph
from src.services.communities.modularity import modularity
from src.services.mapping import CrimeLayer
from src.utils.validators import (
    DisconnectedGraphError,
    EmptyGraphError,
    LayerMismatchError,
    ModularityError,
)

logger = structlog.get_logger(__name__)

# A move must raise Q by more than this to be taken
_MIN_GAIN = 1e-12
# Allowed float noise when checking that Q never decreases
_MONOTONE_SLACK = 1e-10


@dataclass(frozen=True)
class CommunitySet:
    """A partition of graph nodes into connected communities.

    Community ids are 0..K-1, numbered by each community's smallest node id.
    """

    partition: Mapping[int, int]
    crime_type: str
    detection_seed: int
    node_weight_mode: NodeWeightMode = NodeWeightMode.IGNORE
    self_loop_scale: float = 0.0
    modularity: float = 0.0
    trace: tuple[float, ...] = ()
    graph_fingerprint: str = ""
    transform: str = AFFINITY_TRANSFORM

    def __len__(self) -> int:
        return len(set(self.partition.values()))

    def members(self) -> dict[int, list[int]]:
        """Community id → sorted node ids."""
        out: dict[int, list[int]] = {}
        for node_id in sorted(self.partition):
            out.setdefault(self.partition[node_id], []).append(node_id)
        return dict(sorted(out.items()))


@dataclass
class _Level:
    """One aggregation level over contiguous node indexes."""

    adj: list[dict[int, float]]
    loops: list[float]
    degrees: list[float] = field(init=False)
    two_m: float = field(init=False)

    def __post_init__(self) -> None:
        self.degrees = [sum(nbrs.values()) + 2 * w for nbrs, w in zip(self.adj, self.loops, strict=True)]
        self.two_m = sum(self.degrees)

    def __len__(self) -> int:
        return len(self.adj)

    def quality(self, comm: list[int]) -> float:
        internal: dict[int, float] = {}
        totals: dict[int, float] = {}
        for i, nbrs in enumerate(self.adj):
            c = comm[i]
            totals[c] = totals.get(c, 0.0) + self.degrees[i]
            inside = 2 * self.loops[i] + sum(w for j, w in nbrs.items() if comm[j] == c)
            internal[c] = internal.get(c, 0.0) + inside
        return sum(internal[c] / self.two_m - (tot / self.two_m) ** 2 for c, tot in totals.items())

    def aggregate(self, comm: list[int]) -> tuple["_Level", list[int]]:
        """Collapse communities into nodes; returns the new level and the node→new-index map."""
        relabel: dict[int, int] = {}
        for c in comm:
            relabel.setdefault(c, len(relabel))
        mapping = [relabel[c] for c in comm]
        adj: list[dict[int, float]] = [{} for _ in relabel]
        loops = [0.0] * len(relabel)
        for i, nbrs in enumerate(self.adj):
            ci = mapping[i]
            loops[ci] += self.loops[i]
            for j, w in nbrs.items():
                cj = mapping[j]
                if ci == cj:
                    # each internal edge is seen from both ends
                    loops[ci] += w / 2
                else:
                    adj[ci][cj] = adj[ci].get(cj, 0.0) + w
        return _Level(adj, loops), mapping


def _check_step(previous: float, current: float, check: bool) -> None:
    if check and current < previous - _MONOTONE_SLACK:
        raise ModularityError(f"Modularity decreased from {previous!r} to {current!r}")


def _local_moving(
    level: _Level,
    rng: np.random.Generator,
    tolerance: float,
    trace: list[float],
    check: bool,
) -> tuple[list[int], bool]:
    """Move single nodes between communities until a pass gains at most `tolerance`."""
    n = len(level)
    m = level.two_m / 2
    comm = list(range(n))
    tot = list(level.degrees)
    q = level.quality(comm)
    moved_any = False

    while True:
        moves = 0
        for i in rng.permutation(n).tolist():
            ci = comm[i]
            ki = level.degrees[i]
            links: dict[int, float] = {}
            for j, w in level.adj[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            tot[ci] -= ki

            best = ci
            best_gain = links.get(ci, 0.0) / m - tot[ci] * ki / (2 * m * m)
            for c in sorted(links):
                if c == ci:
                    continue
                gain = links[c] / m - tot[c] * ki / (2 * m * m)
                if gain > best_gain + _MIN_GAIN:
                    best, best_gain = c, gain

            tot[best] += ki
            if best != ci:
                comm[i] = best
                moves += 1

        new_q = level.quality(comm)
        trace.append(new_q)
        _check_step(q, new_q, check)
        moved_any = moved_any or moves > 0
        gain = new_q - q
        q = new_q
        if moves == 0 or gain <= tolerance:
            return comm, moved_any


def _split_disconnected(
    nodes: list[int], adj: list[dict[int, float]], comm: list[int]
) -> list[int]:
    """Give every connected part of a community its own label."""
    labels = [-1] * len(nodes)
    next_label = 0
    for start in range(len(nodes)):
        if labels[start] != -1:
            continue
        labels[start] = next_label
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                if labels[j] == -1 and comm[j] == comm[i]:
                    labels[j] = next_label
                    queue.append(j)
        next_label += 1
    return labels


def _is_connected(adj: list[dict[int, float]]) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        for j in adj[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == len(adj)


def resolve_self_loop_scale(ag: AffinityGraph, cfg: DetectionConfig) -> float:
    """λ: the configured scale, or the mean edge affinity."""
    if cfg.node_weight_mode is NodeWeightMode.IGNORE:
        return 0.0
    return cfg.self_loop_scale if cfg.self_loop_scale is not None else ag.mean_affinity


def detect_communities(
    ag: AffinityGraph,
    layer: CrimeLayer,
    cfg: DetectionConfig | None = None,
) -> CommunitySet:
    """
    Partition a connected affinity graph by greedy modularity maximization.

    In self_loop mode every node receives a loop of weight λ·count(v) before
    detection. Node visit order is a shuffle seeded by cfg.seed. Communities
    that end up disconnected are split into their connected parts.

    Raises:
        EmptyGraphError: If the graph has no node
        DisconnectedGraphError: If the graph is not connected
        LayerMismatchError: If the layer counts nodes outside the graph
        ModularityError: If check_monotone is set and Q decreases
    """
    cfg = cfg or DetectionConfig()
    if len(ag) == 0:
        raise EmptyGraphError("Cannot detect communities in an empty graph")
    known = set(ag.nodes)
    foreign = [n for n in layer.counts if n not in known]
    if foreign:
        raise LayerMismatchError(
            f"Layer '{layer.crime_type}' counts {len(foreign)} node(s) outside the graph"
        )

    ag = ag.with_node_sizes(layer.counts)
    scale = resolve_self_loop_scale(ag, cfg)
    if scale > 0:
        ag = ag.fold_node_sizes(scale)
    logger.debug(
        "node_sizes_folded",
        crime_type=layer.crime_type,
        sized_nodes=len(ag.node_sizes),
        crimes=sum(ag.node_sizes.values()),
        scale=scale,
    )

    nodes = list(ag.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    adj: list[dict[int, float]] = [{} for _ in nodes]
    for u, v, a in ag.edges:
        iu, iv = index[u], index[v]
        adj[iu][iv] = adj[iu].get(iv, 0.0) + a
        adj[iv][iu] = adj[iv].get(iu, 0.0) + a
    loops = [float(ag.self_loops.get(n, 0.0)) for n in nodes]

    if not _is_connected(adj):
        raise DisconnectedGraphError(
            "Community detection needs a connected graph; restrict it with largest_component first"
        )

    rng = np.random.default_rng(cfg.seed)
    level = _Level(adj, loops)
    assignment = list(range(len(nodes)))
    trace: list[float] = []

    if level.two_m > 0:
        q_start = level.quality(list(range(len(level))))
        trace.append(q_start)
        while True:
            comm, moved = _local_moving(level, rng, cfg.tolerance, trace, cfg.check_monotone)
            if not moved:
                break
            level, mapping = level.aggregate(comm)
            assignment = [mapping[a] for a in assignment]
            q_end = trace[-1]
            if q_end - q_start <= cfg.tolerance or len(level) == 1:
                break
            q_start = q_end
    else:
        assignment = [0] * len(nodes)

    labels = _split_disconnected(nodes, adj, assignment)
    # renumber by smallest node id; nodes are already sorted
    renumber: dict[int, int] = {}
    for label in labels:
        renumber.setdefault(label, len(renumber))
    partition = {n: renumber[labels[i]] for i, n in enumerate(nodes)}

    q = modularity(ag, partition) if level.two_m > 0 else 0.0
    if trace:
        _check_step(trace[-1], q, cfg.check_monotone)
    trace.append(q)

    cs = CommunitySet(
        partition=partition,
        crime_type=layer.crime_type,
        detection_seed=cfg.seed,
        node_weight_mode=cfg.node_weight_mode,
        self_loop_scale=scale,
        modularity=q,
        trace=tuple(trace),
        graph_fingerprint=layer.graph_fingerprint,
    )
    logger.info(
        "communities_detected",
        crime_type=layer.crime_type,
        communities=len(cs),
        modularity=round(q, 6),
        mode=cfg.node_weight_mode.value,
        self_loop_scale=scale,
        passes=len(trace) - 2,
    )
    return cs
