"""Similarity-based fusion of two models: the incremental-learning core.

Given a previous model and one freshly trained on a new batch, the two are
accumulated, a similarity graph over their primitives is built, each of its
connected components is resolved into a re-indexing / fusion decision, and
finally primitives and transitions are merged into the updated model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .gp import incremental_update, surrogate_data
from .grid import MotionPrimitive, inner_product
from .model import Model
from .segmentation import EdgeData, MotionPrimitiveGraph
from .sparse_coding import Dictionary

log = logging.getLogger(__name__)


@dataclass
class IndexMap:
    """Per-node virtual in/out indices, initially the identity."""

    in_idx: dict[int, int]
    out_idx: dict[int, int]
    dropped: set[int] = field(default_factory=set)  # Case-1 replaced atoms

    @classmethod
    def identity(cls, node_ids) -> "IndexMap":
        return cls({k: k for k in node_ids}, {k: k for k in node_ids})

    def _resolve(self, table, k):
        seen = set()
        while table.get(k, k) != k:
            if k in seen:
                raise DataError("cyclic index map")
            seen.add(k)
            k = table[k]
        return k

    def resolve_in(self, k: int) -> int:
        return self._resolve(self.in_idx, self.in_idx[k])

    def resolve_out(self, k: int) -> int:
        return self._resolve(self.out_idx, self.out_idx[k])


@dataclass
class SimilarityGraph:
    nodes: set[int]
    edges: dict[tuple[int, int], float]  # (prev_id, new_id) -> weight


FuseSet = list[tuple[int, ...]]


def similarity(a: MotionPrimitive, b: MotionPrimitive) -> float:
    """Cosine of the two primitives in the ambient R^(2N)."""
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        raise DataError("similarity of a zero-norm primitive is undefined")
    return inner_product(a, b) / (na * nb)


def accumulate(m_prev: Model, m_new: Model) -> tuple[Model, IndexMap]:
    """Concatenate both models with unique ids 1..(N1+N'1)."""
    if m_prev.grid != m_new.grid:
        raise DataError("cannot accumulate models on different grids")
    n1 = m_prev.dictionary.L
    atoms = [MotionPrimitive(a.id, dict(a.cells)) for a in m_prev.dictionary.atoms]
    for a in m_new.dictionary.atoms:
        atoms.append(MotionPrimitive(n1 + a.id, dict(a.cells)))
    edges: dict[tuple[int, int], EdgeData] = {}
    for (i, j), e in m_prev.graph.edges.items():
        edges[(i, j)] = EdgeData(e.count, e.samples, e.flow)
    for (i, j), e in m_new.graph.edges.items():
        edges[(n1 + i, n1 + j)] = EdgeData(e.count, e.samples, e.flow)
    graph = MotionPrimitiveGraph([a.id for a in atoms], edges)
    model = Model(Dictionary(atoms), graph, m_prev.grid, m_prev.episode)
    return model, IndexMap.identity(graph.nodes)


def build_similarity_graph(prev_atoms: list[MotionPrimitive],
                           new_atoms: list[MotionPrimitive],
                           t_s: float) -> SimilarityGraph:
    """Cross-model edges with cosine similarity >= t_s (accumulated ids)."""
    if not 0.0 < t_s <= 1.0:
        raise DataError("t_s must be in (0, 1]")
    edges = {}
    nodes = set()
    for a in prev_atoms:
        for b in new_atoms:
            s = similarity(a, b)
            if s >= t_s:
                edges[(a.id, b.id)] = s
                nodes.add(a.id)
                nodes.add(b.id)
    return SimilarityGraph(nodes, edges)


def _components(edges) -> list[list[tuple[int, int]]]:
    parent: dict[int, int] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        parent.setdefault(i, i)
        parent.setdefault(j, j)
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list] = {}
    for e in sorted(edges):
        groups.setdefault(find(e[0]), []).append(e)
    return [groups[r] for r in sorted(groups)]


def resolve_components(gs: SimilarityGraph, m_hat: Model, idx: IndexMap,
                       t_s: float) -> tuple[IndexMap, FuseSet]:
    """Apply the per-component re-indexing rules.

    Components are processed in ascending order of their minimum node id;
    components with three or more edges are first reduced by removing the
    least-similar edge (ties by lexicographic edge id).
    """
    fuse_set: FuseSet = []
    atoms = {a.id: a for a in m_hat.dictionary.atoms}
    r_edges = set(m_hat.graph.edges)

    def handle(comp: list[tuple[int, int]]):
        if len(comp) > 2:
            remaining = dict((e, gs.edges[e]) for e in comp)
            while len(remaining) > 2:
                worst = min(sorted(remaining), key=lambda e: (remaining[e], e))
                log.info("relaxing similarity edge %s (weight %.4f)", worst, remaining[worst])
                del remaining[worst]
            for sub in _components(list(remaining)):
                handle(sub)
            return
        if len(comp) == 1:
            (i, j), = comp
            m = min(idx.resolve_in(i), idx.resolve_in(j))
            for k in (i, j):
                idx.in_idx[k] = m
                idx.out_idx[k] = m
            fuse_set.append(tuple(sorted((i, j))))
            return
        # two edges: center node has degree 2
        nodes: dict[int, int] = {}
        for i, j in comp:
            nodes[i] = nodes.get(i, 0) + 1
            nodes[j] = nodes.get(j, 0) + 1
        center = [k for k, d in nodes.items() if d == 2]
        if len(center) != 1:
            # two disjoint one-edge pairs left after relaxation
            for e in comp:
                handle([e])
            return
        k = center[0]
        w, q = sorted(x for x in nodes if x != k)
        if (w, q) in r_edges or (q, w) in r_edges:
            i, j = (w, q) if (w, q) in r_edges else (q, w)
            # Case 1: (i, j) is richer than k; replace k, re-route its edges
            idx.in_idx[k] = idx.resolve_in(i)
            idx.out_idx[k] = idx.resolve_out(j)
            idx.dropped.add(k)
        elif similarity(atoms[w], atoms[q]) >= t_s:
            # Case 2: fuse all three under the minimum index
            m = min(idx.resolve_in(w), idx.resolve_in(q), idx.resolve_in(k))
            for x in (w, q, k):
                idx.in_idx[x] = m
                idx.out_idx[x] = m
            fuse_set.append(tuple(sorted((w, q, k))))
        # Case 3: leave the component untouched

    for comp in sorted(_components(list(gs.edges)), key=lambda c: min(min(e) for e in c)):
        handle(comp)
    return idx, fuse_set


def fuse_primitives(fuse_set: FuseSet, d_hat: Dictionary,
                    dropped: set[int]) -> tuple[Dictionary, dict[int, int]]:
    """Cell-wise mean of each fusion tuple; ids compacted to 1..|D''|.

    Returns the fused dictionary and the map accumulated id -> new id
    (members of a tuple all map to the fused atom; dropped atoms absent).
    """
    rep: dict[int, int] = {}
    for tup in fuse_set:
        r = min(tup)
        for k in tup:
            if k in rep:
                raise DataError("fusion tuples must be disjoint")
            rep[k] = r
    atoms: list[MotionPrimitive] = []
    old_to_new: dict[int, int] = {}
    members = {min(t): t for t in fuse_set}
    for a in d_hat.atoms:
        k = a.id
        if k in dropped:
            continue
        if k in rep and rep[k] != k:
            continue  # non-representative member, folded below
        if k in members:
            tup = members[k]
            cells: dict[int, np.ndarray] = {}
            for m in tup:
                for c, v in d_hat.atom(m).cells.items():
                    cells[c] = cells.get(c, np.zeros(2)) + v
            cells = {c: v / len(tup) for c, v in cells.items()}
            new = MotionPrimitive(len(atoms) + 1, cells)
        else:
            new = MotionPrimitive(len(atoms) + 1, dict(a.cells))
        atoms.append(new)
        old_to_new[k] = new.id
    for k, r in rep.items():
        old_to_new[k] = old_to_new[r]
    return Dictionary(atoms), old_to_new


def reindex_and_fuse_edges(graph: MotionPrimitiveGraph, idx: IndexMap,
                           old_to_new: dict[int, int],
                           gp_seed: int = 0) -> MotionPrimitiveGraph:
    """Map every edge (i, j) to (out(i), in(j)), merging duplicates.

    Duplicate counts are summed; duplicate flow fields are fused by
    incrementally updating the oldest edge's GP with the other edges' raw
    data (or their pseudo-input surrogates when raw data is gone).
    """
    groups: dict[tuple[int, int], list[tuple[tuple[int, int], EdgeData]]] = {}
    for key in sorted(graph.edges):
        i, j = key
        tgt = (idx.resolve_out(i), idx.resolve_in(j))
        if tgt[0] not in old_to_new or tgt[1] not in old_to_new:
            raise DataError(f"edge {key} maps to a missing primitive {tgt}")
        new_key = (old_to_new[tgt[0]], old_to_new[tgt[1]])
        groups.setdefault(new_key, []).append((key, graph.edges[key]))

    edges: dict[tuple[int, int], EdgeData] = {}
    for n, new_key in enumerate(sorted(groups)):
        group = groups[new_key]
        count = sum(e.count for _, e in group)
        flow = group[0][1].flow
        for _, e in group[1:]:
            if e.samples is not None:
                d2 = e.samples
            else:
                d2, _ = surrogate_data(e.flow)
            flow = incremental_update(flow, d2, seed=gp_seed + 7919 * (n + 1))
        edges[new_key] = EdgeData(count, None, flow)
    nodes = sorted(set(old_to_new.values()))
    return MotionPrimitiveGraph(nodes, edges)


def incremental_learning(m_prev: Model, m_new: Model, t_s: float,
                         gp_seed: int = 0) -> Model:
    """One SILA episode: accumulate, match, resolve, fuse."""
    if m_prev.dictionary.L == 0:
        return Model(m_new.dictionary, m_new.graph, m_new.grid, m_prev.episode + 1)
    if m_new.dictionary.L == 0:
        return Model(m_prev.dictionary, m_prev.graph, m_prev.grid, m_prev.episode + 1)
    m_hat, idx = accumulate(m_prev, m_new)
    n1 = m_prev.dictionary.L
    gs = build_similarity_graph(m_hat.dictionary.atoms[:n1],
                                m_hat.dictionary.atoms[n1:], t_s)
    idx, fuse_set = resolve_components(gs, m_hat, idx, t_s)
    d2, old_to_new = fuse_primitives(fuse_set, m_hat.dictionary, idx.dropped)
    graph = reindex_and_fuse_edges(m_hat.graph, idx, old_to_new, gp_seed=gp_seed)
    return Model(d2, graph, m_prev.grid, m_prev.episode + 1)


def standard_accumulate(m_prev: Model, m_new: Model) -> Model:
    """Baseline: concatenate without any fusion."""
    if m_prev.dictionary.L == 0:
        return Model(m_new.dictionary, m_new.graph, m_new.grid, m_prev.episode + 1)
    m_hat, _ = accumulate(m_prev, m_new)
    return Model(m_hat.dictionary, m_hat.graph, m_hat.grid, m_prev.episode + 1)
