"""Truss-based explanation subgraphs for suggested drug sets.

Edge signs are ignored for trussness and distances; they feed only the
satisfaction score and rendering.  The explanation graph is the signed
(non-zero) part of the interaction graph.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .errors import ConfigError, DisconnectedQueryError

__all__ = [
    "TrussIndex",
    "SteinerTree",
    "ExplanationSubgraph",
    "truss_decomposition",
    "steiner_tree",
    "closest_truss_community",
    "suggestion_satisfaction",
    "explain_suggestion",
]


def _ekey(u, v):
    return (u, v) if u < v else (v, u)


class SimpleGraph:
    """Small undirected graph on integer nodes with adjacency sets."""

    def __init__(self, edges=(), nodes=()):
        self.adj = {}
        for n in nodes:
            self.adj.setdefault(n, set())
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u, v):
        if u == v:
            raise ConfigError("self-loops not allowed")
        self.adj.setdefault(u, set()).add(v)
        self.adj.setdefault(v, set()).add(u)

    @property
    def nodes(self):
        return sorted(self.adj)

    def edges(self):
        return sorted(
            _ekey(u, v) for u in self.adj for v in self.adj[u] if u < v
        )

    def has_edge(self, u, v):
        return v in self.adj.get(u, ())

    def subgraph(self, nodes):
        nodes = set(nodes)
        g = SimpleGraph(nodes=nodes)
        for u, v in self.edges():
            if u in nodes and v in nodes:
                g.add_edge(u, v)
        return g

    def component_of(self, start):
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in self.adj.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def components(self):
        seen = set()
        out = []
        for n in self.nodes:
            if n not in seen:
                comp = self.component_of(n)
                seen |= comp
                out.append(comp)
        return out

    def bfs_distances(self, start):
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for w in self.adj.get(u, ()):
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            frontier = nxt
        return dist

    def diameter(self):
        best = 0
        for n in self.nodes:
            dist = self.bfs_distances(n)
            if dist:
                best = max(best, max(dist.values()))
        return best


def graph_from_ddi(ddi_graph):
    """Unsigned view of the real (non-zero) interactions, keeping all drugs."""
    return SimpleGraph(
        edges=[(e.u, e.v) for e in ddi_graph.signed_edges()],
        nodes=range(ddi_graph.n_drugs),
    )


@dataclass
class TrussIndex:
    truss: dict  # (u, v) sorted pair -> truss number
    max_p: int = 2

    def of(self, u, v):
        return self.truss[_ekey(u, v)]


def _supports(graph):
    sup = {}
    for u, v in graph.edges():
        sup[(u, v)] = len(graph.adj[u] & graph.adj[v])
    return sup


def truss_decomposition(graph):
    """Peel minimum-support edges; truss number = support at deletion + 2,
    kept monotone over the peeling order."""
    adj = {n: set(nbrs) for n, nbrs in graph.adj.items()}
    sup = {}
    for u, v in graph.edges():
        sup[(u, v)] = len(adj[u] & adj[v])
    truss = {}
    level = 2
    heap = [(s, e) for e, s in sup.items()]
    heapq.heapify(heap)
    alive = set(sup)
    while heap:
        s, e = heapq.heappop(heap)
        if e not in alive or s != sup[e]:
            continue
        u, v = e
        level = max(level, s + 2)
        truss[e] = level
        alive.discard(e)
        for w in adj[u] & adj[v]:
            for other in (_ekey(u, w), _ekey(v, w)):
                if other in alive:
                    sup[other] -= 1
                    heapq.heappush(heap, (sup[other], other))
        adj[u].discard(v)
        adj[v].discard(u)
    max_p = max(truss.values(), default=2)
    return TrussIndex(truss, max_p)


@dataclass
class SteinerTree:
    nodes: set
    edges: set  # sorted pairs
    multi_component: bool = False

    def weight(self, weights):
        return sum(weights[e] for e in self.edges)


def _truss_weights(graph, truss_index):
    """Edge weight 1/(truss-1): strictly positive, prefers dense edges."""
    return {e: 1.0 / (truss_index.truss[e] - 1) for e in graph.edges()}


def _dijkstra(graph, weights, source):
    dist = {source: 0.0}
    prev = {}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for w in sorted(graph.adj.get(u, ())):
            nd = d + weights[_ekey(u, w)]
            if w not in dist or nd < dist[w] - 1e-15:
                dist[w] = nd
                prev[w] = u
                heapq.heappush(heap, (nd, w))
    return dist, prev


def _path_from(prev, source, target):
    path = [target]
    while path[-1] != source:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _mst(nodes, edge_list):
    """Prim over (weight, u, v) tuples; deterministic tie-breaks."""
    nodes = sorted(nodes)
    if not nodes:
        return []
    adj = {n: [] for n in nodes}
    for w, u, v in edge_list:
        adj[u].append((w, v, u))
        adj[v].append((w, u, v))
    start = nodes[0]
    in_tree = {start}
    heap = sorted(adj[start])
    heapq.heapify(heap)
    tree = []
    while heap and len(in_tree) < len(nodes):
        w, v, u = heapq.heappop(heap)
        if v in in_tree:
            continue
        in_tree.add(v)
        tree.append((u, v))
        for item in adj[v]:
            if item[1] not in in_tree:
                heapq.heappush(heap, item)
    return tree


def _steiner_component(graph, weights, terminals):
    """Mehlhorn-style 2-approximation within one connected component."""
    terminals = sorted(terminals)
    if len(terminals) == 1:
        return {terminals[0]}, set()
    paths = {}
    metric_edges = []
    shortest = {}
    for q in terminals:
        shortest[q] = _dijkstra(graph, weights, q)
    for a_idx, a in enumerate(terminals):
        dist, prev = shortest[a]
        for b in terminals[a_idx + 1 :]:
            metric_edges.append((dist[b], a, b))
            paths[(a, b)] = _path_from(prev, a, b)
    # MST of the terminal distance graph, expanded into real paths
    tree1 = _mst(terminals, sorted(metric_edges))
    expanded = SimpleGraph(nodes=terminals)
    for u, v in tree1:
        path = paths[_ekey(u, v)]
        for a, b in zip(path, path[1:]):
            expanded.add_edge(a, b)
    # second MST on the expanded subgraph, then prune non-terminal leaves
    edge_list = sorted((weights[e], e[0], e[1]) for e in expanded.edges())
    tree2 = set(_ekey(u, v) for u, v in _mst(expanded.nodes, edge_list))
    nodes = set(expanded.nodes)
    changed = True
    while changed:
        changed = False
        degree = {n: 0 for n in nodes}
        for u, v in tree2:
            degree[u] += 1
            degree[v] += 1
        for n in sorted(nodes):
            if degree.get(n, 0) <= 1 and n not in terminals:
                tree2 = {e for e in tree2 if n not in e}
                nodes.discard(n)
                changed = True
    return nodes, tree2


def steiner_tree(graph, truss_index, query):
    """Tree spanning the query drugs under truss distance.

    Disconnected queries fall back to one tree per component and set the
    multi_component flag.
    """
    query = sorted(set(query))
    if not query:
        raise ConfigError("query must be non-empty")
    weights = _truss_weights(graph, truss_index)
    groups = {}
    for q in query:
        comp = frozenset(graph.component_of(q))
        groups.setdefault(comp, []).append(q)
    nodes, edges = set(), set()
    for comp, terms in sorted(groups.items(), key=lambda kv: min(kv[1])):
        sub_nodes, sub_edges = _steiner_component(graph, weights, terms)
        nodes |= sub_nodes
        edges |= sub_edges
    return SteinerTree(nodes, edges, multi_component=len(groups) > 1)


@dataclass
class ExplanationSubgraph:
    nodes: list  # drug ids
    suggested: list  # query drug ids present
    edges: list  # (u, v, sign, truss)
    p: int
    diameter: int
    ss: float = None
    multi_component: bool = False

    def to_json(self, drug_names=None):
        names = drug_names or {}
        return {
            "nodes": [
                {
                    "id": int(n),
                    "name": names.get(n, f"drug-{n}"),
                    "suggested": n in set(self.suggested),
                }
                for n in self.nodes
            ],
            "edges": [
                {"u": int(u), "v": int(v), "sign": int(s), "truss": int(t)}
                for u, v, s, t in self.edges
            ],
            "p": int(self.p),
            "diameter": int(self.diameter),
            "ss": self.ss,
            "multi_component": self.multi_component,
        }


def _max_connected_truss(graph, query):
    """Largest p with the query connected inside the p-truss of ``graph``;
    returns (p, node set of that component restricted to p-truss edges)."""
    index = truss_decomposition(graph)
    query = sorted(set(query))
    best = None
    for p in range(index.max_p, 1, -1):
        edges = [e for e, t in index.truss.items() if t >= p]
        sub = SimpleGraph(edges=edges, nodes=query)
        comp = sub.component_of(query[0])
        if all(q in comp for q in query):
            best = (p, comp, sub.subgraph(comp))
            break
    if best is None:
        # no edges at all: the query nodes alone
        return 2, set(query), SimpleGraph(nodes=query)
    return best


def _query_distance(graph, query):
    """(per-node max distance to the query, overall max)."""
    dists = []
    for q in query:
        dists.append(graph.bfs_distances(q))
    per_node = {}
    for n in graph.nodes:
        per_node[n] = max(d.get(n, float("inf")) for d in dists)
    overall = max(per_node.values(), default=0)
    return per_node, overall


def _maintain_truss(graph, p, query):
    """Drop edges under the support bound and keep the query's component.
    Returns None when the query is no longer intact and connected."""
    g = graph.subgraph(graph.nodes)
    changed = True
    while changed:
        changed = False
        for u, v in g.edges():
            if len(g.adj[u] & g.adj[v]) < p - 2:
                g.adj[u].discard(v)
                g.adj[v].discard(u)
                changed = True
    query = sorted(set(query))
    comp = g.component_of(query[0])
    if not all(q in comp for q in query):
        return None
    g = g.subgraph(comp)
    drop = [n for n in g.nodes if not g.adj[n] and n not in query]
    for n in drop:
        del g.adj[n]
    if len(g.nodes) > 1 and any(not g.adj[q] for q in query):
        return None
    return g


def closest_truss_community(graph, truss_index, query, n0=None):
    """Densest low-diameter subgraph containing all query drugs.

    Seeds with the Steiner tree, expands along edges at least as dense,
    finds the best connected truss level, then shrinks away the nodes
    furthest from the query while the truss property holds.
    """
    query = sorted(set(query))
    if not query:
        raise ConfigError("query must be non-empty")
    comps = [graph.component_of(query[0])]
    missing = [q for q in query if q not in comps[0]]
    if missing:
        groups = {}
        for q in query:
            groups.setdefault(frozenset(graph.component_of(q)), []).append(q)
        raise DisconnectedQueryError(list(groups.values()))
    if n0 is None:
        n0 = max(4 * len(query), 30)

    tree = steiner_tree(graph, truss_index, query)
    nodes = set(tree.nodes)
    if tree.edges:
        p_seed = min(truss_index.of(u, v) for u, v in tree.edges)
    else:
        incident = [
            truss_index.of(query[0], w) for w in graph.adj.get(query[0], ())
        ]
        p_seed = max(incident, default=2)

    # expansion by adjacent edges with truss >= p_seed, up to n0 nodes
    grown = True
    while grown and len(nodes) < n0:
        grown = False
        for u, v in graph.edges():
            if truss_index.truss[(u, v)] < p_seed:
                continue
            if (u in nodes) != (v in nodes):
                nodes.add(u)
                nodes.add(v)
                grown = True
                if len(nodes) >= n0:
                    break
    expansion = SimpleGraph(nodes=nodes)
    for u, v in graph.edges():
        if u in nodes and v in nodes and truss_index.truss[(u, v)] >= p_seed:
            expansion.add_edge(u, v)
    for u, v in tree.edges:
        expansion.add_edge(u, v)

    p, _, current = _max_connected_truss(expansion, query)

    iterates = []
    while current is not None:
        per_node, overall = _query_distance(current, query)
        diam = current.diameter()
        iterates.append((overall, diam, current))
        furthest = sorted(
            n for n, d in per_node.items() if d == overall and n not in query
        )
        if not furthest or overall == 0:
            break
        shrunk = current.subgraph(set(current.nodes) - set(furthest))
        current = _maintain_truss(shrunk, p, query)

    best = min(iterates, key=lambda it: (it[0], it[1]))
    _, diam, g = best
    return _as_explanation(g, query, p, diam)


def _as_explanation(g, query, p, diam, ddi_graph=None, multi=False):
    edges = []
    for u, v in g.edges():
        sign = ddi_graph.sign_of(u, v) if ddi_graph is not None else 0
        edges.append((u, v, sign, 0))
    return ExplanationSubgraph(
        nodes=sorted(g.nodes),
        suggested=sorted(set(query) & set(g.nodes)),
        edges=edges,
        p=p,
        diameter=diam,
        multi_component=multi,
    )


def suggestion_satisfaction(subgraph, suggested, alpha=0.5):
    """Balance of internal synergy against external antagonism.

    First term rewards synergistic and penalizes antagonistic edges
    among the suggested drugs; second rewards antagonistic edges from
    suggested to non-suggested drugs in the subgraph.
    """
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie strictly inside (0, 1)")
    suggested = set(suggested)
    k = len(suggested)
    if k < 2:
        raise ConfigError("need at least two suggested drugs")
    n_prime = len(subgraph.nodes)
    r_in_pos = r_in_neg = r_out_neg = 0
    for u, v, sign, _ in subgraph.edges:
        inside = u in suggested and v in suggested
        crossing = (u in suggested) != (v in suggested)
        if inside and sign == 1:
            r_in_pos += 1
        elif inside and sign == -1:
            r_in_neg += 1
        elif crossing and sign == -1:
            r_out_neg += 1
    first = 2.0 * (r_in_pos + 1) / ((r_in_neg + 1) * (k * (k - 1) + 2))
    if n_prime > k:
        second = r_out_neg / (k * (n_prime - k))
    else:
        second = 0.0
    return alpha * first + (1 - alpha) * second


def explain_suggestion(ddi_graph, query, alpha=0.5, n0=None):
    """Tolerant explanation for an arbitrary suggested set.

    Queries spanning several components get one community per component,
    merged into a single annotated subgraph with the multi_component flag.
    """
    query = sorted(set(query))
    for q in query:
        if not 0 <= q < ddi_graph.n_drugs:
            raise ConfigError(f"unknown drug id {q}")
    g = graph_from_ddi(ddi_graph)
    index = truss_decomposition(g)
    groups = {}
    for q in query:
        groups.setdefault(frozenset(g.component_of(q)), []).append(q)
    nodes, edge_set = set(), set()
    p_overall = None
    for comp, terms in sorted(groups.items(), key=lambda kv: min(kv[1])):
        if len(comp) == 1:
            nodes |= set(terms)
            continue
        sub = closest_truss_community(g, index, terms, n0=n0)
        nodes |= set(sub.nodes)
        edge_set |= {(u, v) for u, v, _, _ in sub.edges}
        p_overall = sub.p if p_overall is None else min(p_overall, sub.p)
    merged = SimpleGraph(edges=edge_set, nodes=nodes | set(query))
    edges = []
    for u, v in merged.edges():
        sign = ddi_graph.sign_of(u, v) or 0
        edges.append((u, v, sign, index.truss.get(_ekey(u, v), 2)))
    result = ExplanationSubgraph(
        nodes=sorted(merged.nodes),
        suggested=query,
        edges=edges,
        p=p_overall if p_overall is not None else 2,
        diameter=merged.diameter(),
        multi_component=len(groups) > 1,
    )
    if len(query) >= 2:
        result.ss = suggestion_satisfaction(result, query, alpha)
    return result
