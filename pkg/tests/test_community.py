import itertools

import networkx as nx
import numpy as np
import pytest

from medrec.community import (
    ExplanationSubgraph,
    SimpleGraph,
    _max_connected_truss,
    closest_truss_community,
    explain_suggestion,
    graph_from_ddi,
    steiner_tree,
    suggestion_satisfaction,
    truss_decomposition,
)
from medrec.errors import ConfigError, DisconnectedQueryError

from conftest import make_graph


def _random_graph(rng, n, p):
    g = SimpleGraph(nodes=range(n))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                g.add_edge(u, v)
    return g


def _nx_truss_numbers(g):
    """Independent oracle: truss number = max k with the edge in nx.k_truss."""
    G = nx.Graph()
    G.add_nodes_from(g.nodes)
    G.add_edges_from(g.edges())
    out = {}
    for e in g.edges():
        k = 2
        while True:
            sub = nx.k_truss(G, k + 1)
            if not sub.has_edge(*e):
                break
            k += 1
        out[e] = k
    return out


# ---------------------------------------------------------------------
# truss decomposition
# ---------------------------------------------------------------------


def test_truss_triangle():
    g = SimpleGraph(edges=[(0, 1), (1, 2), (0, 2)])
    idx = truss_decomposition(g)
    assert all(t == 3 for t in idx.truss.values())


def test_truss_k4():
    g = SimpleGraph(edges=itertools.combinations(range(4), 2))
    idx = truss_decomposition(g)
    assert all(t == 4 for t in idx.truss.values())


def test_truss_path_is_2():
    g = SimpleGraph(edges=[(0, 1), (1, 2), (2, 3)])
    idx = truss_decomposition(g)
    assert all(t == 2 for t in idx.truss.values())


def test_truss_oracle_100_random_graphs():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 21))
        g = _random_graph(rng, n, float(rng.uniform(0.1, 0.6)))
        got = truss_decomposition(g).truss
        want = _nx_truss_numbers(g)
        assert got == want, f"seed {seed}"


# ---------------------------------------------------------------------
# Steiner tree
# ---------------------------------------------------------------------


def test_steiner_adjacent_pair():
    g = SimpleGraph(edges=[(0, 1), (1, 2)])
    idx = truss_decomposition(g)
    tree = steiner_tree(g, idx, [0, 1])
    assert tree.edges == {(0, 1)}


def test_steiner_path_endpoints():
    g = SimpleGraph(edges=[(0, 1), (1, 2)])
    idx = truss_decomposition(g)
    tree = steiner_tree(g, idx, [0, 2])
    assert tree.edges == {(0, 1), (1, 2)}
    assert tree.nodes == {0, 1, 2}


def _exhaustive_steiner(g, weights, terminals):
    """Optimal Steiner tree weight by enumerating node subsets."""
    nodes = set(g.nodes)
    extra = sorted(nodes - set(terminals))
    best = np.inf
    for r in range(len(extra) + 1):
        for subset in itertools.combinations(extra, r):
            keep = set(terminals) | set(subset)
            sub = g.subgraph(keep)
            if any(q not in sub.component_of(terminals[0]) for q in terminals):
                continue
            # minimum spanning tree weight over `keep`
            edges = sorted((weights[e], e) for e in sub.edges())
            parent = {v: v for v in keep}

            def find(v):
                while parent[v] != v:
                    parent[v] = parent[parent[v]]
                    v = parent[v]
                return v

            total, used = 0.0, 0
            for w, (u, v) in edges:
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
                    total += w
                    used += 1
            if used == len(keep) - 1:
                best = min(best, total)
    return best


def test_steiner_within_2x_of_optimal():
    rng = np.random.default_rng(7)
    g = _random_graph(rng, 12, 0.3)
    comp = max(g.components(), key=len)
    terminals = sorted(comp)[:3]
    idx = truss_decomposition(g)
    from medrec.community import _truss_weights

    weights = _truss_weights(g, idx)
    tree = steiner_tree(g, idx, terminals)
    got = tree.weight(weights)
    opt = _exhaustive_steiner(g, weights, terminals)
    assert got <= 2 * opt + 1e-9
    # and it actually spans the terminals
    span = SimpleGraph(edges=tree.edges, nodes=tree.nodes)
    assert all(q in span.component_of(terminals[0]) for q in terminals)


def test_steiner_disconnected_query_flag():
    g = SimpleGraph(edges=[(0, 1), (2, 3)])
    idx = truss_decomposition(g)
    tree = steiner_tree(g, idx, [0, 3])
    assert tree.multi_component
    assert tree.edges == set()


def test_steiner_empty_query():
    g = SimpleGraph(edges=[(0, 1)])
    with pytest.raises(ConfigError):
        steiner_tree(g, truss_decomposition(g), [])


# ---------------------------------------------------------------------
# closest truss community
# ---------------------------------------------------------------------


def _exhaustive_best_p(g, query):
    """Largest p with the query connected inside the p-truss, by naive
    fixpoint peeling (the p-truss of the whole graph contains the p-truss
    of every subgraph, so checking the full graph suffices)."""
    for p in range(len(g.nodes) + 2, 1, -1):
        adj = {n: set(nbrs) for n, nbrs in g.adj.items()}
        changed = True
        while changed:
            changed = False
            for u in list(adj):
                for v in list(adj[u]):
                    if u < v and len(adj[u] & adj[v]) < p - 2:
                        adj[u].discard(v)
                        adj[v].discard(u)
                        changed = True
        # connectivity of the query over surviving edges
        seen = {query[0]}
        stack = [query[0]]
        while stack:
            n = stack.pop()
            for w in adj.get(n, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if all(q in seen for q in query):
            return p
    return 2


def test_ctc_isolated_k4():
    g = SimpleGraph(edges=itertools.combinations(range(4), 2))
    g.adj.setdefault(9, set())  # unrelated isolated node
    idx = truss_decomposition(g)
    sub = closest_truss_community(g, idx, [0, 1, 2, 3])
    assert set(sub.nodes) == {0, 1, 2, 3}
    assert sub.p == 4


def test_ctc_pendant_path_excluded():
    edges = list(itertools.combinations(range(4), 2)) + [(3, 4), (4, 5), (5, 6)]
    g = SimpleGraph(edges=edges)
    idx = truss_decomposition(g)
    sub = closest_truss_community(g, idx, [0, 1])
    assert set(sub.nodes) <= {0, 1, 2, 3}
    assert sub.p == 4


def test_ctc_disconnected_query_error():
    g = SimpleGraph(edges=[(0, 1), (2, 3)])
    idx = truss_decomposition(g)
    with pytest.raises(DisconnectedQueryError):
        closest_truss_community(g, idx, [0, 2])


def test_ctc_p_matches_exhaustive_small_graphs():
    checked = 0
    for seed in range(60):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(4, 10))
        g = _random_graph(rng, n, float(rng.uniform(0.25, 0.7)))
        comp = max(g.components(), key=len)
        if len(comp) < 3:
            continue
        comp = sorted(comp)
        k = int(rng.integers(2, min(4, len(comp)) + 1))
        query = sorted(rng.choice(comp, size=k, replace=False).tolist())
        idx = truss_decomposition(g)
        sub = closest_truss_community(g, idx, query)
        want = _exhaustive_best_p(g, query)
        assert sub.p == want, f"seed {seed}: got {sub.p}, want {want}"
        assert set(query) <= set(sub.nodes)
        checked += 1
    assert checked >= 40


def test_max_connected_truss_keeps_query():
    g = SimpleGraph(edges=[(0, 1), (1, 2), (0, 2), (2, 3)])
    p, comp, sub = _max_connected_truss(g, [0, 3])
    assert {0, 3} <= comp
    assert p == 2


# ---------------------------------------------------------------------
# suggestion satisfaction
# ---------------------------------------------------------------------


def _sub(nodes, suggested, edges):
    return ExplanationSubgraph(
        nodes=list(nodes), suggested=list(suggested),
        edges=[(u, v, s, 2) for u, v, s in edges], p=2, diameter=1,
    )


def test_ss_hand_case_075():
    # k=2, n'=3, one synergy edge inside, one antagonism edge out
    sub = _sub([0, 1, 2], [0, 1], [(0, 1, 1), (1, 2, -1)])
    assert suggestion_satisfaction(sub, [0, 1], alpha=0.5) == pytest.approx(0.75)


def test_ss_hand_case_025():
    # k=2, n'=3, no edges at all
    sub = _sub([0, 1, 2], [0, 1], [])
    assert suggestion_satisfaction(sub, [0, 1], alpha=0.5) == pytest.approx(0.25)


def test_ss_alpha_limit_internal_only():
    with_out = _sub([0, 1, 2], [0, 1], [(0, 1, 1), (1, 2, -1)])
    without_out = _sub([0, 1, 2], [0, 1], [(0, 1, 1)])
    a = 1 - 1e-9
    assert suggestion_satisfaction(with_out, [0, 1], a) == pytest.approx(
        suggestion_satisfaction(without_out, [0, 1], a), abs=1e-6
    )


def test_ss_n_equals_k_guard():
    sub = _sub([0, 1], [0, 1], [(0, 1, 1)])
    val = suggestion_satisfaction(sub, [0, 1], alpha=0.5)
    assert np.isfinite(val)
    assert val == pytest.approx(0.5 * 4 / 4)


def test_ss_validation():
    sub = _sub([0, 1, 2], [0, 1], [])
    with pytest.raises(ConfigError):
        suggestion_satisfaction(sub, [0], alpha=0.5)
    with pytest.raises(ConfigError):
        suggestion_satisfaction(sub, [0, 1], alpha=0.0)


def test_ss_monotonicity_1000_perturbations():
    # adding a synergy edge inside the suggested set never lowers SS;
    # adding an antagonism edge inside never raises it; adding an
    # antagonism edge crossing out never lowers it
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(4, 9))
        k = int(rng.integers(2, n))
        suggested = list(range(k))
        pairs = list(itertools.combinations(range(n), 2))
        edges = []
        for u, v in pairs:
            r = rng.random()
            if r < 0.3:
                edges.append((u, v, 1))
            elif r < 0.6:
                edges.append((u, v, -1))
        sub = _sub(range(n), suggested, edges)
        alpha = float(rng.uniform(0.05, 0.95))
        base = suggestion_satisfaction(sub, suggested, alpha)

        present = {(u, v) for u, v, _ in edges}
        free = [p for p in pairs if p not in present]
        if not free:
            continue
        u, v = free[int(rng.integers(len(free)))]
        inside = u < k and v < k
        crossing = (u < k) != (v < k)
        for sign in (1, -1):
            new = _sub(range(n), suggested, edges + [(u, v, sign)])
            val = suggestion_satisfaction(new, suggested, alpha)
            if inside and sign == 1:
                assert val >= base - 1e-12
            elif inside and sign == -1:
                assert val <= base + 1e-12
            elif crossing and sign == -1:
                assert val >= base - 1e-12
            else:
                assert val == pytest.approx(base)


# ---------------------------------------------------------------------
# explain_suggestion on a DdiGraph
# ---------------------------------------------------------------------


def test_explain_two_connected_drugs():
    g = make_graph(4, [(0, 1, 1), (1, 2, -1)])
    sub = explain_suggestion(g, [0, 1])
    assert sub.p >= 2
    assert sub.ss is not None
    data = sub.to_json({d.id: d.name for d in g.drugs})
    assert {n["id"] for n in data["nodes"]} >= {0, 1}
    suggested = [n for n in data["nodes"] if n["suggested"]]
    assert {n["id"] for n in suggested} == {0, 1}


def test_explain_multi_component_query_tolerated():
    g = make_graph(5, [(0, 1, 1), (2, 3, -1)])
    sub = explain_suggestion(g, [0, 2])
    assert sub.multi_component
    assert set(sub.suggested) == {0, 2}
    assert sub.ss is not None


def test_explain_edges_carry_signs_and_truss():
    g = make_graph(3, [(0, 1, 1), (1, 2, -1), (0, 2, 1)])
    sub = explain_suggestion(g, [0, 1, 2])
    signs = {(u, v): s for u, v, s, _ in sub.edges}
    assert signs[(0, 1)] == 1 and signs[(1, 2)] == -1
    assert all(t == 3 for _, _, _, t in sub.edges)


def test_explain_unknown_drug():
    g = make_graph(3, [(0, 1, 1)])
    with pytest.raises(ConfigError):
        explain_suggestion(g, [0, 99])


def test_explain_ignores_zero_edges():
    g = make_graph(3, [(0, 1, 1), (1, 2, 0)])
    view = graph_from_ddi(g)
    assert not view.has_edge(1, 2)
    assert view.has_edge(0, 1)
