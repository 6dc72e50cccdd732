import itertools

import numpy as np
import pytest

from hincrec.graph import (
    ENDPOINTS,
    HinGraph,
    NodeRef,
    NodeType,
    Relation,
    SchemaViolation,
)


def test_add_node_first_index():
    g = HinGraph()
    assert g.add_node(NodeType.USER) == NodeRef(NodeType.USER, 0)


def test_add_node_dense_indexing():
    g = HinGraph()
    for _ in range(3):
        g.add_node(NodeType.CONCEPT)
    assert g.add_node(NodeType.CONCEPT) == NodeRef(NodeType.CONCEPT, 3)


def test_add_node_counters_independent_per_type():
    g = HinGraph()
    assert g.add_node(NodeType.COURSE) == NodeRef(NodeType.COURSE, 0)
    assert g.add_node(NodeType.VIDEO) == NodeRef(NodeType.VIDEO, 0)


def test_add_edge_insert():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    ks = g.add_nodes(NodeType.CONCEPT, 6)
    assert g.add_edge(u, ks[5], Relation.CLICK) is True
    assert g.degree(u, Relation.CLICK) == 1


def test_add_edge_idempotent():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    k = g.add_node(NodeType.CONCEPT)
    assert g.add_edge(u, k, Relation.CLICK) is True
    assert g.add_edge(u, k, Relation.CLICK) is False
    assert g.add_edge(k, u, Relation.CLICK) is False  # same undirected triple
    assert g.degree(u, Relation.CLICK) == 1


def test_add_edge_schema_violation():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    g.add_nodes(NodeType.VIDEO, 3)
    with pytest.raises(SchemaViolation):
        g.add_edge(u, NodeRef(NodeType.VIDEO, 2), Relation.LEARN)


def test_add_edge_unknown_node():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    with pytest.raises(ValueError):
        g.add_edge(u, NodeRef(NodeType.CONCEPT, 0), Relation.CLICK)


def test_neighbors_empty():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    assert g.neighbors(u, Relation.CLICK) == []


def test_neighbors_single():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    g.add_nodes(NodeType.COURSE, 2)
    c1 = NodeRef(NodeType.COURSE, 1)
    g.add_edge(u, c1, Relation.LEARN)
    assert g.neighbors(u, Relation.LEARN) == [c1]


def test_neighbors_sorted():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    ks = g.add_nodes(NodeType.CONCEPT, 3)
    for k in (ks[2], ks[0], ks[1]):
        g.add_edge(u, k, Relation.CLICK)
    assert g.neighbors(u, Relation.CLICK) == [ks[0], ks[1], ks[2]]


def test_symmetry_invariant():
    rng = np.random.default_rng(4)
    g = HinGraph()
    users = g.add_nodes(NodeType.USER, 5)
    concepts = g.add_nodes(NodeType.CONCEPT, 5)
    for _ in range(12):
        u = users[rng.integers(5)]
        k = concepts[rng.integers(5)]
        g.add_edge(u, k, Relation.CLICK)
    for u in users:
        for k in g.neighbors(u, Relation.CLICK):
            assert u in g.neighbors(k, Relation.CLICK)
    for k in concepts:
        for u in g.neighbors(k, Relation.CLICK):
            assert k in g.neighbors(u, Relation.CLICK)


def test_schema_closure_all_relations():
    # every relation accepts exactly its declared pair and rejects the rest
    counts = {t: 2 for t in NodeType}
    for relation, pair in ENDPOINTS.items():
        for ta, tb in itertools.product(NodeType, NodeType):
            g = HinGraph()
            for t, n in counts.items():
                g.add_nodes(t, n)
            a, b = NodeRef(ta, 0), NodeRef(tb, 1)
            if frozenset((ta, tb)) == pair:
                assert g.add_edge(a, b, relation)
            else:
                with pytest.raises(SchemaViolation):
                    g.add_edge(a, b, relation)


def test_repeated_insertion_keeps_degree_one():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    k = g.add_node(NodeType.CONCEPT)
    for _ in range(5):
        g.add_edge(u, k, Relation.CLICK)
    assert g.degree(u, Relation.CLICK) == 1
    assert g.edge_count() == 1


def test_remove_edge_roundtrip():
    g = HinGraph()
    u = g.add_node(NodeType.USER)
    k = g.add_node(NodeType.CONCEPT)
    before = g.snapshot_digest()
    g.add_edge(u, k, Relation.CLICK)
    assert g.remove_edge(u, k, Relation.CLICK) is True
    assert g.remove_edge(u, k, Relation.CLICK) is False
    assert g.snapshot_digest() == before
    assert g.neighbors(u, Relation.CLICK) == []


class TestDigest:
    def test_empty_graph_stable(self):
        assert HinGraph().snapshot_digest() == HinGraph().snapshot_digest()

    def test_extra_edge_differs(self):
        # independent oracle: construct both graphs explicitly and compare
        def build(extra):
            g = HinGraph()
            u = g.add_node(NodeType.USER)
            ks = g.add_nodes(NodeType.CONCEPT, 2)
            g.add_edge(u, ks[0], Relation.CLICK)
            if extra:
                g.add_edge(u, ks[1], Relation.CLICK)
            return g

        assert build(False).snapshot_digest() != build(True).snapshot_digest()

    def test_insertion_order_invariant(self):
        edges = [
            (NodeRef(NodeType.USER, 0), NodeRef(NodeType.CONCEPT, 1), Relation.CLICK),
            (NodeRef(NodeType.USER, 1), NodeRef(NodeType.CONCEPT, 0), Relation.CLICK),
            (NodeRef(NodeType.USER, 0), NodeRef(NodeType.COURSE, 0), Relation.LEARN),
            (NodeRef(NodeType.COURSE, 0), NodeRef(NodeType.CONCEPT, 1), Relation.COVERS),
        ]
        digests = set()
        for perm in itertools.permutations(edges):
            g = HinGraph()
            g.add_nodes(NodeType.USER, 2)
            g.add_nodes(NodeType.COURSE, 1)
            g.add_nodes(NodeType.CONCEPT, 2)
            for a, b, rel in perm:
                g.add_edge(a, b, rel)
            digests.add(g.snapshot_digest())
        assert len(digests) == 1

    def test_digest_fits_64_bits(self):
        assert 0 <= HinGraph().snapshot_digest() < 2**64
