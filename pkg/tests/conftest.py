import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multiva.topology import AsRelationshipGraph, Relation


def make_graph(p2c=(), p2p=(), extra=()):
    """Build a graph from (provider, customer) and (peer, peer) pairs."""
    edges = {}
    for a, b in p2c:
        edges[(a, b)] = Relation.PROVIDER_TO_CUSTOMER
    for a, b in p2p:
        edges[(min(a, b), max(a, b))] = Relation.PEER_TO_PEER
    return AsRelationshipGraph(edges, extra_nodes=extra)


@pytest.fixture
def small_graph():
    # 1 and 2 are tier-1 peers; 3..6 hang off them; 5-6 peer at the edge
    return make_graph(
        p2c=[(1, 3), (1, 4), (2, 4), (2, 5), (3, 6), (4, 6)],
        p2p=[(1, 2), (5, 6)],
    )
