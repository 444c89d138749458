import random

import pytest

from evenlog.crypto import StaticKeyProvider
from evenlog.quorum import Registry, Replica

MASTER = b"unit-test-master-secret-32-bytes"


def pad4(data: bytes) -> bytes:
    """Payloads come back from recovery padded to a multiple of 4."""
    return data + b"\x00" * ((-len(data)) % 4)


@pytest.fixture
def key():
    return StaticKeyProvider(MASTER).get("default")


@pytest.fixture
def rng():
    return random.Random(1234)


def build_cluster(n_replicas: int, client_id: str = "client-0", t: float = 0):
    """Registry plus n live replicas, all freshly registered."""
    registry = Registry()
    replicas = {rid: Replica(rid) for rid in range(n_replicas)}
    for rid in replicas:
        registry.register(rid, t)
    registry.register(client_id, t)
    return registry, replicas
