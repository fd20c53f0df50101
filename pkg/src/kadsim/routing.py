"""Routing tables: bucket population strategies and next-hop rules.

A table holds up to k peers per bucket, indexed 1..id_bits. Population
draws only from the owner's bootstrap knowledge set. Next-hop rules:

* xor rule: the table-wide peer closest to the target in XOR distance
  (used by vanilla, pns and kadabra tables).
* pr rule: the lowest-RTT peer inside the bucket the target falls into,
  falling back to the xor rule when that bucket is empty.

XOR distance bands nest by bucket: against a target in bucket i, peers of
bucket i are strictly closest, then all buckets above i share one band,
then buckets below i in descending order. Scans exploit that instead of
walking the whole table; equivalence with a brute-force scan is tested.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ConfigError
from .ids import NodeId, bucket_index
from .network import Topology


@dataclass(frozen=True)
class PeerRecord:
    id: NodeId
    index: int
    rtt: float


class RoutingTable:
    """Per-node k-bucket table over node indices of one topology."""

    __slots__ = ("owner_index", "owner_id", "id_bits", "k", "buckets", "topology")

    def __init__(self, topology: Topology, owner_index: int, k: int):
        if k < 1:
            raise ConfigError(f"bucket size k must be >= 1, got {k}")
        self.topology = topology
        self.owner_index = owner_index
        self.owner_id = int(topology.nodes[owner_index].id)
        self.id_bits = topology.id_bits
        self.k = k
        self.buckets: list[list[int]] = [[] for _ in range(self.id_bits)]

    def bucket_of(self, peer_index: int) -> int:
        return bucket_index(self.owner_id, int(self.topology.nodes[peer_index].id), self.id_bits)

    def rtt(self, peer_index: int) -> float:
        return self.topology.rtt(self.owner_index, peer_index)

    def peer_record(self, peer_index: int) -> PeerRecord:
        return PeerRecord(self.topology.nodes[peer_index].id, peer_index, self.rtt(peer_index))

    def all_peers(self) -> list[int]:
        return [p for bucket in self.buckets for p in bucket]

    def bucket(self, i: int) -> list[int]:
        """Bucket i, 1-based."""
        return self.buckets[i - 1]


def eligible_by_bucket(topology: Topology, owner_index: int) -> list[list[int]]:
    """The owner's known peers grouped by bucket index (1-based list-of-lists)."""
    owner_id = int(topology.nodes[owner_index].id)
    ids = topology.id_list()
    groups: list[list[int]] = [[] for _ in range(topology.id_bits)]
    for peer in topology.nodes[owner_index].known_peers:
        i = bucket_index(owner_id, ids[peer], topology.id_bits)
        groups[i - 1].append(peer)
    return groups


def populate_vanilla(topology: Topology, owner_index: int, k: int, seed_or_rng=0) -> RoutingTable:
    """Fill each bucket with a seeded uniform sample of eligible known peers."""
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else random.Random(seed_or_rng)
    table = RoutingTable(topology, owner_index, k)
    for i, group in enumerate(eligible_by_bucket(topology, owner_index)):
        if len(group) <= k:
            table.buckets[i] = list(group)
        else:
            table.buckets[i] = rng.sample(group, k)
    return table


def populate_pns(topology: Topology, owner_index: int, k: int) -> RoutingTable:
    """Fill each bucket with the k lowest-RTT eligible peers (ties by id)."""
    table = RoutingTable(topology, owner_index, k)
    ids = topology.id_list()
    for i, group in enumerate(eligible_by_bucket(topology, owner_index)):
        group.sort(key=lambda p: (topology.rtt(owner_index, p), ids[p]))
        table.buckets[i] = group[:k]
    return table


def next_hop_xor(table: RoutingTable, target: int) -> int | None:
    """Table-wide peer index minimizing XOR distance to target, or None."""
    ids = table.topology.id_list()
    target = int(target)
    if target == table.owner_id:
        raise ConfigError("next hop undefined for the owner's own id")
    i = bucket_index(table.owner_id, target, table.id_bits)
    best, best_d = None, None
    for p in table.buckets[i - 1]:
        d = ids[p] ^ target
        if best_d is None or d < best_d:
            best, best_d = p, d
    if best is not None:
        return best
    for j in range(i + 1, table.id_bits + 1):
        for p in table.buckets[j - 1]:
            d = ids[p] ^ target
            if best_d is None or d < best_d:
                best, best_d = p, d
    if best is not None:
        return best
    for j in range(i - 1, 0, -1):
        bucket = table.buckets[j - 1]
        if bucket:
            return min(bucket, key=lambda p: ids[p] ^ target)
    return None


def next_hop_pr(table: RoutingTable, target: int) -> int | None:
    """Lowest-RTT peer in the target's bucket; xor rule when it is empty."""
    target = int(target)
    if target == table.owner_id:
        raise ConfigError("next hop undefined for the owner's own id")
    i = bucket_index(table.owner_id, target, table.id_bits)
    bucket = table.buckets[i - 1]
    if bucket:
        ids = table.topology.id_list()
        return min(bucket, key=lambda p: (table.rtt(p), ids[p]))
    return next_hop_xor(table, target)


def closest_in_table(table: RoutingTable, target: int, count: int) -> list[int]:
    """The `count` table peers XOR-closest to target, ascending by distance."""
    ids = table.topology.id_list()
    target = int(target)
    ranked = sorted(table.all_peers(), key=lambda p: ids[p] ^ target)
    return ranked[:count]
