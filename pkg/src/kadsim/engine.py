"""Event-driven execution of recursive and iterative lookups.

Latency model per lookup: query forwarding costs only link latency; every
response send or relay costs the sender's upload delay delta plus link
latency. Adversarial nodes charge (multiplier - 1) * delta extra on every
send, query and response alike. A lookup is a chain (alpha chains for the
DHT application) of events ordered by a single min-heap with FIFO
tie-breaking, so identical configuration and seeds replay identically.

Every node measures, per forwarded query, the delay between the packet
leaving it and the response returning; measurements feed the per-bucket
learners (kadabra) or plain epoch trackers (static strategies).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from heapq import heappop, heappush

from .errors import ConfigError
from .ids import bucket_index
from .kadabra import (
    BucketLearner,
    EpochTracker,
    LearnerParams,
    initial_delta,
    rho_for_bucket,
)
from .network import Topology
from .routing import populate_pns, populate_vanilla

STRATEGIES = ("vanilla", "pr", "pns", "kadabra")
APPS = ("kbr", "dht")
MODES = ("recursive", "iterative")


@dataclass
class PathTrace:
    hops: list | None        # [(node, query arrival time), ...] when collected
    completion: float        # response arrival time back at the source
    success: bool
    hop_count: int
    terminator: int


@dataclass
class LookupResult:
    source: int
    target: int
    app: str
    mode: str
    latency: float
    success: bool
    hops: int                # forward hops on the path that set the latency
    paths: list


class Simulation:
    """One strategy over one topology; single-threaded and seed-determined."""

    def __init__(
        self,
        topology: Topology,
        strategy: str,
        k: int = 16,
        app: str = "kbr",
        mode: str = "recursive",
        alpha: int | None = None,
        table_seed: int = 0,
        sim_seed: int = 0,
        learner: LearnerParams | None = None,
        rho_by_node: list | None = None,
        track_epochs: bool = True,
    ):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}, pick one of {STRATEGIES}")
        if app not in APPS:
            raise ConfigError(f"unknown app {app!r}, pick one of {APPS}")
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}, pick one of {MODES}")
        self.topology = topology
        self.strategy = strategy
        self.app = app
        self.mode = mode
        self.alpha = alpha if alpha is not None else (1 if app == "kbr" else 2)
        if self.alpha < 1:
            raise ConfigError("alpha must be >= 1")
        if app == "kbr" and self.alpha != 1:
            raise ConfigError("key-based routing uses a single path (alpha=1)")
        self.k = k
        self.learner_params = learner or LearnerParams()

        n = len(topology)
        self.n = n
        self.nbits = topology.id_bits
        self.ids = topology.id_list()
        self.lat = topology.latency.tolist()
        self.deltas = [node.delta for node in topology.nodes]
        self.adv = [node.adversarial for node in topology.nodes]
        self.mult = topology.adversary_multiplier
        self.any_adv = any(self.adv)
        self.noise_amp = topology.delta_noise_amplitude
        noise_seed = topology.delta_noise_seed
        self.noise_rng = random.Random(noise_seed if noise_seed is not None else sim_seed ^ 0x5EED)
        self.rng = random.Random(sim_seed)

        # tables: pns fills by RTT, everything else randomly; kadabra starts
        # random and reshapes online
        table_rng = random.Random(table_seed)
        if strategy == "pns":
            self.tables = [populate_pns(topology, i, k) for i in range(n)]
        else:
            self.tables = [populate_vanilla(topology, i, k, table_rng) for i in range(n)]
        self.buckets_by_node = [t.buckets for t in self.tables]

        # knowledge sets grow as nodes hear from each other
        self.known_sets = [set(node.known_peers) for node in topology.nodes]
        self.known_by_bucket = [self._group_known(i) for i in range(n)]

        # pr picks the lowest-RTT peer of the target's bucket; its tables are
        # static, so the choice per (node, bucket) is precomputed
        self.pr_choice: list[list[int]] | None = None
        if strategy == "pr":
            self.pr_choice = []
            for i in range(n):
                row = []
                lat_row = self.lat[i]
                for bucket in self.buckets_by_node[i]:
                    row.append(min(bucket, key=lambda p: (lat_row[p], self.ids[p])) if bucket else -1)
                self.pr_choice.append(row)

        self.store: list[set] = [set() for _ in range(n)]
        self.storage_map: dict[int, list[int]] = {}

        # per (node, bucket) measurement consumers
        self.epoch_rows: list[dict] = []
        self.explorations: list[tuple] = []
        self.meters: list[list] = []
        params = self.learner_params
        if strategy == "kadabra":
            delta0 = initial_delta(topology.diameter_latency)
            if rho_by_node is not None and len(rho_by_node) != n:
                raise ConfigError("rho_by_node must give one value per node")
            for i in range(n):
                lat_row = self.lat[i]
                row = [
                    BucketLearner(
                        i, bi, self.buckets_by_node[i][bi - 1], self.ids, lat_row,
                        rho_by_node[i] if rho_by_node is not None
                        else rho_for_bucket(params.rho_vector, bi),
                        delta0,
                        b=params.b, margin=params.margin, smoothing=params.smoothing,
                        explore_count=params.explore_count,
                    )
                    for bi in range(1, self.nbits + 1)
                ]
                self.meters.append(row)
        elif track_epochs:
            for i in range(n):
                self.meters.append([EpochTracker(i, bi, b=params.b) for bi in range(1, self.nbits + 1)])
        self.track = bool(self.meters)

    # -- setup helpers ------------------------------------------------------

    def _group_known(self, owner: int) -> list[list[int]]:
        owner_id = self.ids[owner]
        groups: list[list[int]] = [[] for _ in range(self.nbits)]
        for peer in self.topology.nodes[owner].known_peers:
            d = owner_id ^ self.ids[peer]
            groups[self.nbits - d.bit_length()].append(peer)
        return groups

    def store_replicated(self, keys, replicas: int = 3) -> dict[int, list[int]]:
        """Place each key at the `replicas` globally XOR-closest nodes."""
        if replicas < 1 or replicas > self.n:
            raise ConfigError(f"replicas must be within 1..{self.n}")
        order = list(range(self.n))
        for key in keys:
            key = int(key)
            order.sort(key=lambda i: self.ids[i] ^ key)
            holders = order[:replicas]
            for h in holders:
                self.store[h].add(key)
            self.storage_map[key] = list(holders)
        return self.storage_map

    # -- measurement plumbing -------------------------------------------------

    def _learn(self, receiver: int, sender: int) -> None:
        known = self.known_sets[receiver]
        if sender in known or sender == receiver:
            return
        known.add(sender)
        d = self.ids[receiver] ^ self.ids[sender]
        self.known_by_bucket[receiver][self.nbits - d.bit_length()].append(sender)

    def _record(self, node: int, bucket_idx: int, qid: int, peer: int, delay: float) -> None:
        meter = self.meters[node][bucket_idx - 1]
        if meter.record(qid, peer, delay):
            row = meter.decide(self.known_by_bucket[node][bucket_idx - 1], self.rng)
            self.epoch_rows.append(row)
            if row["added"]:
                lat_row = self.lat[node]
                rho = getattr(meter, "rho", 0.0)
                for p in row["added"]:
                    self.explorations.append((node, bucket_idx, row["epoch"], p, 2.0 * lat_row[p], rho))

    def epochs_of(self, node: int, bucket_idx: int) -> int:
        if not self.track:
            return 0
        return self.meters[node][bucket_idx - 1].epoch

    # -- delays ----------------------------------------------------------------

    def _delta_draw(self, node: int) -> float:
        d = self.deltas[node]
        if self.noise_amp:
            d *= 1.0 + self.noise_rng.uniform(-self.noise_amp, self.noise_amp)
        return d

    def _fwd_delay(self, node: int) -> float:
        if self.any_adv and self.adv[node]:
            return (self.mult - 1.0) * self._delta_draw(node)
        return 0.0

    def _resp_delay(self, node: int) -> float:
        d = self._delta_draw(node)
        if self.any_adv and self.adv[node]:
            return self.mult * d
        return d

    # -- next-hop rules ----------------------------------------------------------

    def _next_hop(self, node: int, key: int):
        """(peer, bucket_idx) by the node's rule, or None to terminate.

        XOR distance bands make the target's bucket strictly closest when
        non-empty; otherwise only higher buckets can hold a strictly closer
        peer. PR swaps the in-bucket choice for the lowest-RTT peer.
        """
        ids = self.ids
        nid = ids[node]
        if nid == key:
            return None  # exact hit, nothing can be strictly closer
        i = self.nbits - (nid ^ key).bit_length() + 1
        if self.pr_choice is not None:
            p = self.pr_choice[node][i - 1]
            if p >= 0:
                return p, i
        else:
            bucket = self.buckets_by_node[node][i - 1]
            if bucket:
                best = bucket[0]
                bd = ids[best] ^ key
                for p in bucket:
                    d = ids[p] ^ key
                    if d < bd:
                        bd = d
                        best = p
                return best, i
        best = -1
        bd = nid ^ key  # must be strictly closer than the owner
        bi = -1
        buckets = self.buckets_by_node[node]
        for j in range(i, self.nbits):
            for p in buckets[j]:
                d = ids[p] ^ key
                if d < bd:
                    bd = d
                    best = p
                    bi = j + 1
        if best >= 0:
            return best, bi
        return None

    def _dispatch_peers(self, source: int, key: int) -> list:
        """Up to alpha distinct XOR-closest table peers strictly closer than
        the source, ascending by distance."""
        ids = self.ids
        own_d = ids[source] ^ key
        if own_d == 0:
            return []
        i = self.nbits - own_d.bit_length() + 1
        buckets = self.buckets_by_node[source]
        ranked = sorted((ids[p] ^ key, p) for p in buckets[i - 1])
        if len(ranked) < self.alpha:
            pool = []
            for j in range(i, self.nbits):
                for p in buckets[j]:
                    d = ids[p] ^ key
                    if d < own_d:
                        pool.append((d, p))
            ranked.extend(sorted(pool))
        return [(p, self.nbits - (ids[p] ^ ids[source]).bit_length() + 1)
                for _, p in ranked[: self.alpha]]

    # -- lookups -----------------------------------------------------------------

    def lookup(self, source: int, key: int, qid: int = 0, collect_paths: bool = True) -> LookupResult:
        """Run one lookup to completion and return the full result."""
        if not 0 <= source < self.n:
            raise ConfigError(f"source index {source} out of range")
        key = int(key)
        if not 0 <= key < (1 << self.nbits):
            raise ConfigError(f"key {key} outside the id space")
        if key == self.ids[source] and self.app == "kbr":
            raise ConfigError("kbr target must differ from the source id")
        latency, success, hops, paths = self._exec(source, key, qid, collect_paths)
        return LookupResult(source, key, self.app, self.mode, latency, success, hops, paths)

    def run_query(self, source: int, key: int, qid: int):
        """Fast path for the round loop: (latency, success, hops)."""
        latency, success, hops, _ = self._exec(source, key, qid, False)
        return latency, success, hops

    def _exec(self, source: int, key: int, qid: int, collect: bool):
        if self.app == "dht" and key in self.store[source]:
            return 0.0, True, 0, [PathTrace([] if collect else None, 0.0, True, 0, source)]
        first = self._dispatch_peers(source, key)
        if not first:
            success = self.app == "kbr"
            return 0.0, success, 0, [PathTrace([] if collect else None, 0.0, success, 0, source)]
        if self.mode == "recursive":
            paths = self._run_recursive(source, key, qid, first, collect)
        else:
            paths = self._run_iterative(source, key, qid, first, collect)
        winner = None
        for tr in paths:
            if tr.success and (winner is None or tr.completion < winner.completion):
                winner = tr
        success = winner is not None
        if winner is None:
            winner = min(paths, key=lambda tr: tr.completion)
        return winner.completion, success, winner.hop_count, paths

    def _run_recursive(self, source: int, key: int, qid: int, first, collect: bool):
        ids = self.ids
        lat = self.lat
        dht = self.app == "dht"
        store = self.store
        track = self.track
        heap = []
        seq = 0
        stacks = []
        hops = [0] * len(first)
        traces = [[] if collect else None for _ in first]
        done: list = [None] * len(first)
        for pi, (peer, bi) in enumerate(first):
            t_dep = self._fwd_delay(source) if self.any_adv else 0.0
            stacks.append([(source, peer, bi, t_dep)])
            heappush(heap, (t_dep + lat[source][peer], seq, 0, peer, pi))
            seq += 1
        while heap:
            t, _, kind, node, pi = heappop(heap)
            if kind == 0:  # query arrives at node
                hops[pi] += 1
                if collect:
                    traces[pi].append((node, t))
                self._learn(node, stacks[pi][-1][0])
                if dht and key in store[node]:
                    done[pi] = (True, node)
                    nxt = None
                else:
                    nxt = self._next_hop(node, key)
                    if nxt is not None and (ids[nxt[0]] ^ key) >= (ids[node] ^ key):
                        nxt = None  # guarded: bucket invariant makes this unreachable
                if nxt is None:
                    if done[pi] is None:
                        done[pi] = (not dht, node)
                    heappush(heap, (t + self._resp_delay(node) + lat[node][stacks[pi][-1][0]], seq, 1, stacks[pi][-1][0], pi))
                    seq += 1
                else:
                    peer, bi = nxt
                    t_dep = t + self._fwd_delay(node) if self.any_adv else t
                    stacks[pi].append((node, peer, bi, t_dep))
                    heappush(heap, (t_dep + lat[node][peer], seq, 0, peer, pi))
                    seq += 1
            else:  # response arrives back at node
                here, peer, bi, t_dep = stacks[pi].pop()
                if track:
                    self._record(here, bi, qid, peer, t - t_dep)
                if stacks[pi]:
                    heappush(heap, (t + self._resp_delay(here) + lat[here][stacks[pi][-1][0]], seq, 1, stacks[pi][-1][0], pi))
                    seq += 1
                else:
                    ok, term = done[pi]
                    done[pi] = PathTrace(traces[pi], t, ok, hops[pi], term)
        return done

    def _run_iterative(self, source: int, key: int, qid: int, first, collect: bool):
        ids = self.ids
        lat = self.lat
        dht = self.app == "dht"
        heap = []
        done: list = [None] * len(first)
        hops = [0] * len(first)
        traces = [[] if collect else None for _ in first]
        for pi, (peer, bi) in enumerate(first):
            t_dep = self._fwd_delay(source) if self.any_adv else 0.0
            t_back = t_dep + lat[source][peer] + self._resp_delay(peer) + lat[peer][source]
            heappush(heap, (t_back, pi, peer, bi, t_dep))
        while heap:
            t_back, pi, contact, bi, t_dep = heappop(heap)
            hops[pi] += 1
            if collect:
                traces[pi].append((contact, t_dep + lat[source][contact]))
            if contact != source:  # a relay can point back at the initiator
                self._learn(contact, source)
                if self.track:
                    self._record(source, bi, qid, contact, t_back - t_dep)
            if dht and key in self.store[contact]:
                done[pi] = PathTrace(traces[pi], t_back, True, hops[pi], contact)
                continue
            nxt = self._next_hop(contact, key)
            if nxt is None or (ids[nxt[0]] ^ key) >= (ids[contact] ^ key):
                done[pi] = PathTrace(traces[pi], t_back, not dht, hops[pi], contact)
                continue
            peer = nxt[0]
            t_dep2 = t_back + (self._fwd_delay(source) if self.any_adv else 0.0)
            nbi = 0 if peer == source else self.nbits - (ids[source] ^ ids[peer]).bit_length() + 1
            t_back2 = t_dep2 + lat[source][peer] + self._resp_delay(peer) + lat[peer][source]
            heappush(heap, (t_back2, pi, peer, nbi, t_dep2))
        return done
