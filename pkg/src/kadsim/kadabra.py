"""Per-bucket bandit learner that reshapes routing tables from query delays.

Each (node, bucket) pair runs an independent learner. An epoch is b queries
routed via peers of that bucket. During an epoch the learner ledgers, per
query, which bucket peer carried it and the delay between forwarding the
query through that peer and receiving the response. At the epoch boundary:

* peer score:   score(u) = -sum_i d_i(u), where d_i(u) is the measured
  delay when query i went through u and a penalty Delta otherwise, so
  higher scores mean lower delay;
* bucket score: mean of its peer scores (-Delta for an empty bucket);
* on exploration epochs the worst-scoring peer is swapped for a uniform
  random known peer with RTT above the per-bucket floor rho (a Sybil guard:
  nearby identities cannot be farmed into the bucket);
* on comparison epochs the current configuration is kept only if it
  out-scored the previous epoch's configuration, else it is reverted.

Epoch kinds alternate, starting with exploration. The penalty Delta tracks
1.2x an exponential moving average of the epoch's measured delays and
starts at twice the network diameter estimate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import ConfigError

NEG_INF = float("-inf")

DEFAULT_EPOCH_QUERIES = 100
DEFAULT_DELTA_MARGIN = 1.2
DEFAULT_DELTA_SMOOTHING = 0.2
# per-bucket RTT floors for exploration on the 10km square; buckets past the
# vector get 0 (no floor)
DEFAULT_SQUARE_RHO = (400.0, 350.0, 300.0, 250.0, 200.0, 150.0, 100.0, 50.0, 0.0)


def rho_for_bucket(rho_vector, bucket_idx: int) -> float:
    """rho for a 1-based bucket index; indices past the vector get 0."""
    if bucket_idx <= len(rho_vector):
        return float(rho_vector[bucket_idx - 1])
    return 0.0


@dataclass(frozen=True)
class LearnerParams:
    """Knobs shared by every per-bucket learner in a run."""

    b: int = DEFAULT_EPOCH_QUERIES
    rho_vector: tuple = DEFAULT_SQUARE_RHO
    margin: float = DEFAULT_DELTA_MARGIN
    smoothing: float = DEFAULT_DELTA_SMOOTHING
    explore_count: int = 1


# ---------------------------------------------------------------------------
# ledger and pure scoring functions
# ---------------------------------------------------------------------------

@dataclass
class EpochLedger:
    """Traces of the current epoch: (query_id, [(peer, delay), ...])."""

    traces: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.traces)

    def record(self, query_id, peer: int, delay: float) -> None:
        """Add a measurement, merging repeat measurements of one query."""
        if delay < 0:
            raise ConfigError("delays must be non-negative")
        traces = self.traces
        if traces and traces[-1][0] == query_id:
            measurements = traces[-1][1]
            if any(p == peer for p, _ in measurements):
                return  # same (query, peer) measured twice: keep the earliest
            measurements.append((peer, delay))
        else:
            traces.append((query_id, [(peer, delay)]))


def score_peer(peer: int, ledger: EpochLedger, delta_penalty: float) -> float:
    """-sum over ledger queries of the peer's delay, penalty when unused."""
    total = 0.0
    for _, measurements in ledger.traces:
        hit = None
        for p, d in measurements:
            if p == peer:
                hit = d
                break
        total += delta_penalty if hit is None else hit
    return -total


def score_bucket(peers, ledger: EpochLedger, delta_penalty: float) -> float:
    """Mean peer score; an empty configuration scores -delta_penalty."""
    peers = list(peers)
    if not peers:
        return -float(delta_penalty)
    return sum(score_peer(p, ledger, delta_penalty) for p in peers) / len(peers)


def select_random_peer(candidates, rtt_of, rho: float, exclude, rng: random.Random):
    """Uniform choice among candidates with RTT strictly above rho.

    Returns None when no candidate qualifies. `exclude` lists peers already
    in the bucket (plus any other forbidden indices).
    """
    eligible = [c for c in candidates if c not in exclude and rtt_of(c) > rho]
    if not eligible:
        return None
    return eligible[rng.randrange(len(eligible))]


def update_delta(
    prev_ema: float | None,
    epoch_mean_latency: float,
    margin: float = DEFAULT_DELTA_MARGIN,
    smoothing: float = DEFAULT_DELTA_SMOOTHING,
) -> tuple[float, float]:
    """Fold one epoch's mean delay into the EMA; returns (ema, delta)."""
    if epoch_mean_latency < 0:
        raise ConfigError("epoch mean latency must be non-negative")
    if prev_ema is None:
        ema = float(epoch_mean_latency)
    else:
        ema = smoothing * float(epoch_mean_latency) + (1.0 - smoothing) * prev_ema
    return ema, margin * ema


def initial_delta(diameter_latency: float) -> float:
    """Penalty before any measurements: twice the network diameter estimate."""
    return 2.0 * float(diameter_latency)


# ---------------------------------------------------------------------------
# per-bucket learner state machine
# ---------------------------------------------------------------------------

class BucketLearner:
    """Owns one bucket's epoch state; mutates the live bucket list in place."""

    __slots__ = (
        "node", "bucket_idx", "bucket", "members", "ids", "lat_row",
        "rho", "b", "delta", "ema", "margin", "smoothing", "explore_count",
        "explore", "prev_config", "prev_score", "epoch", "ledger", "rejected",
    )

    def __init__(
        self,
        node: int,
        bucket_idx: int,
        bucket: list[int],
        ids: list[int],
        lat_row,
        rho: float,
        delta0: float,
        b: int = DEFAULT_EPOCH_QUERIES,
        margin: float = DEFAULT_DELTA_MARGIN,
        smoothing: float = DEFAULT_DELTA_SMOOTHING,
        explore_count: int = 1,
    ):
        if b < 1:
            raise ConfigError("epoch length b must be >= 1")
        if explore_count < 1:
            raise ConfigError("explore_count must be >= 1")
        self.node = node
        self.bucket_idx = bucket_idx
        self.bucket = bucket
        self.members = set(bucket)
        self.ids = ids
        self.lat_row = lat_row
        self.rho = float(rho)
        self.b = b
        self.delta = float(delta0)
        self.ema: float | None = None
        self.margin = margin
        self.smoothing = smoothing
        self.explore_count = explore_count
        self.explore = True  # first decision explores
        self.prev_config: list[int] = list(bucket)
        self.prev_score = NEG_INF
        self.epoch = 0
        self.ledger = EpochLedger()
        self.rejected = 0

    def rtt_of(self, peer: int) -> float:
        return 2.0 * self.lat_row[peer]

    def record(self, query_id, peer: int, delay: float) -> bool:
        """Ledger one measurement; True when the epoch is full."""
        if peer not in self.members:
            self.rejected += 1  # stale measurement for an evicted peer
            return False
        self.ledger.record(query_id, peer, delay)
        return self.ledger.count >= self.b

    def decide(self, candidates, rng: random.Random):
        """Run the epoch-boundary update. Returns a decision record dict."""
        traces = self.ledger.traces
        r = len(traces)
        delta_used = self.delta
        sums: dict[int, float] = {}
        counts: dict[int, int] = {}
        lat_sum, lat_cnt = 0.0, 0
        for _, measurements in traces:
            for p, d in measurements:
                sums[p] = sums.get(p, 0.0) + d
                counts[p] = counts.get(p, 0) + 1
                lat_sum += d
                lat_cnt += 1
        evaluated = list(self.bucket)
        scores = {
            u: -(sums.get(u, 0.0) + (r - counts.get(u, 0)) * delta_used)
            for u in evaluated
        }
        if evaluated:
            bucket_score = sum(scores.values()) / len(evaluated)
        else:
            bucket_score = -delta_used
        mean_latency = lat_sum / lat_cnt if lat_cnt else 0.0

        added: list[int] = []
        removed: list[int] = []
        if self.explore:
            worst = sorted(evaluated, key=lambda u: (scores[u], self.ids[u]))
            for victim in worst[: self.explore_count]:
                pick = select_random_peer(candidates, self.rtt_of, self.rho, self.members, rng)
                if pick is None:
                    continue
                self.bucket[self.bucket.index(victim)] = pick
                self.members.discard(victim)
                self.members.add(pick)
                removed.append(victim)
                added.append(pick)
            action = "explore" if added else "noop"
        else:
            if bucket_score > self.prev_score:
                action = "keep"
            else:
                action = "revert"
                self.bucket[:] = self.prev_config
                self.members = set(self.prev_config)

        self.prev_config = evaluated
        self.prev_score = bucket_score
        if lat_cnt:
            self.ema, self.delta = update_delta(self.ema, mean_latency, self.margin, self.smoothing)
        finished = self.epoch
        self.epoch += 1
        self.explore = not self.explore
        self.ledger = EpochLedger()
        return {
            "node": self.node,
            "bucket": self.bucket_idx,
            "epoch": finished,
            "mean_latency": mean_latency,
            "action": action,
            "bucket_score": bucket_score,
            "delta": delta_used,
            "added": added,
            "removed": removed,
        }


class EpochTracker:
    """Epoch bookkeeping without decisions, for the static strategies."""

    __slots__ = ("node", "bucket_idx", "b", "epoch", "_last_qid", "_count", "_lat_sum", "_lat_cnt")

    def __init__(self, node: int, bucket_idx: int, b: int = DEFAULT_EPOCH_QUERIES):
        self.node = node
        self.bucket_idx = bucket_idx
        self.b = b
        self.epoch = 0
        self._last_qid = None
        self._count = 0
        self._lat_sum = 0.0
        self._lat_cnt = 0

    def record(self, query_id, peer: int, delay: float) -> bool:
        if query_id != self._last_qid:
            self._last_qid = query_id
            self._count += 1
        self._lat_sum += delay
        self._lat_cnt += 1
        return self._count >= self.b

    def decide(self, candidates, rng) -> dict:
        mean_latency = self._lat_sum / self._lat_cnt if self._lat_cnt else 0.0
        finished = self.epoch
        self.epoch += 1
        self._last_qid = None
        self._count = 0
        self._lat_sum = 0.0
        self._lat_cnt = 0
        return {
            "node": self.node,
            "bucket": self.bucket_idx,
            "epoch": finished,
            "mean_latency": mean_latency,
            "action": "noop",
            "bucket_score": None,
            "delta": None,
            "added": [],
            "removed": [],
        }
