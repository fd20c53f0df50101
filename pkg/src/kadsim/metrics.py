"""Per-query and per-epoch metric collection plus summary statistics.

One MetricsStore per (strategy, seed) run. Latency and success are always
recorded (they feed every summary statistic); the remaining per-query
columns are optional since they only serve per_query.csv emission. Epoch
records are the decision rows produced by the per-bucket learners or
trackers. Summary aggregates are recomputable from the per-query records.
"""

from __future__ import annotations

from array import array

import numpy as np

from .errors import ConfigError

PER_QUERY_HEADER = "round,source_id,target_key,strategy,app,latency,hops,success"
PER_EPOCH_HEADER = "node_id,bucket,epoch,mean_latency,action,bucket_score,delta"

PERCENTILES = (50, 90, 99)


class MetricsStore:
    """Columnar run metrics."""

    def __init__(self, strategy: str, app: str, collect_queries: bool = True):
        self.strategy = strategy
        self.app = app
        self.collect_queries = collect_queries
        self.rounds = 0
        self.latency = array("d")
        self.success = array("b")
        self.round_no = array("q")
        self.source_id = array("q")
        self.target_key = array("q")
        self.hops = array("i")
        self.epoch_rows: list[dict] = []
        self.explorations: list[tuple] = []

    def record_query(self, round_no, source_id, target_key, latency, hops, success):
        self.rounds += 1
        self.latency.append(latency)
        self.success.append(success)
        if not self.collect_queries:
            return
        self.round_no.append(round_no)
        self.source_id.append(source_id)
        self.target_key.append(target_key)
        self.hops.append(hops)

    def latencies(self) -> np.ndarray:
        return np.frombuffer(self.latency, dtype=np.float64)

    def window_latencies(self, start: int, stop: int) -> np.ndarray:
        """Latencies of rounds [start, stop) by position in the run."""
        if not 0 <= start < stop <= self.rounds:
            raise ConfigError(f"window [{start}, {stop}) outside the {self.rounds}-round run")
        return self.latencies()[start:stop]

    def summary(self) -> dict:
        """mean/p50/p90/p99 over all recorded queries, plus success rate."""
        out = {"strategy": self.strategy, "app": self.app, "rounds": self.rounds}
        if self.rounds:
            lat = self.latencies()
            out["mean"] = float(lat.mean())
            for p in PERCENTILES:
                out[f"p{p}"] = float(np.percentile(lat, p))
            out["success_rate"] = float(np.frombuffer(self.success, dtype=np.int8).mean())
        return out

    # -- epoch records -------------------------------------------------------

    def extend_epochs(self, rows) -> None:
        self.epoch_rows.extend(rows)

    def extend_explorations(self, events) -> None:
        self.explorations.extend(events)

    def epoch_means(self, node: int, bucket: int) -> list[float]:
        """The per-epoch mean latencies of one (node index, bucket) pair, in
        epoch order."""
        rows = [r for r in self.epoch_rows if r["node"] == node and r["bucket"] == bucket]
        rows.sort(key=lambda r: r["epoch"])
        return [r["mean_latency"] for r in rows]


def converged_mean(epoch_means, tail: int = 10) -> float:
    """Mean of the last `tail` per-epoch means (the converged estimate)."""
    if not epoch_means:
        raise ConfigError("no epochs recorded for the observed bucket")
    tail_vals = epoch_means[-tail:]
    return float(sum(tail_vals) / len(tail_vals))


def steady_mean(epoch_means) -> float:
    """Mean over all epochs; the static strategies are stationary, so this
    estimates their level with the least variance."""
    if not epoch_means:
        raise ConfigError("no epochs recorded for the observed bucket")
    return float(sum(epoch_means) / len(epoch_means))


def median(values) -> float:
    return float(np.median(np.asarray(list(values), dtype=float)))
