"""Round-based traffic generation.

One lookup per round: a uniform random source node draws a target key from
its demand distribution p_v. Supported demands are uniform over a target
key set and global hotspot (a seeded hot subset H receives `hot_mass` of
the traffic). A node never draws its own key; rejected rows are redrawn
from the full per-node distribution, which equals conditioning p_v on the
support minus the node's own key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_HOT_FRACTION = 0.2
DEFAULT_HOT_MASS = 0.8


@dataclass(frozen=True)
class DemandModel:
    kind: str                      # "uniform" | "hotspot"
    targets: tuple[int, ...]
    hot_set: tuple[int, ...] = ()
    cold_set: tuple[int, ...] = ()
    hot_mass: float = 0.0


@dataclass(frozen=True)
class RoundSchedule:
    """The full (source, key) demand stream of a run, shared across
    strategies so comparisons are paired."""

    sources: list[int] = field(repr=False)
    keys: list[int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.sources)

    def __iter__(self):
        return iter(zip(self.sources, self.keys))


def make_uniform(targets) -> DemandModel:
    """Every node queries uniformly over the key set minus its own key."""
    targets = tuple(int(t) for t in targets)
    if not targets:
        raise ConfigError("demand needs a non-empty target key set")
    return DemandModel("uniform", targets)


def make_hotspot(
    targets,
    hot_fraction: float = DEFAULT_HOT_FRACTION,
    hot_mass: float = DEFAULT_HOT_MASS,
    seed: int = 0,
) -> DemandModel:
    """A random hot subset of round(hot_fraction * |targets|) keys receives
    hot_mass of the traffic; the rest goes uniformly to the cold keys."""
    targets = tuple(int(t) for t in targets)
    if not 0.0 < hot_fraction < 1.0:
        raise ConfigError("hot_fraction must lie strictly between 0 and 1")
    if not 0.0 < hot_mass < 1.0:
        raise ConfigError("hot_mass must lie strictly between 0 and 1")
    hot_count = round(hot_fraction * len(targets))
    if hot_count == 0 or hot_count == len(targets):
        raise ConfigError(
            f"hot set of {hot_count}/{len(targets)} keys is degenerate; "
            "adjust hot_fraction or the target set size"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(targets))
    hot = tuple(targets[i] for i in sorted(order[:hot_count]))
    cold = tuple(targets[i] for i in sorted(order[hot_count:]))
    return DemandModel("hotspot", targets, hot, cold, float(hot_mass))


def make_rounds(
    demand: DemandModel,
    own_keys,
    count: int,
    rng: np.random.Generator | int,
) -> RoundSchedule:
    """Draw `count` rounds: source uniform over nodes, key from p_source.

    `own_keys[i]` is node i's own key (its id for key-based routing), never
    drawn as that node's target.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    own = np.asarray(list(own_keys), dtype=np.int64)
    n = own.shape[0]
    if n == 0:
        raise ConfigError("no nodes to draw sources from")
    if count < 0:
        raise ConfigError("round count must be non-negative")
    usable = set(demand.targets)
    if n == 1 and usable <= {int(own[0])}:
        raise ConfigError("a single node with only its own key has no valid target")

    targets = np.asarray(demand.targets, dtype=np.int64)
    hot = np.asarray(demand.hot_set, dtype=np.int64)
    cold = np.asarray(demand.cold_set, dtype=np.int64)

    def draw_keys(size: int) -> np.ndarray:
        if demand.kind == "uniform":
            return targets[rng.integers(0, targets.shape[0], size)]
        take_hot = rng.random(size) < demand.hot_mass
        out = cold[rng.integers(0, cold.shape[0], size)]
        nh = int(take_hot.sum())
        out[take_hot] = hot[rng.integers(0, hot.shape[0], nh)]
        return out

    sources = rng.integers(0, n, count)
    keys = draw_keys(count)
    # a node never queries its own key: redraw offending rows wholesale,
    # which conditions p_v on its support minus the own key
    bad = np.flatnonzero(keys == own[sources])
    while bad.size:
        keys[bad] = draw_keys(bad.size)
        bad = bad[keys[bad] == own[sources[bad]]]
    return RoundSchedule(sources.tolist(), keys.tolist())


def with_replay_tail(schedule: RoundSchedule, window: int) -> RoundSchedule:
    """Replace the last `window` rounds with a replay of the first `window`,
    so before/after latency histograms compare identical demand."""
    total = len(schedule)
    if not 0 < window * 2 <= total:
        raise ConfigError("replay window must fit twice into the schedule")
    sources = schedule.sources[:-window] + schedule.sources[:window]
    keys = schedule.keys[:-window] + schedule.keys[:window]
    return RoundSchedule(sources, keys)


def draw_keyspace(count: int, id_bits: int, rng: np.random.Generator | int) -> list[int]:
    """Stored-key universe for the DHT application: uniform over the id
    space, drawn without replacement."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    space = 1 << id_bits
    if count > space:
        raise ConfigError("more keys requested than the id space holds")
    if count > space // 2:
        return rng.permutation(space)[:count].tolist()
    seen: set[int] = set()
    while len(seen) < count:
        for v in rng.integers(0, space, count - len(seen)):
            seen.add(int(v))
    return sorted(seen)
