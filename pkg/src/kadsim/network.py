"""Network models: node placement, link latencies, per-node upload delays.

Two generated topologies plus an explicit one for tests:

* square: nodes uniform on a side x side plane; one-way link latency is the
  euclidean distance plus a per-pair uniform noise term drawn once per
  unordered pair; upload delays uniform.
* real_world: nodes placed at cities from a ping dataset; one-way link
  latency is the city-to-city ping entry (1 ms between distinct nodes in the
  same city); upload delays exponential.

A built Topology is immutable and shareable between simulations; the
override helpers return modified copies.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError
from .ids import NodeId

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
SAME_CITY_LATENCY_MS = 1.0  # one-way, between distinct nodes of one city


@dataclass(frozen=True)
class SimNode:
    index: int
    id: NodeId
    location: tuple[float, float]  # (x, y) on the square, (lat, lon) otherwise
    delta: float                   # upload delay applied per response send
    known_peers: tuple[int, ...]   # bootstrap knowledge set (node indices)
    adversarial: bool = False
    city: str | None = None


@dataclass(frozen=True, eq=False)
class Topology:
    mode: str                      # "square" | "real_world" | "explicit"
    id_bits: int
    nodes: tuple[SimNode, ...]
    latency: np.ndarray            # one-way link latency, symmetric, zero diagonal
    diameter_latency: float        # upper estimate of the one-way link latency
    adversary_multiplier: float = 1.0
    delta_noise_amplitude: float = 0.0
    delta_noise_seed: int | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def l(self, u: int, v: int) -> float:
        return float(self.latency[u, v])

    def rtt(self, u: int, v: int) -> float:
        return 2.0 * float(self.latency[u, v])

    def id_list(self) -> list[int]:
        try:
            return self._id_list
        except AttributeError:
            object.__setattr__(self, "_id_list", [int(n.id) for n in self.nodes])
            return self._id_list


def _draw_ids(rng: np.random.Generator, node_count: int, id_bits: int) -> list[NodeId]:
    space = 1 << id_bits
    if node_count > space:
        raise ConfigError(f"{node_count} nodes do not fit in a {id_bits}-bit id space")
    if id_bits <= 20:
        values = rng.choice(space, size=node_count, replace=False)
        values = [int(v) for v in values]
    else:
        seen: set[int] = set()
        values = []
        while len(values) < node_count:
            v = int(rng.integers(0, space))
            if v not in seen:
                seen.add(v)
                values.append(v)
    return [NodeId(v, id_bits) for v in values]


def _draw_known_peers(rng: np.random.Generator, node_count: int, sample_size: int) -> list[tuple[int, ...]]:
    size = min(sample_size, node_count - 1)
    if size < 1:
        raise ConfigError("topology needs at least 2 nodes")
    out = []
    for i in range(node_count):
        picks = rng.choice(node_count - 1, size=size, replace=False)
        out.append(tuple(int(p) if p < i else int(p) + 1 for p in picks))
    return out


def gen_square(
    node_count: int,
    side: float = 10_000.0,
    noise_lo: float = 100.0,
    noise_hi: float = 5_000.0,
    delta_lo: float = 100.0,
    delta_hi: float = 2_000.0,
    seed: int = 0,
    id_bits: int = 16,
    known_peers: int = 256,
) -> Topology:
    """Uniform placement on a plane with noisy euclidean link latencies."""
    if node_count < 2:
        raise ConfigError("topology needs at least 2 nodes")
    if not (0 <= noise_lo <= noise_hi and 0 <= delta_lo <= delta_hi and side > 0):
        raise ConfigError("square parameters out of range")
    rng = np.random.default_rng(seed)
    ids = _draw_ids(rng, node_count, id_bits)
    pos = rng.uniform(0.0, side, size=(node_count, 2))
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    noise = rng.uniform(noise_lo, noise_hi, size=(node_count, node_count))
    noise = np.triu(noise, 1)
    lat = dist + noise + noise.T
    np.fill_diagonal(lat, 0.0)
    deltas = rng.uniform(delta_lo, delta_hi, size=node_count)
    known = _draw_known_peers(rng, node_count, known_peers)
    nodes = tuple(
        SimNode(i, ids[i], (float(pos[i, 0]), float(pos[i, 1])), float(deltas[i]), known[i])
        for i in range(node_count)
    )
    diameter = side * math.sqrt(2.0) + noise_hi
    return Topology("square", id_bits, nodes, lat, diameter)


# ---------------------------------------------------------------------------
# city ping dataset
# ---------------------------------------------------------------------------

def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


@dataclass(frozen=True)
class CityDataset:
    """City coordinates, a one-way ping matrix (ms), and node counts per city.

    Cities listed in node_cities but absent from the ping matrix are mapped
    to the nearest covered city by great-circle distance.
    """

    coords: dict[str, tuple[float, float]]
    ping_cities: tuple[str, ...]
    ping: np.ndarray
    node_cities: tuple[tuple[str, int], ...]

    @classmethod
    def from_files(cls, cities_path, pings_path, node_cities_path) -> "CityDataset":
        coords: dict[str, tuple[float, float]] = {}
        for row in _read_rows(cities_path, 3, "cities"):
            name, lat, lon = row[0], _parse_float(row[1], cities_path), _parse_float(row[2], cities_path)
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise DatasetError(f"{cities_path}: coordinates out of range for {name}")
            coords[name] = (lat, lon)

        with open(pings_path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][:1] != ["city"]:
            raise DatasetError(f"{pings_path}: expected header starting with 'city'")
        names = tuple(rows[0][1:])
        if len(rows) != len(names) + 1:
            raise DatasetError(f"{pings_path}: expected {len(names)} data rows, got {len(rows) - 1}")
        ping = np.zeros((len(names), len(names)))
        for r, row in enumerate(rows[1:]):
            if len(row) != len(names) + 1 or row[0] != names[r]:
                raise DatasetError(f"{pings_path}: row {r + 2} malformed or out of order")
            for c, cell in enumerate(row[1:]):
                value = _parse_float(cell, pings_path)
                if value < 0 or not math.isfinite(value):
                    raise DatasetError(f"{pings_path}: negative or non-finite ping {cell!r}")
                ping[r, c] = value
        if np.any(np.diag(ping) != 0):
            raise DatasetError(f"{pings_path}: diagonal must be zero")
        ping = (ping + ping.T) / 2.0  # ingest as symmetric one-way latencies

        node_cities = []
        for row in _read_rows(node_cities_path, 2, "node_cities"):
            name, count = row[0], row[1]
            if not count.isdigit() or int(count) < 1:
                raise DatasetError(f"{node_cities_path}: bad count {count!r} for {name}")
            node_cities.append((name, int(count)))

        for name in set(names) | {c for c, _ in node_cities}:
            if name not in coords:
                raise DatasetError(f"city {name!r} has no coordinates in the cities file")
        return cls(coords, names, ping, tuple(node_cities))

    @classmethod
    def load(cls, directory) -> "CityDataset":
        d = Path(directory)
        return cls.from_files(d / "cities.csv", d / "pings.csv", d / "node_cities.csv")

    def covered_index(self, city: str) -> int:
        """Index into the ping matrix for `city`, via nearest covered city."""
        if city in self.ping_cities:
            return self.ping_cities.index(city)
        if city not in self.coords:
            raise DatasetError(f"city {city!r} has no coordinates")
        here = self.coords[city]
        best = min(self.ping_cities, key=lambda c: (haversine_km(here, self.coords[c]), c))
        return self.ping_cities.index(best)

    def total_slots(self) -> int:
        return sum(c for _, c in self.node_cities)


def _read_rows(path, ncols: int, kind: str) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty {kind} file")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != ncols:
            raise DatasetError(f"{path}: row {i} has {len(row)} columns, expected {ncols}")
    return rows[1:]


def _parse_float(cell: str, path) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DatasetError(f"{path}: not a number: {cell!r}") from None


def builtin_dataset() -> CityDataset:
    """The city fixture shipped with the package."""
    return CityDataset.load(Path(__file__).parent / "data")


def gen_real_world(
    dataset: CityDataset,
    node_count: int,
    delta_mean: float = 1_000.0,
    seed: int = 0,
    id_bits: int = 16,
    known_peers: int = 256,
) -> Topology:
    """Nodes at dataset cities; link latency from the city ping matrix."""
    if node_count < 2:
        raise ConfigError("topology needs at least 2 nodes")
    if delta_mean <= 0:
        raise ConfigError("delta_mean must be positive")
    slots: list[str] = []
    for city, count in dataset.node_cities:
        slots.extend([city] * count)
    if node_count > len(slots):
        raise ConfigError(f"{node_count} nodes exceed the {len(slots)} node-city slots")
    rng = np.random.default_rng(seed)
    ids = _draw_ids(rng, node_count, id_bits)
    picks = rng.choice(len(slots), size=node_count, replace=False)
    cities = [slots[int(p)] for p in picks]
    city_idx = np.array([dataset.covered_index(c) for c in cities])
    lat = dataset.ping[np.ix_(city_idx, city_idx)].astype(float)
    same = city_idx[:, None] == city_idx[None, :]
    lat[same] = SAME_CITY_LATENCY_MS
    np.fill_diagonal(lat, 0.0)
    deltas = rng.exponential(delta_mean, size=node_count)
    known = _draw_known_peers(rng, node_count, known_peers)
    nodes = tuple(
        SimNode(i, ids[i], dataset.coords[cities[i]], float(deltas[i]), known[i], city=cities[i])
        for i in range(node_count)
    )
    diameter = max(float(dataset.ping.max()), SAME_CITY_LATENCY_MS)
    return Topology("real_world", id_bits, nodes, lat, diameter)


def from_matrix(
    ids: list[int],
    latency: np.ndarray,
    deltas: list[float],
    id_bits: int = 16,
    known_peers: list[tuple[int, ...]] | None = None,
) -> Topology:
    """Explicit topology for tests and tiny worked examples."""
    n = len(ids)
    latency = np.asarray(latency, dtype=float)
    if latency.shape != (n, n) or len(deltas) != n:
        raise ConfigError("latency matrix / delta sizes do not match the id list")
    if not np.allclose(latency, latency.T) or np.any(np.diag(latency) != 0):
        raise ConfigError("latency matrix must be symmetric with a zero diagonal")
    if len(set(ids)) != n:
        raise ConfigError("node ids must be distinct")
    all_others = [tuple(j for j in range(n) if j != i) for i in range(n)]
    known = known_peers if known_peers is not None else all_others
    nodes = tuple(
        SimNode(i, NodeId(int(ids[i]), id_bits), (0.0, 0.0), float(deltas[i]), tuple(known[i]))
        for i in range(n)
    )
    return Topology("explicit", id_bits, nodes, latency, float(latency.max()))


# ---------------------------------------------------------------------------
# overrides
# ---------------------------------------------------------------------------

def apply_region_override(
    topology: Topology,
    predicate,
    new_delta: float | None = None,
    times_network_mean: float | None = None,
) -> Topology:
    """Replace the upload delay of every node matching `predicate`.

    Exactly one of new_delta (flat value) or times_network_mean (factor of
    the current network-wide mean delta) must be given.
    """
    if (new_delta is None) == (times_network_mean is None):
        raise ConfigError("give exactly one of new_delta / times_network_mean")
    if times_network_mean is not None:
        new_delta = times_network_mean * float(np.mean([n.delta for n in topology.nodes]))
    if new_delta < 0:
        raise ConfigError("override delta must be non-negative")
    matched = [n.index for n in topology.nodes if predicate(n)]
    if not matched:
        log.warning("region override matched no nodes; topology unchanged")
        return topology
    matched_set = set(matched)
    nodes = tuple(
        dataclasses.replace(n, delta=float(new_delta)) if n.index in matched_set else n
        for n in topology.nodes
    )
    return dataclasses.replace(topology, nodes=nodes)


def apply_adversaries(
    topology: Topology,
    fraction: float,
    delay_multiplier: float = 3.0,
    placement: str = "random",
    seed: int = 0,
    center: int | None = None,
) -> Topology:
    """Mark floor(fraction * n) nodes adversarial.

    random: a seeded uniform draw over all nodes. concentrated: the nodes
    RTT-nearest to `center` (the center itself is marked only when the
    count forces it). The routing engine charges marked nodes
    (delay_multiplier - 1) * delta extra per send.
    """
    n = len(topology.nodes)
    if not 0 <= fraction <= 1:
        raise ConfigError("adversary fraction must be within [0, 1]")
    if delay_multiplier < 1:
        raise ConfigError("delay multiplier must be >= 1")
    count = int(fraction * n + 1e-9)
    if count == 0:
        return dataclasses.replace(topology, adversary_multiplier=float(delay_multiplier))
    if placement == "random":
        rng = np.random.default_rng(seed)
        marked = set(int(i) for i in rng.choice(n, size=count, replace=False))
    elif placement == "concentrated":
        if center is None or not 0 <= center < n:
            raise ConfigError("concentrated placement needs a valid center node index")
        order = sorted((i for i in range(n) if i != center), key=lambda i: (topology.rtt(center, i), i))
        marked = set(order[:count])
        if count >= n:
            marked.add(center)
    else:
        raise ConfigError(f"unknown adversary placement {placement!r}")
    nodes = tuple(
        dataclasses.replace(node, adversarial=True) if node.index in marked else node
        for node in topology.nodes
    )
    return dataclasses.replace(topology, nodes=nodes, adversary_multiplier=float(delay_multiplier))


def apply_delta_noise(topology: Topology, amplitude: float, seed: int = 0) -> Topology:
    """Install a per-query upload-delay noise hook.

    Each use of a node's delta during simulation draws an independent
    uniform perturbation within +-amplitude * delta.
    """
    if not 0 <= amplitude < 1:
        raise ConfigError("noise amplitude must be within [0, 1)")
    return dataclasses.replace(topology, delta_noise_amplitude=float(amplitude), delta_noise_seed=int(seed))
