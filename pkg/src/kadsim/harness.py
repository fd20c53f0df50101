"""Scenario configuration, run orchestration, and file emission.

A scenario is one TOML file (or a catalog preset): topology, strategy set,
application, demand, overrides, learner knobs, observation policy. One
master seed drives independent child streams (topology, demand, tables,
simulation, observation) so that strategies within a comparison see
identical networks and query sequences, and runs replay byte-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import APPS, MODES, STRATEGIES, Simulation
from .errors import ConfigError
from .kadabra import (
    DEFAULT_DELTA_MARGIN,
    DEFAULT_DELTA_SMOOTHING,
    DEFAULT_EPOCH_QUERIES,
    DEFAULT_SQUARE_RHO,
    LearnerParams,
)
from .metrics import (
    PER_EPOCH_HEADER,
    PER_QUERY_HEADER,
    MetricsStore,
    converged_mean,
    median,
    steady_mean,
)
from .network import (
    CityDataset,
    apply_adversaries,
    apply_delta_noise,
    apply_region_override,
    builtin_dataset,
    gen_real_world,
    gen_square,
    haversine_km,
)
from .workload import (
    draw_keyspace,
    make_hotspot,
    make_rounds,
    make_uniform,
    with_replay_tail,
)

DEFAULT_K = 8
DEFAULT_NODES = 512
DEFAULT_TARGET_EPOCHS = 50
CONVERGED_TAIL = 10

# child-stream tags hung off the master seed
_TAG_TOPOLOGY = 1
_TAG_DEMAND = 2
_TAG_TABLES = 3
_TAG_SIM = 4
_TAG_OBSERVE = 5
_TAG_ADVERSARY = 6
_TAG_NOISE = 7
_TAG_KEYS = 8
_TAG_PATHS = 9


def child_seed(master: int, tag: int) -> int:
    return int(np.random.SeedSequence((int(master), tag)).generate_state(1)[0])


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    rounds: int = 0                   # 0: run until target_epochs at the observed bucket
    target_epochs: int = DEFAULT_TARGET_EPOCHS
    app: str = "kbr"
    mode: str = "recursive"
    strategy: str = "kadabra"
    strategies: tuple = ("vanilla", "pr", "pns", "kadabra")

    # topology
    topology: str = "square"          # square | real_world
    nodes: int = DEFAULT_NODES
    id_bits: int = 16
    known_peers: int = 256
    side: float = 10000.0
    noise_lo: float = 100.0
    noise_hi: float = 5000.0
    delta_lo: float = 100.0
    delta_hi: float = 2000.0
    delta_mean: float = 1000.0
    dataset_dir: str = ""

    # tables / lookup
    k: int = DEFAULT_K
    alpha: int = 0                    # 0: app default (kbr 1, dht 2)
    replicas: int = 3

    # learner
    b: int = DEFAULT_EPOCH_QUERIES
    margin: float = DEFAULT_DELTA_MARGIN
    smoothing: float = DEFAULT_DELTA_SMOOTHING
    explore_count: int = 1
    rho_vector: tuple | None = None   # None: square default / zeros for real_world
    rho_quantile: float | None = None  # per-node RTT quantile, overrides the vector

    # demand
    demand: str = "uniform"           # uniform | hotspot
    hot_fraction: float = 0.2
    hot_mass: float = 0.8
    dht_keys: int = 0                 # 0: one stored key per node

    # region delta override
    region_center: tuple | None = None
    region_size: tuple | None = None
    region_delta: float | None = None
    region_city: str | None = None
    region_radius_km: float = 0.0
    region_times_mean: float | None = None

    # adversaries
    adv_fraction: float = 0.0
    adv_multiplier: float = 3.0
    adv_placement: str = "random"     # random | concentrated

    noise_amplitude: float = 0.0

    # observation
    observe_node: int = -1            # -1: seeded choice
    observe_inside_region: bool = False

    def validate(self) -> "ScenarioConfig":
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}")
        if self.app not in APPS:
            raise ConfigError(f"app must be one of {APPS}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.topology not in ("square", "real_world"):
            raise ConfigError("topology must be 'square' or 'real_world'")
        if self.nodes < 2:
            raise ConfigError("need at least 2 nodes")
        if self.rounds < 0 or self.target_epochs < 1:
            raise ConfigError("rounds must be >= 0 and target_epochs >= 1")
        if self.k < 1 or self.b < 1 or self.replicas < 1 or self.explore_count < 1:
            raise ConfigError("k, b, replicas and explore_count must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0 (0 selects the app default)")
        if self.app == "kbr" and self.alpha > 1:
            raise ConfigError("kbr uses a single path; leave alpha at 0 or 1")
        if not 0.0 <= self.adv_fraction <= 1.0:
            raise ConfigError("adv_fraction must lie in [0, 1]")
        if self.adv_placement not in ("random", "concentrated"):
            raise ConfigError("adv_placement must be 'random' or 'concentrated'")
        if not 0.0 <= self.noise_amplitude < 1.0:
            raise ConfigError("noise_amplitude must lie in [0, 1)")
        if self.demand not in ("uniform", "hotspot"):
            raise ConfigError("demand must be 'uniform' or 'hotspot'")
        if self.rho_vector is not None and self.rho_quantile is not None:
            raise ConfigError("give rho_vector or rho_quantile, not both")
        if self.rho_quantile is not None and not 0.0 <= self.rho_quantile < 1.0:
            raise ConfigError("rho_quantile must lie in [0, 1)")
        region_fields = (self.region_center, self.region_city)
        if sum(f is not None for f in region_fields) > 1:
            raise ConfigError("configure a square region or a city region, not both")
        if self.region_center is not None and self.region_size is None:
            raise ConfigError("a square region needs region_size")
        has_region = any(f is not None for f in region_fields)
        if has_region and (self.region_delta is None) == (self.region_times_mean is None):
            raise ConfigError("a region needs exactly one of region_delta / region_times_mean")
        if self.observe_inside_region and not has_region:
            raise ConfigError("observe_inside_region requires a region")
        if self.observe_node >= self.nodes:
            raise ConfigError("observe_node out of range")
        return self

    def effective_alpha(self) -> int:
        if self.alpha > 0:
            return self.alpha
        return 1 if self.app == "kbr" else 2

    def learner_params(self) -> LearnerParams:
        if self.rho_vector is not None:
            vector = tuple(float(v) for v in self.rho_vector)
        elif self.topology == "square":
            vector = DEFAULT_SQUARE_RHO
        else:
            vector = (0.0,)
        return LearnerParams(
            b=self.b, rho_vector=vector, margin=self.margin,
            smoothing=self.smoothing, explore_count=self.explore_count,
        )


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

# TOML section -> (config field prefix handling); every ScenarioConfig field
# is addressable; unknown keys are rejected
_SECTION_FIELDS = {
    "scenario": {
        "name", "seed", "rounds", "target_epochs", "app", "mode",
        "strategy", "strategies",
    },
    "topology": {
        "kind", "nodes", "id_bits", "known_peers", "side", "noise",
        "delta", "delta_mean", "dataset_dir",
    },
    "table": {"k", "alpha", "replicas"},
    "learner": {
        "b", "margin", "smoothing", "explore_count", "rho_vector",
        "rho_quantile",
    },
    "demand": {"kind", "hot_fraction", "hot_mass", "dht_keys"},
    "region": {"center", "size", "delta", "city", "radius_km", "times_mean"},
    "adversary": {"fraction", "multiplier", "placement"},
    "noise": {"amplitude"},
    "observe": {"node", "inside_region"},
}


def _load_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def config_from_dict(raw: dict, name_hint: str = "scenario") -> ScenarioConfig:
    cfg = ScenarioConfig(name=name_hint)
    for section, keys in _SECTION_FIELDS.items():
        body = raw.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(body) - keys
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    unknown_sections = set(raw) - set(_SECTION_FIELDS)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")

    s = raw.get("scenario", {})
    for key in ("name", "seed", "rounds", "target_epochs", "app", "mode", "strategy"):
        if key in s:
            setattr(cfg, key, s[key])
    if "strategies" in s:
        cfg.strategies = tuple(s["strategies"])

    t = raw.get("topology", {})
    if "kind" in t:
        cfg.topology = t["kind"]
    for key in ("nodes", "id_bits", "known_peers", "side", "delta_mean", "dataset_dir"):
        if key in t:
            setattr(cfg, key, t[key])
    if "noise" in t:
        cfg.noise_lo, cfg.noise_hi = (float(v) for v in t["noise"])
    if "delta" in t:
        cfg.delta_lo, cfg.delta_hi = (float(v) for v in t["delta"])

    for key in ("k", "alpha", "replicas"):
        if key in raw.get("table", {}):
            setattr(cfg, key, raw["table"][key])

    ln = raw.get("learner", {})
    for key in ("b", "margin", "smoothing", "explore_count", "rho_quantile"):
        if key in ln:
            setattr(cfg, key, ln[key])
    if "rho_vector" in ln:
        cfg.rho_vector = tuple(float(v) for v in ln["rho_vector"])

    d = raw.get("demand", {})
    if "kind" in d:
        cfg.demand = d["kind"]
    for key in ("hot_fraction", "hot_mass", "dht_keys"):
        if key in d:
            setattr(cfg, key, d[key])

    r = raw.get("region", {})
    if "center" in r:
        cfg.region_center = tuple(float(v) for v in r["center"])
    if "size" in r:
        cfg.region_size = tuple(float(v) for v in r["size"])
    if "delta" in r:
        cfg.region_delta = float(r["delta"])
    if "city" in r:
        cfg.region_city = str(r["city"])
    if "radius_km" in r:
        cfg.region_radius_km = float(r["radius_km"])
    if "times_mean" in r:
        cfg.region_times_mean = float(r["times_mean"])

    a = raw.get("adversary", {})
    if "fraction" in a:
        cfg.adv_fraction = float(a["fraction"])
    if "multiplier" in a:
        cfg.adv_multiplier = float(a["multiplier"])
    if "placement" in a:
        cfg.adv_placement = str(a["placement"])

    if "amplitude" in raw.get("noise", {}):
        cfg.noise_amplitude = float(raw["noise"]["amplitude"])

    o = raw.get("observe", {})
    if "node" in o:
        cfg.observe_node = int(o["node"])
    if "inside_region" in o:
        cfg.observe_inside_region = bool(o["inside_region"])

    return cfg.validate()


def load_config(path: str) -> ScenarioConfig:
    import os

    return config_from_dict(_load_toml(path), name_hint=os.path.splitext(os.path.basename(path))[0])


# ---------------------------------------------------------------------------
# shared per-seed setup (paired across strategies)
# ---------------------------------------------------------------------------

@dataclass
class SharedSetup:
    master_seed: int
    topology: object
    node_ids: list
    observed: int
    schedule: object
    dht_keyspace: list | None
    rho_by_node: list | None
    path_target: int
    region_members: tuple = ()


def _region_predicate(cfg: ScenarioConfig, dataset: CityDataset | None):
    if cfg.region_center is not None:
        cx, cy = cfg.region_center
        w, h = cfg.region_size
        return lambda node: (abs(node.location[0] - cx) <= w / 2.0
                             and abs(node.location[1] - cy) <= h / 2.0)
    if cfg.region_city is not None:
        if dataset is None:
            raise ConfigError("city regions need the real_world topology")
        if cfg.region_city not in dataset.coords:
            raise ConfigError(f"region city {cfg.region_city!r} not in the dataset")
        anchor = dataset.coords[cfg.region_city]
        radius = cfg.region_radius_km

        def pred(node):
            return haversine_km(*dataset.coords[node.city], *anchor) <= radius

        return pred
    return None


def _region_anchor_distance(cfg: ScenarioConfig, dataset: CityDataset | None):
    """Distance from a node to the region anchor, for the observer pick."""
    if cfg.region_center is not None:
        cx, cy = cfg.region_center
        return lambda node: math.hypot(node.location[0] - cx, node.location[1] - cy)
    anchor = dataset.coords[cfg.region_city]
    return lambda node: haversine_km(*dataset.coords[node.city], *anchor)


def auto_round_cap(cfg: ScenarioConfig) -> int:
    """Upper bound on rounds when running to a target epoch count.

    The observed bucket 1 receives a measurement only when its owner
    initiates a lookup whose key differs in the first bit: one per
    2 * nodes rounds in expectation; 1.4x covers the variance.
    """
    return math.ceil(1.4 * cfg.target_epochs * cfg.b * 2 * cfg.nodes)


def build_shared(cfg: ScenarioConfig, master_seed: int) -> SharedSetup:
    cfg = cfg.validate()
    dataset = None
    if cfg.topology == "square":
        topo = gen_square(
            cfg.nodes, side=cfg.side, noise_lo=cfg.noise_lo, noise_hi=cfg.noise_hi,
            delta_lo=cfg.delta_lo, delta_hi=cfg.delta_hi,
            seed=child_seed(master_seed, _TAG_TOPOLOGY), id_bits=cfg.id_bits,
            known_peers=cfg.known_peers,
        )
    else:
        dataset = CityDataset.load(cfg.dataset_dir) if cfg.dataset_dir else builtin_dataset()
        topo = gen_real_world(
            dataset, cfg.nodes, delta_mean=cfg.delta_mean,
            seed=child_seed(master_seed, _TAG_TOPOLOGY), id_bits=cfg.id_bits,
            known_peers=cfg.known_peers,
        )

    pred = _region_predicate(cfg, dataset)
    region_members: tuple = ()
    if pred is not None:
        topo = apply_region_override(
            topo, pred, new_delta=cfg.region_delta,
            times_network_mean=cfg.region_times_mean,
        )
        region_members = tuple(i for i, node in enumerate(topo.nodes) if pred(node))
        if not region_members:
            raise ConfigError("the configured region matched no node")

    obs_rng = np.random.default_rng(child_seed(master_seed, _TAG_OBSERVE))
    if cfg.observe_node >= 0:
        observed = cfg.observe_node
    elif cfg.observe_inside_region:
        # innermost member: deterministic, so region runs compare strategies
        # rather than observer placement draws
        dist = _region_anchor_distance(cfg, dataset)
        observed = int(min(region_members, key=lambda i: (dist(topo.nodes[i]), i)))
    else:
        observed = int(obs_rng.integers(cfg.nodes))

    if cfg.adv_fraction > 0.0:
        center = observed if cfg.adv_placement == "concentrated" else None
        topo = apply_adversaries(
            topo, cfg.adv_fraction, delay_multiplier=cfg.adv_multiplier,
            placement=cfg.adv_placement, seed=child_seed(master_seed, _TAG_ADVERSARY),
            center=center,
        )
    if cfg.noise_amplitude > 0.0:
        topo = apply_delta_noise(topo, cfg.noise_amplitude, seed=child_seed(master_seed, _TAG_NOISE))

    node_ids = topo.id_list()
    if cfg.app == "kbr":
        targets = node_ids
        keyspace = None
    else:
        keyspace = draw_keyspace(cfg.dht_keys or cfg.nodes, cfg.id_bits, child_seed(master_seed, _TAG_KEYS))
        targets = keyspace
    demand = (
        make_uniform(targets)
        if cfg.demand == "uniform"
        else make_hotspot(targets, cfg.hot_fraction, cfg.hot_mass, child_seed(master_seed, _TAG_DEMAND))
    )
    total = cfg.rounds if cfg.rounds > 0 else auto_round_cap(cfg)
    schedule = make_rounds(demand, node_ids, total, child_seed(master_seed, _TAG_DEMAND))

    rho_by_node = None
    if cfg.rho_quantile is not None:
        lat = topo.latency
        rho_by_node = []
        for i in range(cfg.nodes):
            rtts = np.delete(lat[i], i) * 2.0
            rho_by_node.append(float(np.quantile(rtts, cfg.rho_quantile)))

    others = [i for i in range(cfg.nodes) if i != observed]
    path_rng = np.random.default_rng(child_seed(master_seed, _TAG_PATHS))
    path_target = int(node_ids[others[path_rng.integers(len(others))]])

    return SharedSetup(
        master_seed=master_seed, topology=topo, node_ids=list(node_ids),
        observed=observed, schedule=schedule, dht_keyspace=keyspace,
        rho_by_node=rho_by_node, path_target=path_target,
        region_members=region_members,
    )


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    strategy: str
    master_seed: int
    observed: int
    node_ids: list
    store: MetricsStore
    rounds_run: int
    final_path: dict | None = None

    def observed_epoch_means(self, bucket: int = 1) -> list[float]:
        return self.store.epoch_means(self.observed, bucket)


def make_simulation(cfg: ScenarioConfig, shared: SharedSetup, strategy: str) -> Simulation:
    sim = Simulation(
        shared.topology, strategy, k=cfg.k, app=cfg.app, mode=cfg.mode,
        alpha=cfg.effective_alpha(),
        table_seed=child_seed(shared.master_seed, _TAG_TABLES),
        sim_seed=child_seed(shared.master_seed, _TAG_SIM),
        learner=cfg.learner_params(), rho_by_node=shared.rho_by_node,
    )
    if cfg.app == "dht":
        sim.store_replicated(shared.dht_keyspace, cfg.replicas)
    return sim


def run_scenario(
    cfg: ScenarioConfig,
    strategy: str | None = None,
    shared: SharedSetup | None = None,
    collect_queries: bool = True,
    collect_final_path: bool = False,
    progress=None,
) -> RunResult:
    """Run one strategy over one seeded setup to the configured horizon."""
    cfg = cfg.validate()
    strategy = strategy or cfg.strategy
    if shared is None:
        shared = build_shared(cfg, cfg.seed)
    sim = make_simulation(cfg, shared, strategy)
    store = MetricsStore(strategy, cfg.app, collect_queries=collect_queries)
    sources = shared.schedule.sources
    keys = shared.schedule.keys
    ids = sim.ids
    obs = shared.observed
    to_targets = cfg.rounds == 0
    run_query = sim.run_query
    record = store.record_query
    rounds_run = 0
    for qid in range(len(sources)):
        s = sources[qid]
        latency, ok, hops = run_query(s, keys[qid], qid)
        record(qid, ids[s], keys[qid], latency, hops, ok)
        rounds_run += 1
        if (qid & 4095) == 0 and qid:
            if progress is not None:
                progress(qid, sim)
            if to_targets and sim.epochs_of(obs, 1) >= cfg.target_epochs:
                break
    store.extend_epochs(sim.epoch_rows)
    store.extend_explorations(sim.explorations)
    final_path = None
    if collect_final_path:
        res = sim.lookup(obs, shared.path_target, qid=len(sources), collect_paths=True)
        final_path = {
            "source_id": ids[obs],
            "target_key": shared.path_target,
            "strategy": strategy,
            "latency": res.latency,
            "hops": res.hops,
            "success": res.success,
            "path_ids": [ids[h] for h, _ in res.paths[0].hops],
        }
    return RunResult(strategy, shared.master_seed, obs, shared.node_ids, store,
                     rounds_run, final_path)


@dataclass
class CompareResult:
    config: ScenarioConfig
    strategies: tuple
    seeds: tuple
    observed: dict            # master seed -> observed node index
    per_seed: dict            # (strategy, seed) -> per-run stats dict
    medians: dict             # strategy -> stat -> median across seeds
    ratios: dict              # strategy -> {vs_vanilla, vs_pns, ...}
    first_seed_runs: dict     # strategy -> RunResult for the first seed
    paths: dict               # strategy -> final path dump (first seed)


def _run_stats(run: RunResult, tail: int) -> dict:
    means = run.observed_epoch_means(bucket=1)
    stats = dict(run.store.summary())
    stats["epochs"] = len(means)
    if means:
        stats["epoch0"] = means[0]
        stats["converged"] = converged_mean(means, tail)
        stats["steady"] = steady_mean(means)
    return stats


def compare(
    cfg: ScenarioConfig,
    strategies: tuple | None = None,
    seeds: int = 5,
    collect_queries: bool = False,
    tail: int = CONVERGED_TAIL,
) -> CompareResult:
    """Paired multi-seed comparison; medians of per-seed statistics."""
    cfg = cfg.validate()
    strategies = tuple(strategies or cfg.strategies)
    if seeds < 1:
        raise ConfigError("need at least one seed")
    seed_list = tuple(cfg.seed + i for i in range(seeds))
    per_seed: dict = {}
    first_runs: dict = {}
    paths: dict = {}
    observed: dict = {}
    for si, master in enumerate(seed_list):
        shared = build_shared(cfg, master)
        observed[master] = shared.observed
        for strategy in strategies:
            run = run_scenario(
                cfg, strategy=strategy, shared=shared,
                collect_queries=collect_queries,
                collect_final_path=si == 0,
            )
            per_seed[(strategy, master)] = _run_stats(run, tail)
            if si == 0:
                first_runs[strategy] = run
                paths[strategy] = run.final_path

    stat_keys = sorted({k for stats in per_seed.values() for k in stats
                        if isinstance(stats[k], (int, float))})
    medians = {
        strategy: {
            key: median([per_seed[(strategy, m)][key] for m in seed_list
                         if key in per_seed[(strategy, m)]])
            for key in stat_keys
            if all(key in per_seed[(strategy, m)] for m in seed_list)
        }
        for strategy in strategies
    }
    ratios: dict = {}
    for strategy in strategies:
        entry = {}
        for base in ("vanilla", "pns"):
            if base in strategies and base != strategy:
                per_seed_ratios = [
                    per_seed[(strategy, m)]["converged"] / per_seed[(base, m)]["converged"]
                    for m in seed_list
                    if "converged" in per_seed[(strategy, m)] and "converged" in per_seed[(base, m)]
                ]
                if per_seed_ratios:
                    entry[f"vs_{base}"] = median(per_seed_ratios)
                    entry[f"vs_{base}_of_medians"] = (
                        medians[strategy]["converged"] / medians[base]["converged"]
                    )
        ratios[strategy] = entry
    return CompareResult(cfg, strategies, seed_list, observed, per_seed,
                         medians, ratios, first_runs, paths)


def before_after_histogram(
    cfg: ScenarioConfig,
    window: int,
    strategy: str | None = None,
    shared: SharedSetup | None = None,
):
    """Run with the first `window` rounds replayed as the last `window`;
    returns (first latencies, last latencies, p90 ratio, RunResult)."""
    cfg = cfg.validate()
    if cfg.rounds <= 0:
        raise ConfigError("replay runs need an explicit round count")
    if window < 1 or 2 * window > cfg.rounds:
        raise ConfigError("window must fit twice into the configured rounds")
    if shared is None:
        shared = build_shared(cfg, cfg.seed)
    shared = replace(shared, schedule=with_replay_tail(shared.schedule, window))
    run = run_scenario(cfg, strategy=strategy, shared=shared, collect_queries=True)
    first = run.store.window_latencies(0, window)
    last = run.store.window_latencies(run.rounds_run - window, run.rounds_run)
    ratio = float(np.percentile(last, 90) / np.percentile(first, 90))
    return first, last, ratio, run


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_per_query_csv(store: MetricsStore, path) -> None:
    if store.rounds and not store.collect_queries:
        raise ConfigError("run was executed without per-query collection")
    with open(path, "w", newline="") as fh:
        fh.write(PER_QUERY_HEADER + "\n")
        for i in range(len(store.round_no)):
            fh.write(
                f"{store.round_no[i]},{store.source_id[i]},{store.target_key[i]},"
                f"{store.strategy},{store.app},{_fmt(store.latency[i])},"
                f"{store.hops[i]},{int(store.success[i])}\n"
            )


def write_per_epoch_csv(store: MetricsStore, path, node_ids) -> None:
    rows = sorted(store.epoch_rows, key=lambda r: (r["node"], r["bucket"], r["epoch"]))
    with open(path, "w", newline="") as fh:
        fh.write(PER_EPOCH_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{node_ids[r['node']]},{r['bucket']},{r['epoch']},"
                f"{_fmt(r['mean_latency'])},{r['action']},"
                f"{_fmt(r['bucket_score'])},{_fmt(r['delta'])}\n"
            )


def write_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_per_query_csv(path):
    """Parse a per_query.csv back into typed columns (round-trip oracle)."""
    import csv

    out = {"round": [], "source_id": [], "target_key": [], "strategy": [],
           "app": [], "latency": [], "hops": [], "success": []}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PER_QUERY_HEADER.split(","):
            raise ConfigError(f"unexpected per_query header in {path}")
        for row in reader:
            out["round"].append(int(row["round"]))
            out["source_id"].append(int(row["source_id"]))
            out["target_key"].append(int(row["target_key"]))
            out["strategy"].append(row["strategy"])
            out["app"].append(row["app"])
            out["latency"].append(float(row["latency"]))
            out["hops"].append(int(row["hops"]))
            out["success"].append(bool(int(row["success"])))
    return out


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "kadsim"
    return plt


def plot_epoch_curves(curves: dict, path, title: str) -> None:
    """curves: strategy -> list of per-epoch means for the observed bucket."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for strategy, means in curves.items():
        ax.plot(range(len(means)), means, label=strategy, linewidth=1.4)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean query latency")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_before_after(first, last, path, title: str) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    lo = 0.0
    hi = float(max(np.max(first), np.max(last)))
    bins = np.linspace(lo, hi, 40)
    ax.hist(first, bins=bins, alpha=0.55, label="first window")
    ax.hist(last, bins=bins, alpha=0.55, label="last window")
    ax.set_xlabel("query latency")
    ax.set_ylabel("queries")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_run(run: RunResult, out_dir) -> list:
    """simulate-style emission: per_query.csv, per_epoch.csv, summary.json."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    files = []
    pq = os.path.join(out_dir, "per_query.csv")
    write_per_query_csv(run.store, pq)
    files.append(pq)
    pe = os.path.join(out_dir, "per_epoch.csv")
    write_per_epoch_csv(run.store, pe, run.node_ids)
    files.append(pe)
    sj = os.path.join(out_dir, "summary.json")
    payload = {
        "scenario": {"strategy": run.strategy, "seed": run.master_seed,
                     "observed_node_id": run.node_ids[run.observed],
                     "rounds": run.rounds_run},
        run.strategy: run.store.summary(),
    }
    write_json(payload, sj)
    files.append(sj)
    return files


def emit_compare(result: CompareResult, out_dir) -> list:
    import os

    os.makedirs(out_dir, exist_ok=True)
    files = []
    first_seed = result.seeds[0]
    curves = {}
    for strategy, run in result.first_seed_runs.items():
        curves[strategy] = run.observed_epoch_means(bucket=1)
        pe = os.path.join(out_dir, f"per_epoch_{strategy}.csv")
        write_per_epoch_csv(run.store, pe, run.node_ids)
        files.append(pe)

    summary = {
        "scenario": {
            "name": result.config.name,
            "seeds": list(result.seeds),
            "strategies": list(result.strategies),
            "observed_node_index": result.observed[first_seed],
        },
        "medians": result.medians,
        "ratios": result.ratios,
        "per_seed": {
            f"{strategy}/{master}": stats
            for (strategy, master), stats in sorted(result.per_seed.items())
        },
    }
    sj = os.path.join(out_dir, "summary.json")
    write_json(summary, sj)
    files.append(sj)

    pj = os.path.join(out_dir, "paths.json")
    write_json({s: p for s, p in result.paths.items() if p}, pj)
    files.append(pj)

    svg = os.path.join(out_dir, "epochs.svg")
    plot_epoch_curves(curves, svg, f"{result.config.name}: observed bucket 1")
    files.append(svg)
    return files
