"""Scenario config, shared setup wiring, emission, and CLI round trips."""

import json
import math
import os
from dataclasses import replace

import numpy as np
import pytest

from kadsim.cli import main as cli_main
from kadsim.errors import ConfigError
from kadsim.harness import (
    PER_EPOCH_HEADER,
    PER_QUERY_HEADER,
    ScenarioConfig,
    auto_round_cap,
    before_after_histogram,
    build_shared,
    compare,
    config_from_dict,
    emit_compare,
    emit_run,
    load_config,
    make_simulation,
    read_per_query_csv,
    run_scenario,
    write_per_query_csv,
)
from kadsim.metrics import MetricsStore
from kadsim.scenarios import CATALOG, scenario


def tiny_config(**overrides) -> ScenarioConfig:
    base = dict(name="tiny", seed=11, nodes=24, id_bits=10, known_peers=16,
                k=4, b=5, target_epochs=3)
    base.update(overrides)
    return ScenarioConfig(**base).validate()


FULL_TOML = """
[scenario]
name = "full"
seed = 3
rounds = 120
target_epochs = 7
app = "dht"
mode = "iterative"
strategy = "pns"
strategies = ["vanilla", "kadabra"]

[topology]
kind = "square"
nodes = 20
id_bits = 12
known_peers = 10
side = 800.0
noise = [10.0, 50.0]
delta = [5.0, 20.0]

[table]
k = 3
alpha = 2
replicas = 2

[learner]
b = 9
margin = 1.5
smoothing = 0.3
explore_count = 2
rho_vector = [100.0, 50.0]

[demand]
kind = "hotspot"
hot_fraction = 0.25
hot_mass = 0.7
dht_keys = 40

[adversary]
fraction = 0.1
multiplier = 2.5
placement = "random"

[noise]
amplitude = 0.02

[observe]
node = 4
"""


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def test_toml_round_trips_every_section(tmp_path):
    path = tmp_path / "full.toml"
    path.write_text(FULL_TOML)
    cfg = load_config(str(path))
    assert cfg.name == "full"
    assert (cfg.seed, cfg.rounds, cfg.target_epochs) == (3, 120, 7)
    assert (cfg.app, cfg.mode, cfg.strategy) == ("dht", "iterative", "pns")
    assert cfg.strategies == ("vanilla", "kadabra")
    assert (cfg.topology, cfg.nodes, cfg.id_bits, cfg.known_peers) == ("square", 20, 12, 10)
    assert (cfg.side, cfg.noise_lo, cfg.noise_hi) == (800.0, 10.0, 50.0)
    assert (cfg.delta_lo, cfg.delta_hi) == (5.0, 20.0)
    assert (cfg.k, cfg.alpha, cfg.replicas) == (3, 2, 2)
    assert (cfg.b, cfg.margin, cfg.smoothing, cfg.explore_count) == (9, 1.5, 0.3, 2)
    assert cfg.rho_vector == (100.0, 50.0)
    assert (cfg.demand, cfg.hot_fraction, cfg.hot_mass, cfg.dht_keys) == ("hotspot", 0.25, 0.7, 40)
    assert (cfg.adv_fraction, cfg.adv_multiplier, cfg.adv_placement) == (0.1, 2.5, "random")
    assert cfg.noise_amplitude == 0.02
    assert cfg.observe_node == 4


def test_config_name_defaults_to_file_stem(tmp_path):
    path = tmp_path / "stem_name.toml"
    path.write_text("[topology]\nnodes = 8\n")
    assert load_config(str(path)).name == "stem_name"


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        config_from_dict({"table": {"k": 4, "kk": 9}})
    with pytest.raises(ConfigError, match="unknown config sections"):
        config_from_dict({"tables": {"k": 4}})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario\nseed = 1")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(str(bad))


@pytest.mark.parametrize("field,value,msg", [
    ("strategy", "fastest", "strategy"),
    ("app", "torrent", "app"),
    ("mode", "parallel", "mode"),
    ("topology", "torus", "topology"),
    ("nodes", 1, "at least 2"),
    ("alpha", -1, "alpha"),
    ("adv_fraction", 1.5, "adv_fraction"),
    ("adv_placement", "ring", "placement"),
    ("noise_amplitude", 1.0, "noise_amplitude"),
    ("demand", "zipf", "demand"),
    ("rho_quantile", 1.0, "rho_quantile"),
    ("observe_node", 99999, "observe_node"),
    ("observe_inside_region", True, "region"),
])
def test_validation_rejects_bad_fields(field, value, msg):
    with pytest.raises(ConfigError, match=msg):
        tiny_config(**{field: value})


def test_validation_cross_field_rules():
    with pytest.raises(ConfigError, match="single path"):
        tiny_config(app="kbr", alpha=2)
    with pytest.raises(ConfigError, match="not both"):
        tiny_config(rho_vector=(1.0,), rho_quantile=0.2)
    with pytest.raises(ConfigError, match="region_size"):
        tiny_config(region_center=(1.0, 1.0), region_delta=5.0)
    with pytest.raises(ConfigError, match="exactly one of"):
        tiny_config(region_center=(1.0, 1.0), region_size=(2.0, 2.0))
    with pytest.raises(ConfigError, match="exactly one of"):
        tiny_config(region_center=(1.0, 1.0), region_size=(2.0, 2.0),
                    region_delta=5.0, region_times_mean=2.0)
    with pytest.raises(ConfigError, match="not both"):
        tiny_config(region_center=(1.0, 1.0), region_size=(2.0, 2.0),
                    region_delta=5.0, region_city="NewYork")


def test_catalog_presets_validate():
    for name, factory in CATALOG.items():
        cfg = factory()
        assert cfg.name == name
        assert cfg.validate() is cfg
    assert scenario("square-replay").rounds == 200_000
    with pytest.raises(ConfigError, match="unknown scenario"):
        scenario("square-cubed")
    # overrides re-validate
    assert scenario("square-uniform", nodes=64).nodes == 64
    with pytest.raises(ConfigError):
        scenario("square-uniform", nodes=1)


# ---------------------------------------------------------------------------
# shared setup wiring
# ---------------------------------------------------------------------------

def test_shared_setup_is_deterministic_per_seed():
    cfg = tiny_config()
    a = build_shared(cfg, 5)
    b = build_shared(cfg, 5)
    c = build_shared(cfg, 6)
    assert a.node_ids == b.node_ids
    assert a.schedule.sources == b.schedule.sources
    assert a.schedule.keys == b.schedule.keys
    assert a.observed == b.observed
    assert (a.schedule.sources, a.schedule.keys) != (c.schedule.sources, c.schedule.keys)


def test_kbr_schedule_keys_are_node_ids():
    shared = build_shared(tiny_config(), 0)
    ids = set(shared.node_ids)
    assert set(shared.schedule.keys) <= ids
    assert shared.dht_keyspace is None
    # a source never looks up its own id
    own = [shared.node_ids[s] for s in shared.schedule.sources]
    assert all(k != o for k, o in zip(shared.schedule.keys, own))


def test_dht_schedule_draws_from_stored_keyspace():
    cfg = tiny_config(app="dht", dht_keys=30)
    shared = build_shared(cfg, 0)
    assert len(shared.dht_keyspace) == 30
    assert set(shared.schedule.keys) <= set(shared.dht_keyspace)
    sim = make_simulation(cfg, shared, "vanilla")
    stored = set().union(*[s for s in sim.store if s])
    assert stored == set(shared.dht_keyspace)


def test_square_region_override_and_observation():
    cfg = tiny_config(
        nodes=48,
        region_center=(5000.0, 5000.0), region_size=(6000.0, 6000.0),
        region_delta=777.0, observe_inside_region=True,
    )
    shared = build_shared(cfg, 1)
    topo = shared.topology
    assert shared.region_members
    for i, node in enumerate(topo.nodes):
        x, y = node.location
        inside = abs(x - 5000.0) <= 3000.0 and abs(y - 5000.0) <= 3000.0
        assert (i in shared.region_members) == inside
        if inside:
            assert node.delta == 777.0
    assert shared.observed in shared.region_members
    # the observer is the innermost member, so region runs are placement-luck free
    def dist(i):
        x, y = topo.nodes[i].location
        return math.hypot(x - 5000.0, y - 5000.0)
    assert shared.observed == min(shared.region_members, key=lambda i: (dist(i), i))


def test_concentrated_adversaries_surround_the_observed_node():
    cfg = tiny_config(nodes=40, adv_fraction=0.2, adv_placement="concentrated")
    shared = build_shared(cfg, 2)
    topo = shared.topology
    flags = [n.adversarial for n in topo.nodes]
    assert sum(flags) == 8
    obs = shared.observed
    assert not topo.nodes[obs].adversarial
    by_rtt = sorted((i for i in range(40) if i != obs),
                    key=lambda i: topo.latency[obs][i])
    assert set(i for i in range(40) if flags[i]) == set(by_rtt[:8])


def test_rho_quantile_sets_per_node_floors():
    cfg = tiny_config(nodes=30, rho_quantile=0.25)
    shared = build_shared(cfg, 3)
    lat = shared.topology.latency
    for i in (0, 7, 29):
        rtts = np.delete(lat[i], i) * 2.0
        assert shared.rho_by_node[i] == pytest.approx(np.quantile(rtts, 0.25))


def test_auto_round_cap_formula():
    cfg = tiny_config(nodes=512, b=100, target_epochs=50)
    assert auto_round_cap(cfg) == math.ceil(1.4 * 50 * 100 * 2 * 512)


def test_run_stops_near_the_target_epoch_count():
    cfg = tiny_config(nodes=128, id_bits=12, known_peers=64, b=16,
                      target_epochs=4, seed=10)
    run = run_scenario(cfg, strategy="kadabra", collect_queries=False)
    assert len(run.observed_epoch_means()) >= 4
    assert run.rounds_run < auto_round_cap(cfg)  # early stop fired


def test_initial_tables_identical_across_strategies():
    cfg = tiny_config()
    shared = build_shared(cfg, 4)
    sim_v = make_simulation(cfg, shared, "vanilla")
    sim_k = make_simulation(cfg, shared, "kadabra")
    assert sim_v.buckets_by_node == sim_k.buckets_by_node


# ---------------------------------------------------------------------------
# comparison runs
# ---------------------------------------------------------------------------

def test_compare_medians_ratios_and_paths():
    cfg = tiny_config()
    res = compare(cfg, seeds=3)
    assert res.seeds == (11, 12, 13)
    assert set(res.first_seed_runs) == set(cfg.strategies)
    for strategy in cfg.strategies:
        stats = res.medians[strategy]
        assert stats["rounds"] > 0 and stats["mean"] > 0
        assert "converged" in stats and "epoch0" in stats
        path = res.paths[strategy]
        assert path["success"] and path["path_ids"][-1] == path["target_key"]
    assert res.ratios["kadabra"]["vs_vanilla"] > 0
    assert res.ratios["kadabra"]["vs_pns"] > 0
    assert "vs_vanilla" not in res.ratios["vanilla"]
    # paired: every strategy saw the same observed node per seed
    assert len(res.observed) == 3


def test_before_after_histogram_replays_head_as_tail():
    cfg = tiny_config(rounds=400, seed=21)
    first, last, ratio, run = before_after_histogram(cfg, 50, strategy="vanilla")
    assert len(first) == len(last) == 50
    # vanilla is static: the replayed head behaves identically
    assert np.allclose(first, last)
    assert ratio == pytest.approx(1.0)
    with pytest.raises(ConfigError, match="explicit round"):
        before_after_histogram(tiny_config(rounds=0), 50)
    with pytest.raises(ConfigError, match="fit twice"):
        before_after_histogram(cfg, 201)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def test_emit_run_round_trips_and_matches_summary(tmp_path):
    cfg = tiny_config(rounds=150)
    run = run_scenario(cfg, collect_queries=True)
    files = emit_run(run, tmp_path)
    assert [os.path.basename(f) for f in files] == [
        "per_query.csv", "per_epoch.csv", "summary.json"]

    parsed = read_per_query_csv(files[0])
    assert parsed["round"] == list(range(150))
    assert set(parsed["strategy"]) == {"kadabra"} and set(parsed["app"]) == {"kbr"}
    lat = np.array(parsed["latency"])
    summary = json.loads(open(files[2]).read())["kadabra"]
    assert summary["mean"] == pytest.approx(float(lat.mean()))
    for pct in (50, 90, 99):
        assert summary[f"p{pct}"] == pytest.approx(float(np.percentile(lat, pct)))
    assert summary["success_rate"] == pytest.approx(np.mean(parsed["success"]))

    with open(files[1]) as fh:
        head = fh.readline().strip()
        rows = fh.read().splitlines()
    assert head == PER_EPOCH_HEADER
    assert rows, "expected at least one completed epoch"
    node_ids = set(run.node_ids)
    for row in rows:
        fields = row.split(",")
        assert int(fields[0]) in node_ids
        assert fields[4] in ("explore", "keep", "revert", "noop")


def test_header_lines_match_interface():
    assert PER_QUERY_HEADER == "round,source_id,target_key,strategy,app,latency,hops,success"
    assert PER_EPOCH_HEADER == "node_id,bucket,epoch,mean_latency,action,bucket_score,delta"


def test_empty_store_emits_header_only(tmp_path):
    store = MetricsStore("vanilla", "kbr")
    path = tmp_path / "pq.csv"
    write_per_query_csv(store, path)
    assert path.read_text() == PER_QUERY_HEADER + "\n"


def test_single_query_row_fully_populated(tmp_path):
    store = MetricsStore("pns", "dht")
    store.record_query(0, 17, 42, 123.5, 3, True)
    path = tmp_path / "pq.csv"
    write_per_query_csv(store, path)
    assert path.read_text().splitlines()[1] == "0,17,42,pns,dht,123.5,3,1"


def test_lightweight_store_refuses_per_query_emission(tmp_path):
    cfg = tiny_config(rounds=40)
    run = run_scenario(cfg, collect_queries=False)
    with pytest.raises(ConfigError, match="per-query"):
        write_per_query_csv(run.store, tmp_path / "pq.csv")


def test_repeated_runs_emit_identical_bytes(tmp_path):
    cfg = tiny_config(rounds=120)
    for d in ("a", "b"):
        emit_run(run_scenario(cfg, collect_queries=True), tmp_path / d)
    for name in ("per_query.csv", "per_epoch.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_emit_compare_writes_full_bundle(tmp_path):
    cfg = tiny_config(strategies=("vanilla", "kadabra"))
    res = compare(cfg, seeds=2)
    files = {os.path.basename(f) for f in emit_compare(res, tmp_path)}
    assert files == {"per_epoch_vanilla.csv", "per_epoch_kadabra.csv",
                     "summary.json", "paths.json", "epochs.svg"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["scenario"]["name"] == "tiny"
    assert set(summary["medians"]) == {"vanilla", "kadabra"}
    assert "kadabra/11" in summary["per_seed"]
    paths = json.loads((tmp_path / "paths.json").read_text())
    assert set(paths) == {"vanilla", "kadabra"}


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

TINY_TOML = """
[scenario]
name = "tiny"
seed = 11
target_epochs = 3

[topology]
nodes = 24
id_bits = 10
known_peers = 16

[table]
k = 4

[learner]
b = 5
"""


def write_tiny(tmp_path, extra: str = "") -> str:
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_TOML + extra)
    return str(path)


def test_cli_simulate(tmp_path, capsys):
    cfg_path = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert cli_main(["simulate", "--config", cfg_path, "--out", str(out), "--seed", "42"]) == 0
    stdout = capsys.readouterr().out
    assert "seed=42" in stdout
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"]["seed"] == 42
    with open(out / "per_query.csv") as fh:
        assert fh.readline().strip() == PER_QUERY_HEADER


def test_cli_compare_with_panel(tmp_path, capsys):
    cfg_path = write_tiny(tmp_path)
    out = tmp_path / "cmp"
    rc = cli_main(["compare", "--config", cfg_path, "--seeds", "2",
                   "--out", str(out), "--panel-nodes", "0,1"])
    assert rc == 0
    assert (out / "epochs.svg").exists() and (out / "panel.svg").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"]["seeds"] == [11, 12]


def test_cli_replay_histogram(tmp_path, capsys):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_TOML.replace(
        'seed = 11',
        'seed = 11\nrounds = 400\nstrategies = ["vanilla", "kadabra"]'))
    out = tmp_path / "rep"
    assert cli_main(["replay-histogram", "--config", str(path),
                     "--window", "50", "--out", str(out)]) == 0
    report = json.loads((out / "replay.json").read_text())
    assert report["p90"]["vanilla"]["ratio"] == pytest.approx(1.0)
    assert (out / "before_after_kadabra.svg").exists()


def test_cli_error_exit(tmp_path, capsys):
    rc = cli_main(["simulate", "--config", str(tmp_path / "none.toml"),
                   "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err
