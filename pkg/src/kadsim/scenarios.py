"""Named scenario presets mirroring the experiment grid.

Each entry returns a fresh ScenarioConfig; callers may override fields
afterwards. Square scenarios use abstract time units on a 10000 x 10000
plane; real-world scenarios use milliseconds over the bundled city ping
fixture.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import ConfigError
from .harness import ScenarioConfig

ADVERSARY_RHO_QUANTILE = 0.25

# Catalog presets explore two bucket slots per exploration epoch: the
# learner's single-swap default converges too slowly to close the gap to
# the RTT-optimal baseline within a 50-epoch horizon.
CATALOG_EXPLORE_COUNT = 2


def _square(name: str, **kw) -> ScenarioConfig:
    kw.setdefault("explore_count", CATALOG_EXPLORE_COUNT)
    return ScenarioConfig(name=name, topology="square", **kw).validate()


def _real_world(name: str, **kw) -> ScenarioConfig:
    kw.setdefault("explore_count", CATALOG_EXPLORE_COUNT)
    return ScenarioConfig(name=name, topology="real_world", **kw).validate()


def square_uniform() -> ScenarioConfig:
    return _square("square-uniform")


def square_hotspot() -> ScenarioConfig:
    return _square("square-hotspot", demand="hotspot")


def square_skew() -> ScenarioConfig:
    # center region with upload delay pinned high; the observation node is the
    # innermost member.  The region covers a quarter of the plane so
    # proximity-greedy first hops stay inside it, and the plane is kept small
    # so detour links out of the region stay cheap against the 5000 delay.
    return _square(
        "square-skew",
        side=2000.0, noise_hi=500.0, known_peers=511,
        region_center=(1000.0, 1000.0), region_size=(1000.0, 1000.0),
        region_delta=5000.0, observe_inside_region=True,
    )


def square_noise() -> ScenarioConfig:
    return _square("square-noise", noise_amplitude=0.05)


def square_dht() -> ScenarioConfig:
    return _square("square-dht", app="dht")


def square_replay() -> ScenarioConfig:
    # smaller network, shorter epochs and tighter buckets so 2e5 rounds
    # cover enough learning for a before/after histogram: five slots leave
    # a visible gap between a random bucket and the best-five-of-band
    return _square(
        "square-replay",
        nodes=96, b=20, k=5, rounds=200_000,
        strategies=("vanilla", "kadabra"),
    )


def real_world_uniform() -> ScenarioConfig:
    return _real_world("rw-uniform")


def real_world_hotspot() -> ScenarioConfig:
    return _real_world("rw-hotspot", demand="hotspot")


def real_world_skew() -> ScenarioConfig:
    # nodes within 500 km of New York get twice the network-mean upload delay
    return _real_world(
        "rw-skew",
        region_city="NewYork", region_radius_km=500.0, region_times_mean=2.0,
    )


def real_world_noise() -> ScenarioConfig:
    return _real_world("rw-noise", noise_amplitude=0.05)


def real_world_adv_random() -> ScenarioConfig:
    return _real_world(
        "rw-adv-random",
        adv_fraction=0.2, adv_multiplier=3.0, adv_placement="random",
        rho_quantile=ADVERSARY_RHO_QUANTILE,
    )


def real_world_adv_concentrated() -> ScenarioConfig:
    # adversaries are the victim's RTT-nearest 20%; the victim is the
    # observation node
    return _real_world(
        "rw-adv-concentrated",
        adv_fraction=0.2, adv_multiplier=3.0, adv_placement="concentrated",
        rho_quantile=ADVERSARY_RHO_QUANTILE,
    )


def real_world_dht() -> ScenarioConfig:
    return _real_world("rw-dht", app="dht")


def real_world_iterative() -> ScenarioConfig:
    return _real_world("rw-iterative", mode="iterative")


CATALOG = {
    "square-uniform": square_uniform,
    "square-hotspot": square_hotspot,
    "square-skew": square_skew,
    "square-noise": square_noise,
    "square-dht": square_dht,
    "square-replay": square_replay,
    "rw-uniform": real_world_uniform,
    "rw-hotspot": real_world_hotspot,
    "rw-skew": real_world_skew,
    "rw-noise": real_world_noise,
    "rw-adv-random": real_world_adv_random,
    "rw-adv-concentrated": real_world_adv_concentrated,
    "rw-dht": real_world_dht,
    "rw-iterative": real_world_iterative,
}


def scenario(name: str, **overrides) -> ScenarioConfig:
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}; pick one of {sorted(CATALOG)}")
    cfg = CATALOG[name]()
    if overrides:
        cfg = replace(cfg, **overrides).validate()
    return cfg
