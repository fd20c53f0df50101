"""kadsim: deterministic Kademlia lookup-latency simulator.

Simulates recursive and iterative Kademlia lookups over synthetic (unit
square) and measurement-derived (city ping matrix) network models, with four
routing-table strategies: random tables (vanilla), proximity routing (pr),
proximity neighbor selection (pns), and an online bandit learner that
reshapes buckets from observed query delays (kadabra).
"""

__version__ = "0.1.0"

from .errors import ConfigError, DatasetError  # noqa: E402,F401
from .harness import (  # noqa: E402,F401
    ScenarioConfig,
    before_after_histogram,
    build_shared,
    compare,
    load_config,
    run_scenario,
)
from .scenarios import CATALOG, scenario  # noqa: E402,F401
