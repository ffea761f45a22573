"""Deterministic discrete-event simulation of PoF sessions under attack."""

from .adversary import MitmDelayed, MitmKnownVerifier, MitmParallel, PassiveTap
from .engine import (Delay, Drop, EventLoop, Inject, NetEvent, Network, Record, Relay,
                     Transcript, WireFrame)
from .runner import (AttackScenario, ScenarioError, SimReport, distance_traces, pair_decision,
                     pair_rhos,
                     pair_traces, partially_following_sweep, run_simulation)
from .world import SCENARIO_KINDS, World, default_stations

__all__ = [
    "AttackScenario", "Delay", "Drop", "EventLoop", "Inject", "MitmDelayed",
    "MitmKnownVerifier", "MitmParallel", "NetEvent", "Network", "PassiveTap", "Record",
    "Relay", "SCENARIO_KINDS", "ScenarioError", "SimReport", "Transcript", "WireFrame",
    "World", "default_stations", "distance_traces", "pair_decision", "pair_rhos", "pair_traces",
    "partially_following_sweep", "run_simulation",
]
