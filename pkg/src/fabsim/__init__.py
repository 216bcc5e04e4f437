"""Deterministic discrete-event simulator for coherent interconnect
fabrics: port-routed switch topologies, duplex buses, device-managed
coherence with back-invalidation, and measurement-window metrics."""

from .config import ExperimentConfig, config_from_dict, load_config
from .metrics import RunSummary, summarize
from .simulation import Simulation

__all__ = ["ExperimentConfig", "RunSummary", "Simulation",
           "config_from_dict", "load_config", "summarize"]

__version__ = "1.0.0"
