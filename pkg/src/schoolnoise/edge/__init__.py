"""Emulated classroom nodes: scenario, sensor path, windowing and uplink."""

from .node import EdgeNode, window_aggregate
from .scenario import EveningActivity, PeakEvent, ScenarioProfile, scenario_generate
from .uplink import DeliveryReport, HttpTransport, TransportError, Uplink

__all__ = [
    "EdgeNode",
    "window_aggregate",
    "EveningActivity",
    "PeakEvent",
    "ScenarioProfile",
    "scenario_generate",
    "DeliveryReport",
    "HttpTransport",
    "TransportError",
    "Uplink",
]
