"""Deterministic network simulator and threat scenarios."""
from .network import NetworkModel, Scheduler, SimEvent, TamperRule, inject_drop, inject_latency, inject_tamper
from .scenario import (THREATS, ConfigError, Scenario, ScenarioError, ScenarioReport, run_scenario,
                       scenario_from_dict, threat_scenario)
from .suite import THREAT_IDS, ThreatRow, coverage_gaps, detection_rate, run_threat_suite
