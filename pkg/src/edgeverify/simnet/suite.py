"""Threat matrix: many seeded runs per threat, summarised per row."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable

from ..contract import detection_probability
from ..engine.strategies import CheatRate
from .scenario import THREATS, ScenarioReport, apply_overrides, run_scenario, threat_scenario

THREAT_IDS = tuple(f"T{k}" for k in range(1, 10))


@dataclass
class ThreatRow:
    threat: str
    description: str
    technique: str
    runs: int = 0
    violations: int = 0
    caught: int = 0
    failed: int = 0
    mechanisms: Counter = field(default_factory=Counter)
    convicted: Counter = field(default_factory=Counter)
    conserved: bool = True
    honest_fined: int = 0
    honesty_dominant: bool = True
    analytic: float | None = None

    @property
    def rate(self) -> float:
        return self.caught / self.runs if self.runs else 0.0

    @property
    def probabilistic(self) -> bool:
        return THREATS[self.threat].probabilistic

    def add(self, rep: ScenarioReport) -> None:
        self.runs += 1
        self.violations += rep.violation
        self.caught += rep.detected
        self.failed += rep.outcome == "failed"
        if rep.mechanism:
            self.mechanisms[rep.mechanism] += 1
        if rep.convicted:
            self.convicted[rep.convicted] += 1
        self.conserved &= rep.conserved
        self.honest_fined += rep.honest_fined
        self.honesty_dominant &= rep.honesty_dominant

    def to_dict(self) -> dict:
        return {
            "kind": "threat_row", "threat": self.threat, "description": self.description,
            "technique": self.technique, "runs": self.runs, "violations": self.violations,
            "caught": self.caught, "failed": self.failed, "rate": self.rate,
            "analytic": self.analytic, "mechanisms": dict(sorted(self.mechanisms.items())),
            "convicted": dict(sorted(self.convicted.items())), "conserved": self.conserved,
            "honest_fined": self.honest_fined, "honesty_dominant": self.honesty_dominant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _analytic(threat: str, overrides: dict) -> float | None:
    if threat != "T1":
        return None
    sc = apply_overrides("T1", 0, overrides)
    if not isinstance(sc.contractor, CheatRate):
        return None
    intervals = -(-sc.n_inputs // sc.interval_size)
    return detection_probability(sc.contractor.rate, intervals)


def run_threat_suite(seeds: int | Iterable[int] = 0, repetitions: int = 1000,
                     threats: Iterable[str] = THREAT_IDS, *,
                     overrides: dict | None = None,
                     on_report: Callable[[ScenarioReport], None] | None = None) -> list[ThreatRow]:
    """One row per threat.

    ``seeds`` is either a starting seed (runs use ``seed .. seed+repetitions-1``)
    or an explicit seed list, in which case ``repetitions`` is ignored.
    """
    threats = list(threats)
    if not threats:
        raise ValueError("threat list is empty")
    for t in threats:
        if t not in THREATS:
            raise ValueError(f"unknown threat {t!r}")
    seed_list = list(range(seeds, seeds + repetitions)) if isinstance(seeds, int) else list(seeds)
    overrides = overrides or {}
    for t, o in overrides.items():
        if t not in THREATS:
            raise ValueError(f"override for unknown threat {t!r}")
        if not isinstance(o, dict):
            raise ValueError(f"override for {t} must be a mapping")
    rows = []
    for t in threats:
        spec = THREATS[t]
        row = ThreatRow(t, spec.description, spec.technique,
                        analytic=_analytic(t, overrides.get(t, {})))
        for s in seed_list:
            rep = run_scenario(apply_overrides(t, s, overrides.get(t, {})))
            row.add(rep)
            if on_report is not None:
                on_report(rep)
        rows.append(row)
    return rows


def detection_rate(seeds: Iterable[int], cheat_rate: float = 0.1, intervals: int = 44,
                   interval_size: int = 1) -> tuple[float, float]:
    """Empirical rate of full T1 runs that convict the Contractor, and the analytic value."""
    hits = runs = 0
    for s in seeds:
        rep = run_scenario(threat_scenario("T1", s, contractor=CheatRate(cheat_rate),
                                           n_inputs=intervals * interval_size,
                                           interval_size=interval_size))
        runs += 1
        hits += rep.convicted == "contractor"
    return hits / runs, detection_probability(cheat_rate, intervals)


def coverage_gaps() -> list[str]:
    """Threat ids with no scenario family; empty when coverage is complete."""
    missing = []
    for t in THREAT_IDS:
        try:
            threat_scenario(t, 0)
        except ValueError:
            missing.append(t)
    return missing + sorted(set(THREATS) - set(THREAT_IDS))
