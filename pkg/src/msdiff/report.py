"""Experiment report container shared by the experiments and the emitters."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Decision:
    """One pass/fail check; always carries the threshold it was judged against."""

    name: str
    value: float
    threshold: float | None
    comparison: str
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        thr = "" if self.threshold is None else f" {self.comparison} {self.threshold:g}"
        return f"{status} {self.name}: {self.value:.6g}{thr}"


def at_most(name: str, value: float, threshold: float) -> Decision:
    return Decision(name, float(value), float(threshold), "<=", bool(value <= threshold))


def holds(name: str, ok: bool, comparison: str = "holds") -> Decision:
    return Decision(name, float(bool(ok)), None, comparison, bool(ok))


@dataclass
class ExperimentReport:
    experiment: str
    config: dict = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    # name -> (x values, y values) for plot-ready data files
    series: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    steps: int = 0
    wall_clock: float = 0.0
    flags: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(d.passed for d in self.decisions)

    def decision(self, name: str) -> Decision:
        for d in self.decisions:
            if d.name == name:
                return d
        raise KeyError(name)
