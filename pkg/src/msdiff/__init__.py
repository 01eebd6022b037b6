"""Multiscale diffusions: homogenized limits, ergodic averages and drift estimation."""

from .model import (AssumptionError, HomogenizedSpec, ModelSpec, ScheduleConfig, check_model,
                    drift_eps, homogenize)
from .report import Decision, ExperimentReport

__all__ = ["AssumptionError", "Decision", "ExperimentReport", "HomogenizedSpec", "ModelSpec",
           "ScheduleConfig", "check_model", "drift_eps", "homogenize"]
