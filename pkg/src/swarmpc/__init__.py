"""Distributed NMPC collision avoidance for UAV swarms."""

from swarmpc.controller import (
    ControllerConfig,
    NmpcController,
    NmpcSolution,
    ObstacleSet,
    Setpoint,
    Weights,
    adapt_weights,
)
from swarmpc.metrics import Metrics, metrics_report
from swarmpc.model import Input, ModelParams, State, discrete_step, rollout
from swarmpc.priority import PriorityParams, SharedTrajectory, priority_weights, select_obstacles
from swarmpc.scenario import ScenarioConfig, builtin, load_scenario
from swarmpc.solver import AlmSettings, alm_solve, panoc_solve
from swarmpc.swarm import EstimatorConfig, RunLog, SimSettings, simulate

__all__ = [
    "AlmSettings",
    "ControllerConfig",
    "EstimatorConfig",
    "Input",
    "Metrics",
    "ModelParams",
    "NmpcController",
    "NmpcSolution",
    "ObstacleSet",
    "PriorityParams",
    "RunLog",
    "ScenarioConfig",
    "Setpoint",
    "SharedTrajectory",
    "SimSettings",
    "State",
    "Weights",
    "adapt_weights",
    "alm_solve",
    "builtin",
    "discrete_step",
    "load_scenario",
    "metrics_report",
    "panoc_solve",
    "priority_weights",
    "rollout",
    "select_obstacles",
    "simulate",
]
