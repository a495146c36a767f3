from swarmpc.solver.alm import AlmSettings, SolverOutcome, Status, alm_solve, infeasibility
from swarmpc.solver.panoc import PanocResult, panoc_solve
from swarmpc.solver.problem import (
    BoxSet,
    Budget,
    NonFiniteOracle,
    ParametricProblem,
    project_box,
    psi_grad,
    psi_value,
    psi_value_and_grad,
)

__all__ = [
    "AlmSettings",
    "BoxSet",
    "Budget",
    "NonFiniteOracle",
    "PanocResult",
    "ParametricProblem",
    "SolverOutcome",
    "Status",
    "alm_solve",
    "infeasibility",
    "panoc_solve",
    "project_box",
    "psi_grad",
    "psi_value",
    "psi_value_and_grad",
]
