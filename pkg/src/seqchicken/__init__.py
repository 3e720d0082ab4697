"""Sequential-chicken pedestrian/vehicle crossing toolkit.

Subpackages cover the recursive game solver (:mod:`seqchicken.game`), the
vehicle speed-controller emulation (:mod:`seqchicken.controller`), the
discrete and continuous simulators (:mod:`seqchicken.simulate`), the
crossing-log schema (:mod:`seqchicken.records`), the behavioral fitting
pipeline (:mod:`seqchicken.fitting`), the live crossing service
(:mod:`seqchicken.service`) and the command line front end
(:mod:`seqchicken.cli`).
"""

from seqchicken.game import (
    ACTIONS,
    Action,
    BoardBoundsError,
    DegenerateGameError,
    Equilibrium,
    EquilibriumKind,
    GameParams,
    GameState,
    PayoffMatrix,
    UtilityPair,
    build_stage_matrix,
    crash,
    cumulative_no_yield,
    game_value,
    policy,
    solve_stage_game,
    yield_curve_model,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "Action",
    "BoardBoundsError",
    "DegenerateGameError",
    "Equilibrium",
    "EquilibriumKind",
    "GameParams",
    "GameState",
    "PayoffMatrix",
    "UtilityPair",
    "build_stage_matrix",
    "crash",
    "cumulative_no_yield",
    "game_value",
    "policy",
    "solve_stage_game",
    "yield_curve_model",
    "__version__",
]
