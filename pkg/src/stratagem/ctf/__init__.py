"""Capture-the-flag simulator, scripted tactics and black-box evaluation."""
from .config import ConfigError, MacroActionDef, SimConfig, read_ini
from .policy import AgentView, CompiledTeam
from .tactics import TEAM_TACTICS, SwitchingTactics, TacticId, parse_team_tactic, scripted_tactic_step
from .world import (
    EligibilityError, EpisodeResult, EvalReport, Event, MacroObservation, SimulationError, WorldState,
    eligible_macros, evaluate_blackbox, observe, reset, reward_bounds, run_episode, run_macro_step,
    simulate_compiled, start_macro, step_primitive,
)

__all__ = [
    "AgentView", "CompiledTeam", "ConfigError", "EligibilityError", "EpisodeResult", "EvalReport", "Event",
    "MacroActionDef", "MacroObservation", "SimConfig", "SimulationError", "SwitchingTactics", "TEAM_TACTICS",
    "TacticId", "WorldState", "eligible_macros", "evaluate_blackbox", "observe", "parse_team_tactic",
    "read_ini", "reset", "reward_bounds", "run_episode", "run_macro_step", "scripted_tactic_step",
    "simulate_compiled", "start_macro", "step_primitive",
]
