"""cellsim: a discrete-time cellular network simulator with optimizers.

Subpackages
-----------
::

 scenario  -- static world synthesis, JSON schema, grid partition
 mobility  -- A* lane routing, car following, indoor motion, schedules
 demand    -- diurnal traffic pattern library and per-user demand processes
 channel   -- link budgets, fading, SINR, Shannon rates
 radio     -- allocations, default association/power rules, KPIs
 engine    -- the stepped constrained-MDP environment
 alloc     -- demand-decoupled allocator (matching + power) and baselines
 sleep     -- cell sleep scheduling over grids with an energy model
 cli       -- gen-scenario / allocate / sleep / report commands
"""

__version__ = "0.1.0"

from .scenario import (AoI, BaseStationSite, Building, GenerationSpec, GridPartition,
                       LaneGraph, Scenario, build_grid, generate_scenario,
                       load_scenario, save_scenario)
from .channel import (AntennaPattern, FadingModel, LinkBudget, RadioConfig,
                      free_space_loss, los_check, min_power_for_rate, noise_power,
                      path_loss, shannon_rate)
from .radio import Allocation, ConstraintViolation, KpiRecord
from .engine import CmdpEnv, EpisodeConfig, run_episode, satisfaction_ratio
from .alloc import (DemandController, DemandDecoupledPolicy, EquallyDividingPolicy,
                    IgnoreDemandsPolicy, hungarian)
from .sleep import CellFleet, EnergyModel, build_cell_fleet, run_week

__all__ = [name for name in dir() if not name.startswith("_")]
