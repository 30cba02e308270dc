"""Python access to the cnca C++ core."""

from ._core import (
    AlgorithmConfig,
    Cmdp,
    CncaError,
    Instance,
    OUT_DIR_ENV,
    ScheduleSet,
    StepSchedule,
    binding_chain_cmdp,
    binding_chain_instance,
    induced_chain,
    make_instance,
    make_schedule_set,
    optimal_exponents,
    random_ergodic_cmdp,
    run,
    run_config,
    small_ergodic_instance,
    solve_oracle,
    stationary_distribution,
    sweep_config,
    validate_schedules,
    verify,
)

__all__ = [
    "AlgorithmConfig",
    "Cmdp",
    "CncaError",
    "Instance",
    "OUT_DIR_ENV",
    "ScheduleSet",
    "StepSchedule",
    "binding_chain_cmdp",
    "binding_chain_instance",
    "induced_chain",
    "make_instance",
    "make_schedule_set",
    "optimal_exponents",
    "random_ergodic_cmdp",
    "run",
    "run_config",
    "small_ergodic_instance",
    "solve_oracle",
    "stationary_distribution",
    "sweep_config",
    "validate_schedules",
    "verify",
]
