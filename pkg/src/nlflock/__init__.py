"""nlflock: flocking and alignment dynamics with nonlinear velocity coupling.

Particle and diameter-envelope integrators, explicit invariant regions and
critical thresholds, asymptotic rate fitting, and a sweep harness over the
(p, alpha) parameter plane.
"""
from .kernels import (
    CappedPower,
    ConstantFloor,
    Kernel,
    NoTailClassError,
    SmoothTail,
    kernel_eval,
    kernel_primitive,
    tail_constants,
)
from .model import (
    SimParams,
    pairwise_dissipation_holds,
    params_from_config,
    params_to_config,
    phi_p,
)
from .integrate import (
    IntegrationError,
    IntegratorStats,
    Trajectory,
    linear_schedule,
    log_schedule,
    read_trajectory_csv,
    write_trajectory_csv,
    write_trajectory_json,
)
from .particles import (
    ParticleState,
    alignment_accel,
    diameters,
    init_two_particle,
    pair_coupling_constant,
)
from .particles import integrate as integrate_particles
from .envelope import (
    EnvelopeParams,
    EnvelopeState,
    alignment_constant,
    beta_sub,
    beta_sup,
    closed_form_global,
    envelope_rhs,
    global_extinction_time,
    integrate_envelope,
    integrate_log_scaled_Sb,
    integrate_scaled_S1,
    log_scaled_rhs_Sb,
    sb_gamma,
    scaled_rhs_S1,
    to_d1_coordinates,
    to_s1_coordinates,
    to_sb_coordinates,
)
from .regions import (
    ContainmentReport,
    NoAlignmentFloors,
    RegionSpec,
    Scenario2Box,
    WrongScenarioError,
    check_containment,
    d0_star,
    flocking_bound_fat_tail,
    flocking_bound_thin_tail,
    no_alignment_floor,
    no_alignment_floor_23,
    region_A_S1,
    region_B_S1_lower,
    scenario2_box,
    subcritical_membership,
    supercritical_membership,
    supercritical_thresholds,
)
from .rates import (
    LyapunovReport,
    RateFit,
    ScenarioClass,
    classify_scenario,
    fit_log_corrected,
    fit_power,
    lyapunov_series,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
