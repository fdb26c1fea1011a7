"""Energy-efficiency optimization for movable-antenna uplink systems."""

from .channel import (ChannelRealization, GainExpansion, PathGeometry,
                      channel_gain, channel_vector, field_response,
                      gain_expansion, hermitian_expansion, quantize_aods,
                      quantized_period, sample_channel, sample_channels,
                      two_path_period, virtual_aod)
from .energy import (BlockMetrics, MotorSpec, SystemScenario,
                     UserEnergyProfile, block_metrics, energy_rate,
                     motor_energy, motor_energy_3d, movement_delay, sinr)
from .errors import (BadStart, BlockExhausted, DegenerateLocalPoint,
                     DegeneratePaths, Infeasible, InfeasibleThroughput,
                     MaeeError, OutOfRegion, ZeroCombiner, ZeroEnergy,
                     ZeroGain)
from .harness import (ExperimentConfig, SchemeResult, SweepResult,
                      baseline_fpa, baseline_max_snr, baseline_max_throughput,
                      load_config, run_scheme, run_sweep)
from .multi_user import (Algorithm2Result, SolveState, SurrogateData,
                         algorithm2, bilinear_lower_bound,
                         bilinear_upper_bound, build_position_subproblem,
                         build_power_subproblem, build_surrogates,
                         channel_matrix, curvature_bound,
                         dinkelbach_alpha_multi, h_jk_derivative, h_jk_value,
                         initialize_state, mmse_combining,
                         optimize_powers_at_positions, pair_matrix,
                         rebuild_slacks, surrogate_bounds)
from .single_user import (DinkelbachConstants, GridSpec, SingleUserSolution,
                          clamp_power, default_subregions, dinkelbach_alpha,
                          dinkelbach_objective, ee_upper_bound,
                          exhaustive_search, optimize_power, power_threshold,
                          quantized_search, unconstrained_power)
from .solver import (Constraint, ConstraintBlock, SmoothProgram, SolveReport,
                     SolveStatus, check_gradients, linear_constraint, solve)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
