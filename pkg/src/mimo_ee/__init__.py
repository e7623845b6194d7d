"""Energy-efficient downlink power allocation and user admission for massive MIMO."""

from .admission import AdmissionResult, admit_users, remaining_power
from .channel import ChannelState, GeometryConfig, build_channel
from .config import ExperimentConfig, SystemConfig, load_config, parse_config
from .ee_solver import SolverConfig, SolverResult, solve_ee
from .errors import (ConfigError, ConvergenceError, InfeasibleInputError,
                     NoFeasiblePointError, UnattainableTargetError)
from .experiment import SweepRow, read_csv, run_sweep, run_trial, write_csv
from .kernels import BACKEND
from .link_metrics import (LinkParams, PowerAllocation, asymptotic_sinr, energy_efficiency,
                           exact_sinr, lower_bound_rate, sum_rate, user_rate)
from .qos import FeasibilityVerdict, QosSpec, check_feasibility, min_required_powers

__version__ = "0.1.0"
