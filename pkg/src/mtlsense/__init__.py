"""Multi-task neural-network regression of oxygen concentration and temperature
from frequency-domain luminescence-quenching features."""
from .dataset import Dataset, Normalization, generate, normalize_targets, split
from .harness import ExperimentConfig, build_architecture, run_experiment, weight_sweep
from .metrics import EvalReport, absolute_errors, kde, mean_absolute_error, scott_bandwidth
from .network import Branch, NetworkSpec, backward, build, forward, loss, predict
from .optimizer import AdamState, TrainConfig, TrainTrace, adam_step, train
from .physics import PhysicsParams, feature_vector, tan_theta_ratio

__version__ = "0.1.0"
