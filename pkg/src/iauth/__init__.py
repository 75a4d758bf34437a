"""Implicit continuous authentication from phone and watch inertial sensors."""
from .evaluation import (CvConfig, Metrics, TrainerConfig, compute_metrics, cross_validate, escape_probability,
                         simulate_masquerade, sweep_data_size, sweep_window_size)
from .features import AuthVector, extract_features, feature_matrix
from .krr import KernelSpec, KrrModel, classify, score, train, train_dual, train_primal
from .pipeline import SessionPolicy, enroll_step, run_session
from .sensors import Device, PairedTrace, Sensor, SensorStream, parse_trace, read_trace, resample, write_trace
from .synth import UserProfile, gait_profile, synthesize_user_trace

__version__ = "0.1.0"
