"""Timestamp-based reconstruction for boson sampling experiments."""
from .advantage import (ADVANTAGE_STEPS, advantage_table, computational_steps, efficiency_curve,
                        equivalent_photon_number, required_efficiency, sampling_rate)
from .config import ExperimentConfig, preset
from .distribution import (Distribution, distribution_metrics, enumerate_combinations,
                           exact_distribution, uniform_distribution)
from .events import EventLog, SourceConfig, duration_for_events, simulate_event_log
from .matrix import (CharacterizationTable, TransferMatrix, assemble_transfer_matrix,
                     check_unitarity, haar_random_unitary)
from .permanent import distinguishable_probability, indistinguishable_probability, permanent_ryser
from .pipeline import emit_figure_data, run_pipeline
from .reconstruction import counting_estimate, reshape_filter, subspace_metrics, timestamp_estimate
from .tofs import calibrate_delays, emit_tofs_streams, extract_coincidences, parse_streams
from .validation import likelihood_ratio_test, row_norm_test

__version__ = "0.1.0"
