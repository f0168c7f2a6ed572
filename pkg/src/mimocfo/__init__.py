"""Uplink massive MIMO with residual carrier frequency offsets.

Link-level simulator plus closed-form rate calculators for a K-user uplink
where each user's CFO is estimated from a dedicated pilot slot, channel
estimates are derotated, and detection runs ZF or MRC with a per-sample
phase correction.
"""
__version__ = "0.1.0"

from .config import (SystemConfig, RandomSource, SimulationError, ConfigError,
                     validate, snr, load_config, config_from_dict)
from .channel import (ChannelRealization, ReceivedBlock, crandn, draw_channel,
                      uplink_rx, noiseless_rx)
from .cfo import (CfoPilotSchedule, CfoEstimate, DegenerateBlocksError,
                  build_schedule, transmit_matrix, estimate_cfo,
                  cfo_mse_closed_form, gamma_threshold)
from .chanest import (ChannelEstimate, pilot_matrix, mmse_estimate,
                      estimate_entry_variance, error_covariance)
from .detection import (Detector, SingularGramError, ComponentPowers,
                        build_detector, detect, detect_block,
                        measure_components, measure_components_joint)
from .rates import (RateReport, sinr_zf, sinr_mrc, sinr_profile, user_rate,
                    montecarlo_rate_report, limiting_cfo_mse, asymptotic_sinr,
                    zf_gram_inverse_mean, gram_moments,
                    wishart_inverse_trace_mean, sample_gram_statistics,
                    sample_wishart_inverse_trace)
from .experiments import (SweepSpec, ExperimentResult, BracketError,
                          run_experiment, write_result_files, min_snr_for_rate,
                          snr_gap_table, measure_cfo_mse, omega_max_from_ppm,
                          build_id)
