"""Molecular communication with a molecule-harvesting transmitter.

Analytic channel model (release, harvesting, RX observation), negative
feedback on release, on-off keyed BER, and a particle simulator to check
them against.
"""

from .analytic import (
    AbsorptionConstants,
    ChannelModel,
    absorbed_fraction,
    absorbed_fraction_limit,
    absorption_rate,
    convolve,
    no_receptor_prob,
    observed_prob,
    point_source_prob,
    receptor_loss_prob,
    release_rate,
    release_rate_derivative,
    uniform_absorption,
    uniform_release_prob,
)
from .capacitance import CapacitanceResult, capacitance, pair_interaction
from .eigen import EigenSpectrum, converged_spectrum, solve_spectrum, spectrum_for, weight_sum
from .link import (
    BerReport,
    LinkConfig,
    average_ber,
    ber_given_history,
    detection_time,
    min_ber_table,
    optimize_threshold,
    poisson_mean,
    sweep_nfm,
)
from .model import (
    ChannelParams,
    GridSpec,
    Receptor,
    ReceptorLayout,
    TimeSeries,
    explicit_layout,
    fibonacci_layout,
    heterogeneous_layout,
    random_layout,
    single_receptor_layout,
    validate_layout,
)
from .nfm import (
    NfmChannel,
    NfmConfig,
    nfm_absorbed_fraction,
    nfm_observed_prob,
    nfm_release_rate,
    recyclable_count,
    recyclable_fraction,
    unreleased_fraction,
)
from .pbs import PbsConfig, PbsRecord, run_ensemble, simulate_emission, surface_release

__version__ = "0.1.0"
