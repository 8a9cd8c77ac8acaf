"""photonstat: single-atom fluorescence detection, simulated and analyzed.

Generates photon time-tag streams from atoms transiting a detection region
(down to quantum antibunching via a quantum-jump two-level atom) and
implements the matching statistical chain: binned count moments,
counts-per-atom extraction, time-interval analysis, and normalized
second-order correlation g2.
"""

from photonstat.model import (
    GAMMA_RB87,
    AtomSourceConfig,
    BurstEmission,
    DetectorConfig,
    ExperimentConfig,
    ExponentialDwell,
    FixedDwell,
    IdealPoissonEmission,
    McwfEmission,
    RunConfig,
    TimeTag,
    TimeTagStream,
    TwoLevelParams,
    Violation,
    concat_streams,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
    validate,
)

__version__ = "0.1.0"
