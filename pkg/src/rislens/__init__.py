"""Near-field localization through a RIS lens with a single receive antenna."""
from .channel import (
    antenna_coupling, cm1_amplitude, cm1_steering, cm2_steering, cm3_amplitudes,
    correction_factor, synthesize_observations,
)
from .estimator import Estimate, SearchGrids, ThreeStageLocalizer, localize
from .fisher import FisherResult, efim_projection, efim_schur, fim_full, fisher_analysis, peb, prior_peb, snr
from .geometry import (
    RisArray, Scenario, SphericalCoords, build_ris_grid, cartesian_from_spherical,
    spherical_from_cartesian, wavevector,
)
from .profiles import PhaseProfileSet, PriorBelief, make_profiles

__version__ = "0.1.0"
