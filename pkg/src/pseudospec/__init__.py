"""Frequency-domain analysis of multivariate inhomogeneous spatial point patterns."""
from .bandwidth import CvConfig, cv_objective, optimal_bandwidth, select_bandwidth_cv
from .bench import StudyConfig, StudyReport, empirical_coherence, ibias2, imse, radial_average, run_study
from .errors import *  # noqa: F401,F403
from .geometry import (FrequencyGrid, HermitianField, MultitypePattern, Window, assert_hermitian_psd,
                       make_frequency_grid, read_pattern, write_pattern)
from .intensity import (ConstantIntensity, FitResult, LogLinearIntensity, dft_bias_vector, fit_intensity,
                        zero_intensity)
from .simulation import (CoxModelParams, SimulationConfig, closed_form_L2, cox_covariance,
                         reweight_by_thinning, sample_cox_pattern, sample_poisson)
from .spectral import (DftVector, KernelSpec, Periodogram, SpectrumEstimate, compute_dft, feasible_periodogram,
                       kernel_smooth, leave_one_out_smooth)
from .taper import CosineBellTaper, Taper, UnitTaper, make_taper, taper_moment, taper_value
from .theory import (AnalyticPseudoSpectrum, ReweightedCovariance, inverse_fourier_L2, local_spectrum,
                     pseudo_spectrum, reweighted_spectrum_and_coherence)

__version__ = "0.1.0"
