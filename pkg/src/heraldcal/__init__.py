"""Absolute efficiency calibration of gated single-photon detectors with fibre photon pairs."""

from .calibration import (
    CalibrationResult,
    HeraldedEfficiencyCalibrator,
    MultiPairParams,
    calibrate,
    cw_click_probability,
    cw_reference_qe,
    deduce_qe,
    extract_sfwm_rate,
    fit_power_sweep,
    fit_raman,
    fit_zeta,
    multipair_ratio,
    qe_from_zeta,
    true_coincidence,
)
from .estimators import FitResult, GaussianPeakRegressor, PowerSweepRegressor, ThroughOriginRegressor
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    NegativeRateWarning,
    SchemaError,
    UnphysicalResultWarning,
)
from .jsa import (
    ConditionalSpectrum,
    SpectralFunctionParams,
    collection_efficiency,
    conditional_spectrum,
    deduce_sigma0_from_scan,
    spectral_function,
    xi_curve,
)
from .records import CountRecord, ScanRecord
from .simulator import (
    ChannelSpec,
    DetectorSpec,
    SourceCoefficients,
    expected_rates,
    simulate_power_sweep,
)
from .spectral import FiberSpec, FilterSpec, PumpSpec
from .uncertainty import (
    UncertaintyInputs,
    budget_report,
    mc_resample_oracle,
    propagate_qe,
    propagate_Rif,
    propagate_s1prime,
)

__all__ = [
    "budget_report",
    "calibrate",
    "CalibrationResult",
    "ChannelSpec",
    "collection_efficiency",
    "conditional_spectrum",
    "ConditionalSpectrum",
    "ConfigError",
    "ConvergenceError",
    "CountRecord",
    "cw_click_probability",
    "cw_reference_qe",
    "deduce_qe",
    "deduce_sigma0_from_scan",
    "DetectorSpec",
    "DomainError",
    "expected_rates",
    "extract_sfwm_rate",
    "FiberSpec",
    "FilterSpec",
    "fit_power_sweep",
    "fit_raman",
    "fit_zeta",
    "FitError",
    "FitResult",
    "GaussianPeakRegressor",
    "HeraldedEfficiencyCalibrator",
    "mc_resample_oracle",
    "multipair_ratio",
    "MultiPairParams",
    "NegativeRateWarning",
    "PowerSweepRegressor",
    "propagate_qe",
    "propagate_Rif",
    "propagate_s1prime",
    "PumpSpec",
    "qe_from_zeta",
    "ScanRecord",
    "SchemaError",
    "simulate_power_sweep",
    "SourceCoefficients",
    "spectral_function",
    "SpectralFunctionParams",
    "ThroughOriginRegressor",
    "true_coincidence",
    "UncertaintyInputs",
    "UnphysicalResultWarning",
    "xi_curve",
]

__version__ = "0.1.0"
