"""Plain record types passed between the simulator, the pipeline and the CSV layer."""

from dataclasses import dataclass, replace
import math

from .exceptions import DomainError


@dataclass(frozen=True)
class CountRecord:
    """Counts accumulated at one pump power.

    Counts are stored as floats so noiseless (expected-value) records can be
    represented; simulated records always hold whole numbers.
    """

    p_ave: float  # mW
    gates: float
    singles_signal: float
    singles_idler: float
    coincidences_raw: float
    accidentals_measured: float = None
    dark_corrected: bool = False

    def __post_init__(self):
        counts = (self.gates, self.singles_signal, self.singles_idler, self.coincidences_raw)
        if any(not math.isfinite(c) or c < 0 for c in counts):
            raise DomainError("counts and gates must be finite and non-negative")
        if self.p_ave < 0 or not math.isfinite(self.p_ave):
            raise DomainError(f"p_ave must be non-negative, got {self.p_ave!r}")
        if self.accidentals_measured is not None and self.accidentals_measured < 0:
            raise DomainError("accidentals_measured must be non-negative")
        if self.coincidences_raw > min(self.singles_signal, self.singles_idler):
            raise DomainError("coincidences_raw exceeds the smaller singles count")

    def scaled(self, factor):
        """Multiply every count and the gate number by ``factor``."""
        acc = None if self.accidentals_measured is None else self.accidentals_measured * factor
        return replace(
            self,
            gates=self.gates * factor,
            singles_signal=self.singles_signal * factor,
            singles_idler=self.singles_idler * factor,
            coincidences_raw=self.coincidences_raw * factor,
            accidentals_measured=acc,
        )


@dataclass(frozen=True)
class ScanRecord:
    """One point of a signal-filter centre scan.

    ``true_coincidence_normalized`` is the accidental-subtracted coincidence
    rate divided by ``eta_ts_at_point``. Small negative values from noise are
    kept as they are; ``is_negative`` flags them.
    """

    lambda_s0_prime: float  # nm
    true_coincidence_normalized: float
    eta_ts_at_point: float = 1.0
    uncertainty: float = None

    def __post_init__(self):
        if not self.lambda_s0_prime > 0:
            raise DomainError("lambda_s0_prime must be positive")
        if not 0.0 < self.eta_ts_at_point <= 1.0:
            raise DomainError("eta_ts_at_point must lie in (0, 1]")
        if self.uncertainty is not None and not self.uncertainty > 0:
            raise DomainError("uncertainty must be positive when given")

    @property
    def is_negative(self):
        return self.true_coincidence_normalized < 0
