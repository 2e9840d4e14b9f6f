"""IRS-assisted uplink NOMA: power minimization and energy-efficiency maximization."""

__version__ = "0.1.0"

from .scenario import ScenarioConfig, sample_channels  # noqa: E402,F401
