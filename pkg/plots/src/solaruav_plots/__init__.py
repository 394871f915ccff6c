"""Chart generation for campaign result CSVs.

Standalone consumer of the campaign CSV contract; deliberately has no
dependency on the solver package.
"""

from .figures import CsvFormatError, plot_power_sweep, plot_user_sweep

__all__ = ["CsvFormatError", "plot_power_sweep", "plot_user_sweep"]

__version__ = "0.1.0"
