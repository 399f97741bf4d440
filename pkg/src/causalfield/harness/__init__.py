"""Campaign runner, report writer, plots, and the command line."""

from .campaign import (Campaign, REGISTRY, ScenarioResult,
                       canonical_report_bytes, run_campaign, write_report)
from .plots import emit_plot

__all__ = ["Campaign", "REGISTRY", "ScenarioResult", "canonical_report_bytes",
           "run_campaign", "write_report", "emit_plot"]
