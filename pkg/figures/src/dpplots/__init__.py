"""Post-hoc figure rendering for dp-helm simulation runs."""

from .render import SchemaError, render_all
from .specs import SPECS, FigureSpec, load_run_config, overlay_values

__version__ = "0.1.0"
