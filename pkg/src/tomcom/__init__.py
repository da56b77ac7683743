"""tomcom: cooperative sushi-kitchen simulator with belief-aware assistance.

A two-agent kitchen (human + robot) where the human acts under a possibly
false belief about the world.  The robot tracks the human's belief from
gaze and actions, and decides when a communication signal (recipe card,
location highlight) is worth its distraction cost.
"""

__version__ = "0.1.0"

from .config import TaskConfig, load_config

__all__ = ["TaskConfig", "load_config", "__version__"]
