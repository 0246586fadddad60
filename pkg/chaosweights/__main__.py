"""
Make `python -m chaosweights` an alias for running `chaosweights`.
"""

from __future__ import annotations

from .entry_points.run_chaosweights import run

run()
