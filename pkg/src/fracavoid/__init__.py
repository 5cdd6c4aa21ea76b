"""fracavoid: build and certify pattern-avoiding fractal sets on dyadic grids."""

from fracavoid.dyadic import BranchingSchedule, Cube, GridSet, make_schedule

__version__ = "0.1.0"

__all__ = ["BranchingSchedule", "Cube", "GridSet", "make_schedule", "__version__"]
