"""Four-state light-cone random walk whose ordinal-time average obeys the lattice Dirac equation."""

__version__ = "0.1.0"
