"""Learning per instance whether a branch-and-cut solver should use local cuts."""

__version__ = "0.1.0"
