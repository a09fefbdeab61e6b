"""framescope: political framing lexicons, information-graph embedding, and
ideological community detection with evaluation analytics."""

__version__ = "0.1.0"
