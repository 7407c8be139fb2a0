"""Strategic exploration in repeated prisoner's dilemmas played by Q-learners."""

__version__ = "0.1.0"
