"""Placement prediction: automated preprocessing, a four-learner vote, rules and t-tests."""
__version__ = "0.1.0"
