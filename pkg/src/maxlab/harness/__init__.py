"""Experiment runner, reports and command-line interface."""
