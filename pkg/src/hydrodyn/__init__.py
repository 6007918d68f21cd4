"""Analytical hydraulic actuator model, its nonlinear oracle, baselines and evaluation."""
