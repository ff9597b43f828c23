"""Robust multi-objective trajectory optimization toolkit.

Converts stochastic open-loop optimal control problems into deterministic
trajectory-ensemble problems via non-intrusive polynomial chaos expansion,
and optimizes them with a constrained NSGA-II.  Ships a supersonic-transport
landing case study (elevator-only continuous descent under wind uncertainty)
end to end.
"""

__version__ = "0.1.0"
