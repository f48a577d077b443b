"""Distributionally robust chance constraints from sampled data.

Streaming moment estimates, support geometry, coefficient schedules with
finite-sample guarantees, second-order cone surrogates, an embedded conic
solver, and a correlated-wager benchmark.
"""

__version__ = "0.1.0"
