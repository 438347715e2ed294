"""
Stratified HJB Package

Solver and verification toolkit for finite-horizon optimal control problems
whose dynamics and running costs are discontinuous across a flat stratification.
"""

__version__ = '0.1.0'
