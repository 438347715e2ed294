"""
Solver module for Stratified HJB.

This module contains the problem type, the semi-Lagrangian value solver, the
brute-force oracle and trajectory simulation.
"""
