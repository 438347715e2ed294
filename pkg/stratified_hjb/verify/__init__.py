"""
Verification module for Stratified HJB.

This module contains check reports, viscosity and DPP residual checks and the
convergence studies.
"""
