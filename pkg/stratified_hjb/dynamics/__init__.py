"""
Dynamics module for Stratified HJB.

This module contains generator sets, the piecewise dynamics-cost map and its
Filippov regularization.
"""
