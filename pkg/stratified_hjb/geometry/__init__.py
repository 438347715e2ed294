"""
Geometry module for Stratified HJB.

This module contains flat stratifications, point location and AFS validation.
"""
