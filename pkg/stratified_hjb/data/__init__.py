"""
Data module for Stratified HJB.

This module contains problem configuration loading, the builtin problem library
and result exporters.
"""
