"""
Utilities module for Stratified HJB.

This module contains utility functions and classes.
"""
