"""
Hamiltonians module for Stratified HJB.

This module contains the LP routine, full and tangential Hamiltonians and the
assumption checkers.
"""
