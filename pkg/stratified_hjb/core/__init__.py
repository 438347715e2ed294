"""
Core module for Stratified HJB.

This module contains the application, settings and error types.
"""
