#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Setup script for Stratified HJB."""

from setuptools import setup, find_packages

# Read version from package
with open("stratified_hjb/__init__.py", "r") as f:
    for line in f:
        if line.startswith("__version__"):
            version = line.split("=")[1].strip().strip('"').strip("'")
            break
    else:
        version = "0.1.0"

# Runtime requirements only; the development tools stay in requirements.txt
with open("requirements.txt", "r") as f:
    lines = [line.strip() for line in f]
    requirements = []
    for line in lines:
        if line.startswith("# Development"):
            break
        if line and not line.startswith("#"):
            requirements.append(line)

setup(
    name="stratified-hjb",
    version=version,
    description="Solver and verification toolkit for Hamilton-Jacobi-Bellman equations on stratified domains",
    packages=find_packages(exclude=("tests", "tests.*")),
    package_data={"stratified_hjb.data": ["problems/*.json"]},
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "stratified-hjb=stratified_hjb.main:main",
        ],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
)
