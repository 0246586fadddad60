#!/usr/bin/env python
import os

from setuptools import find_packages, setup

with open(os.path.join(os.path.dirname(__file__), "README.rst")) as f:
    long_description = f.read()


setup(
    name="chaosweights",
    version="0.1.0",
    description="Weighted periodic-orbit and snippet estimates of chaotic averages",
    long_description=long_description,
    packages=find_packages(".", exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "appdirs",
        "matplotlib>=3.5",
        "numba>=0.57",
        "numpy>=1.22",
        # `print_formatted_text(file=...)` renders plain text on non-terminals.
        "prompt_toolkit>=3.0.43,<3.1.0",
        "scipy>=1.9",
        "sympy>=1.10",
    ],
    python_requires=">=3.9",
    classifiers=[
        "License :: OSI Approved :: BSD License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    entry_points={
        "console_scripts": [
            "chaosweights = chaosweights.entry_points.run_chaosweights:run",
        ]
    },
)
