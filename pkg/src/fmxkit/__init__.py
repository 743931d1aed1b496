"""Workbench for the FMX/Mixer configuration-protection scheme.

Covers the FMX container, the Blowfish and LCG cipher layers, a known-plaintext
key search, a master-service orchestration simulator and a telemetry analyzer.
All keys and fixtures are synthetic.
"""

__version__ = "0.1.0"
