"""Workbench for a 10x10 binary-grid construction DSL: enumerative program
synthesis, online library learning, curricula with latent structure, a
helper-selection hardness kit, an LLM synthesis harness, stochastic space
exploration, and session-log analytics."""

__version__ = "0.1.0"
