"""Agent-based simulation of collective opinion dynamics under LLM influence."""

__version__ = "0.1.0"
