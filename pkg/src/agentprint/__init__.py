"""agentprint: behavioral fingerprinting of AI coding agents from PR artifacts."""

__version__ = "0.1.0"
