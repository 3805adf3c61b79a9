"""Right-of-way allocation workbench: street network model, mesoscopic
traffic and parking simulator, and per-edge actor-critic learners."""

__version__ = "0.1.0"
