"""identikit: which experiments distinguish the parameters of an ODE model."""
__version__ = "0.1.0"
