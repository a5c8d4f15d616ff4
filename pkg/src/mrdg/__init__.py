"""RKDG solver for hyperbolic conservation laws with a multi-resolution limiter."""

__version__ = "0.1.0"
