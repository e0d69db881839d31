from app.core import (
    signals, systems, riccati, factorization, projection, divergence, estimation, lti_oracle, plants,
)

__all__ = [
    "signals", "systems", "riccati", "factorization", "projection", "divergence", "estimation",
    "lti_oracle", "plants",
]
