"""The particle swarm on a toy objective, then on the decoded hyperparameter space."""

import numpy as np

from pso_forecast.hyperspace import SearchSpace, decode_values, format_config
from pso_forecast.pso import PsoConfig, optimize


def sphere(c):
    return float(np.sum((c - 0.5) ** 2))


# the plain update carries the full previous velocity forward
plain = optimize(7, PsoConfig(generations=50, seed=0), sphere)
print("inertia 1.0   :", " ".join(f"{t:.4f}" for t in plain.trace[::10]))

# a damping weight lets the swarm settle on the interior optimum
damped = optimize(7, PsoConfig(generations=50, seed=0, inertia=0.7298), sphere)
print("inertia 0.7298:", " ".join(f"{t:.4f}" for t in damped.trace[::10]))

# positions in [0, 1]^7 decode into concrete hyperparameters
space = SearchSpace.default()
for c in (np.zeros(7), np.full(7, 0.5), np.ones(7), damped.best):
    print(np.round(c, 3), "->", format_config(decode_values(c, space), space))
