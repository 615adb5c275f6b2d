"""Broadcasting helpers shared by the built-in problem definitions."""

import numpy as np


def batch_shape(y, z, t):
    """Leading batch shape implied by states and time."""
    return np.broadcast_shapes(np.shape(y)[:-1], np.shape(z)[:-1], np.shape(t))
