"""Envelope shape functions shared by the guess field and the field-cost weight."""

import numpy as np


def gaussian_shape(t, T):
    """s(t) = exp[-32 (t/T - 1/2)^2]; equals 1 at T/2 and e^-8 at the edges."""
    x = np.asarray(t, dtype=float) / T - 0.5
    return np.exp(-32.0 * x * x)
