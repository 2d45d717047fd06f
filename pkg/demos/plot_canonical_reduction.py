"""
From a general 2x2 channel to the canonical form
================================================

A two-antenna transmitter serving two single-antenna users sees a real
2x2 channel. Folding user 1's gains and the determinant into the inputs
leaves a single unknown, the cross gain ``G``.
"""

import numpy as np

from aisets import GeneralChannel2x2, reduce_to_canonical

# one time slot, entries and determinant bounded by M = 2
general = GeneralChannel2x2(np.array([[1.0, 1.0], [1.0, 2.0]]), M=2, P_tilde=1.0)
canonical, transform = reduce_to_canonical(general)
print("canonical cross gain G:", canonical.gain(1, 0))
print("canonical power budget:", canonical.P)

# The input map is invertible, and the outputs are unchanged.
x_tilde = np.array([[0.3], [-0.7]])
x = transform.forward(x_tilde)
print("round trip error:", np.abs(transform.inverse(x) - x_tilde).max())
y_general = general.G[0] @ x_tilde
y_canonical = [x[0, 0], canonical.gain(1, 0)[0] * x[0, 0] + x[1, 0]]
print("user outputs, general:  ", np.round(y_general.ravel(), 12))
print("user outputs, canonical:", np.round(y_canonical, 12))
