"""Pure-numpy propagation kernels.

Fallback used when the compiled extension is unavailable (or forced via
QMAZE_KERNEL=python).  Same semantics as qmaze._kernels, roughly an order of
magnitude slower at 6x6-maze dimensions.

The generator right-hand side is evaluated in the reduced form

    drho = -i*coh*(H rho - rho H) + diag(pump @ diag(rho)) - (gamma_a+gamma_b)/2 * rho

where ``pump`` carries the incoherent hop-in rates plus the sink feed and
``gamma`` is its column-sum vector, which makes the expression traceless by
construction.
"""

import numpy as np


def lindblad_rhs(rho, ham, coh, pump, decay):
    hr = ham @ rho
    out = (-1j * coh) * (hr - hr.conj().T)
    out -= (0.5 * (decay[:, None] + decay[None, :])) * rho
    out[np.diag_indices_from(out)] += pump @ np.diagonal(rho)
    return out


def rk4_evolve(rho, ham, coh, pump, decay, steps, h):
    y = rho.astype(np.complex128, copy=True)
    for _ in range(steps):
        k1 = lindblad_rhs(y, ham, coh, pump, decay)
        k2 = lindblad_rhs(y + (0.5 * h) * k1, ham, coh, pump, decay)
        k3 = lindblad_rhs(y + (0.5 * h) * k2, ham, coh, pump, decay)
        k4 = lindblad_rhs(y + h * k3, ham, coh, pump, decay)
        y += (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return y
