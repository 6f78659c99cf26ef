"""Scalable mass-spring-damper benchmark models.

The coefficient defaults are repository constants, not values taken from
the original model descriptions.
"""

import numpy as np

from .models import PHModel, SSOModel

__all__ = ["msd_ph_chain", "triple_chain_sso"]


def msd_ph_chain(n_cells, m=4.0, k=4.0, c=1.0):
    """Port-Hamiltonian chain of ``n_cells`` masses with two force inputs.

    The state is ``(q_1, p_1, ..., q_n, p_n)`` (displacement and momentum per
    mass). Neighbouring masses are coupled by springs of stiffness ``k``, the
    last mass is tied to the wall, and every mass has a damper ``c`` acting on
    its momentum. The inputs are forces on the first two masses; the outputs
    are their velocities.
    """
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError("n_cells must be an integer >= 2")
    if not (m > 0 and k > 0 and c > 0):
        raise ValueError("m, k and c must be positive")
    n_cells = int(n_cells)
    n = 2 * n_cells
    Q = np.zeros((n, n))
    R = np.zeros((n, n))
    J = np.zeros((n, n))
    for i in range(n_cells):
        q, p = 2 * i, 2 * i + 1
        Q[q, q] = k if i == 0 else 2 * k
        Q[p, p] = 1.0 / m
        if i < n_cells - 1:
            Q[q, q + 2] = Q[q + 2, q] = -k
        R[p, p] = c
        J[q, p] = 1.0
    J = J - J.T
    B = np.zeros((n, 2))
    B[1, 0] = 1.0
    B[3, 1] = 1.0
    model = PHModel(J, R, Q, B)
    if np.linalg.eigvals((J - R) @ Q).real.max() >= 0:
        raise ArithmeticError("constructed chain is not asymptotically stable")
    return model


def triple_chain_sso(
    n0,
    masses=1.0,
    stiffnesses=2.0,
    alpha=0.002,
    beta=0.002,
    coupling_mass=10.0,
    coupling_stiffness=None,
    damper=5.0,
    damper_positions=(0, 1, 2),
):
    """Three mass chains of ``n0`` masses joined by one coupling mass.

    Each chain is tied to a wall at its first mass and to the coupling mass at
    its last mass; the coupling mass is also tied to the ground. Damping is
    ``alpha*M + beta*K`` plus grounded dampers of viscosity ``damper`` on the
    masses listed in ``damper_positions`` (by default the three actuated
    masses). Forces act on, and positions are measured at, the first three
    masses.

    ``masses`` and ``stiffnesses`` are scalars or length-3 sequences (one
    value per chain). Returns an :class:`SSOModel` of order ``3*n0 + 1``.
    """
    if int(n0) != n0 or n0 < 1:
        raise ValueError("n0 must be an integer >= 1")
    n0 = int(n0)
    ms = np.broadcast_to(np.asarray(masses, dtype=float), (3,))
    ks = np.broadcast_to(np.asarray(stiffnesses, dtype=float), (3,))
    k0 = ks.mean() if coupling_stiffness is None else float(coupling_stiffness)
    params = [*ms, *ks, k0, coupling_mass]
    if any(not v > 0 for v in params) or alpha < 0 or beta < 0 or damper < 0:
        raise ValueError("masses and stiffnesses must be positive, damping nonnegative")
    n = 3 * n0 + 1
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    tri = 2 * np.eye(n0) - np.eye(n0, k=1) - np.eye(n0, k=-1)
    pos = np.asarray(damper_positions, dtype=int).ravel()
    if pos.size and (pos.min() < 0 or pos.max() >= n):
        raise ValueError(f"damper positions must lie in [0, {n})")
    c = n - 1
    for i in range(3):
        blk = slice(i * n0, (i + 1) * n0)
        M[blk, blk] = ms[i] * np.eye(n0)
        K[blk, blk] = ks[i] * tri
        last = (i + 1) * n0 - 1
        K[last, c] = K[c, last] = -ks[i]
    M[c, c] = coupling_mass
    K[c, c] = ks.sum() + k0
    D = alpha * M + beta * K
    np.add.at(D, (pos, pos), damper)
    B = np.zeros((n, 3))
    B[np.arange(min(3, n)), np.arange(min(3, n))] = 1.0
    return SSOModel(M, D, K, B)
