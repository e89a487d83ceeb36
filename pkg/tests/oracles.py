"""Independent reference computations the tests check the package against.

Everything here is deliberately brute force and shares no code with the
integration or quadrature paths under test.
"""

import numpy as np


def dense_reference_evolve(model, tau, s_end, h=1e-5):
    """Frozen-Hamiltonian matrix-exponential stepper in the rotating frame.

    Builds the dense generator tau*H + gdot(s_mid)*A on every step and
    applies its exact exponential (via eigendecomposition). O(n_steps *
    dim^3); intended for dim <= ~8. Returns the final packed state.
    """
    dim = model.dim
    h_mat = np.diag(model.diag_energies).astype(complex)
    a_mat = model.exchange_dense()
    n = int(round(s_end / h))
    mids = (np.arange(n) + 0.5) * h
    gd = model.switching.gdot(mids)

    # stack the per-step generators, exponentiate in a vectorized sweep,
    # then contract the ordered product pairwise (keeps the loop depth log n)
    gens = tau * h_mat[None, :, :] + gd[:, None, None] * a_mat[None, :, :]
    lam, vec = np.linalg.eigh(gens)
    phases = np.exp(-1j * h * lam)
    steps = np.einsum("sij,sj,skj->sik", vec, phases, vec.conj())

    prod = steps
    while prod.shape[0] > 1:
        if prod.shape[0] % 2 == 1:
            last = prod[-1]
            pairs = np.einsum("sij,sjk->sik", prod[1:-1:2], prod[0:-1:2])
            prod = np.concatenate([pairs, last[None]])
        else:
            prod = np.einsum("sij,sjk->sik", prod[1::2], prod[0::2])
    u = prod[0]

    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    return u @ psi0


def trapezoid_rate_transform(profile, p, n=1_000_000):
    """Brute-force transform of the switching rate on a uniform grid.

    The integrand is smooth with all derivatives vanishing at both ends,
    so the trapezoid rule converges faster than any power of 1/n.
    """
    t = np.linspace(0.0, 1.0, n + 1)
    f = profile.gdot(t) * np.exp(1j * p * t)
    return np.trapezoid(f, t)


def eigen_tilde(h, x, center, radius):
    """Cross-block division rule computed with an explicit double loop."""
    lam, vec = np.linalg.eigh(h)
    inside = np.abs(lam - center) < radius
    xe = vec.conj().T @ x @ vec
    out = np.zeros_like(xe)
    for a in range(len(lam)):
        for b in range(len(lam)):
            if inside[a] and not inside[b]:
                out[a, b] = xe[a, b] / (lam[b] - lam[a])
            elif inside[b] and not inside[a]:
                out[a, b] = xe[a, b] / (lam[a] - lam[b])
    return vec @ out @ vec.conj().T


def two_level_rotation(theta):
    """Exact 2x2 rotation exp(i theta sigma_x) on span{bound, coupling}."""
    return np.array([[np.cos(theta), 1j * np.sin(theta)],
                     [1j * np.sin(theta), np.cos(theta)]])


def single_mode_model(k=1.0, theta_total=np.pi / 4, gap_shift=0.0):
    """One continuum mode with unit coupling; smallest honest model."""
    from friedrichs.model import (DiscretizedMeasure, FormFactor, FriedrichsModel,
                                  PanelLayout, SwitchingProfile)

    measure = DiscretizedMeasure(
        nodes=np.array([float(k)]), weights=np.array([1.0]),
        k_min=0.5 * k, k_max=1.5 * k,
        panel_layout=PanelLayout(edges=np.array([0.5 * k, 1.5 * k]),
                                 nodes_per_panel=1))
    ff = FormFactor(beta=1.0, values=np.array([1.0]), cutoff_fraction=0.5,
                    norm_constant=1.0)
    return FriedrichsModel(measure=measure, form_factor=ff,
                           switching=SwitchingProfile(theta_total),
                           gap_shift=float(gap_shift))
