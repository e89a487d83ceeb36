"""Small numerical helpers: Gauss panels, Legendre transforms, operator norms."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss, legvander


@lru_cache(maxsize=32)
def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1], cached."""
    x, w = leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_panel(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = gauss_rule(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def cosine_graded_edges(a: float, b: float, n_panels: int) -> np.ndarray:
    """Panel edges on [a, b] clustered toward both endpoints.

    Useful for integrands that are flat-but-steep near the interval ends.
    """
    theta = np.linspace(0.0, np.pi, n_panels + 1)
    return a + (b - a) * 0.5 * (1.0 - np.cos(theta))


@lru_cache(maxsize=8)
def legendre_projection(n_nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (nodes, weights, A) for modal Legendre analysis on [-1, 1].

    A maps values at the n Gauss nodes to Legendre coefficients a_l,
    l = 0..n-1, via the discrete projection
    a_l = (2l+1)/2 * sum_i w_i P_l(x_i) f(x_i).
    """
    x, w = gauss_rule(n_nodes)
    v = legvander(x, n_nodes - 1)  # v[i, l] = P_l(x_i)
    scale = (2.0 * np.arange(n_nodes) + 1.0) / 2.0
    a = scale[:, None] * (v * w[:, None]).T
    a.flags.writeable = False
    return x, w, a


@lru_cache(maxsize=8)
def cumulative_integration_matrix(n_nodes: int) -> np.ndarray:
    """Matrix S with (S f)_r ~= integral_{-1}^{x_r} of the interpolant of f.

    f is given by values at the n Gauss-Legendre nodes x_r. Built through
    the Legendre modal basis, which stays well conditioned at high order:
    int_{-1}^{x} P_0 = x + 1 and
    int_{-1}^{x} P_l = (P_{l+1}(x) - P_{l-1}(x)) / (2l + 1) for l >= 1.
    """
    x, _, analysis = legendre_projection(n_nodes)
    v = legvander(x, n_nodes)  # includes P_{n_nodes}
    b = np.zeros((n_nodes, n_nodes))
    b[:, 0] = x + 1.0
    for l in range(1, n_nodes):
        b[:, l] = (v[:, l + 1] - v[:, l - 1]) / (2 * l + 1)
    s = b @ analysis
    s.flags.writeable = False
    return s


def operator_norm(m: np.ndarray, iters: int = 20, tol: float = 1e-8,
                  start: np.ndarray | None = None,
                  return_vector: bool = False):
    """Spectral norm of m by power iteration on m^dagger m.

    Deterministic start vector; a warm start can be passed to speed up
    sequences of nearby matrices. 20 iterations at tol 1e-8 is plenty for
    the well-separated spectra encountered here. With return_vector the
    final iterate comes back for use as the next warm start.
    """
    n = m.shape[1]
    if start is not None and start.shape == (n,):
        v = start.astype(complex)
    else:
        # fixed, non-symmetric start so we never sit in an invariant subspace
        v = np.cos(0.7 * np.arange(n)) + 1j * np.sin(0.3 * np.arange(n) + 0.1)
    nv = np.linalg.norm(v)
    if nv == 0.0 or not np.isfinite(nv):
        v = np.ones(n, dtype=complex)
        nv = np.sqrt(float(n))
    v /= nv
    sigma = 0.0
    for _ in range(iters):
        w = m.conj().T @ (m @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return (0.0, v) if return_vector else 0.0
        new_sigma = np.sqrt(nw)
        v = w / nw
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300):
            break
        sigma = new_sigma
    sigma = float(new_sigma)
    return (sigma, v) if return_vector else sigma


def block_norms(m: np.ndarray) -> dict[str, float]:
    """Spectral norms of the four blocks of m w.r.t. the first basis direction.

    Keys: 'pp' (bound-bound), 'pc' (bound row into continuum),
    'cp' (continuum column from bound), 'cc' (continuum block).
    """
    return {
        "pp": abs(m[0, 0]),
        "pc": float(np.linalg.norm(m[0, 1:])),
        "cp": float(np.linalg.norm(m[1:, 0])),
        "cc": operator_norm(m[1:, 1:]),
    }


def format_float17(x: float) -> str:
    """17-significant-digit lowercase scientific form; round-trips doubles."""
    return f"{x:.16e}"
