"""Discretized bound-state-plus-continuum model with smooth switching.

The continuum L^2(R_+, dk) is realized on a geometrically graded
Gauss-Legendre grid with k in [k_min, k_max]. The coupling density
phi(k) = norm * sqrt(2 beta) k^(beta - 1/2) * cutoff(k) makes the
cumulative coupling weight below x equal norm^2 * x^(2 beta), which is
the small-energy law controlling the long-time leak exponent. Driving
enters through a rotation angle g(s) whose rate is a smooth bump
supported in [0, 1]; the rotation generator exchanges the bound
direction with the coupling direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, ConfigurationError
from .numutil import cosine_graded_edges, gauss_panel

__all__ = [
    "DiscretizedMeasure",
    "FormFactor",
    "SwitchingProfile",
    "FriedrichsModel",
    "RotatingState",
    "PanelLayout",
    "build_grid",
    "build_form_factor",
    "build_switching",
    "assemble_model",
    "apply_rotation",
    "bump_function",
    "bump_function_derivative",
]


def bump_function(s):
    """exp(-1/(s(1-s))) on (0, 1), exactly zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out if out.ndim else float(out)


def bump_function_derivative(s):
    """Derivative of the bump; vanishes (with all orders) at 0 and 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    q = si * (1.0 - si)
    out[inside] = np.exp(-1.0 / q) * (1.0 - 2.0 * si) / (q * q)
    return out if out.ndim else float(out)


def _cumulative_bump_table(n_panels: int = 64, n_nodes: int = 24):
    """Panel edges on [0,1] and cumulative integrals of the bump up to each edge."""
    edges = cosine_graded_edges(0.0, 1.0, n_panels)
    cum = np.zeros(n_panels + 1)
    for m in range(n_panels):
        x, w = gauss_panel(edges[m], edges[m + 1], n_nodes)
        cum[m + 1] = cum[m] + float(w @ bump_function(x))
    return edges, cum


_BUMP_EDGES, _BUMP_CUM = _cumulative_bump_table()
#: integral of exp(-1/(s(1-s))) over [0, 1]
BUMP_NORM = float(_BUMP_CUM[-1])


def _bump_cumulative(s):
    """Integral of the bump from 0 to s, spectrally accurate, vectorized."""
    s = np.asarray(s, dtype=float)
    flat = np.clip(s.ravel(), 0.0, 1.0)
    idx = np.minimum(np.searchsorted(_BUMP_EDGES, flat, side="right") - 1,
                     len(_BUMP_EDGES) - 2)
    out = np.empty_like(flat)
    for i, (sv, m) in enumerate(zip(flat, idx)):
        a = _BUMP_EDGES[m]
        if sv <= a:
            out[i] = _BUMP_CUM[m]
            continue
        x, w = gauss_panel(a, sv, 24)
        out[i] = _BUMP_CUM[m] + float(w @ bump_function(x))
    out = out.reshape(s.shape)
    return out if out.ndim else float(out)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly increasing between."""
    return _bump_cumulative(x) / BUMP_NORM


class SwitchingProfile:
    """Smooth driving pair (g, gdot) with gdot >= 0 supported in [0, 1].

    g rises monotonically from 0 to theta_total and is constant afterwards.
    Instances are immutable and picklable (plain data plus methods), so
    models can be shipped to worker processes.
    """

    support = (0.0, 1.0)

    def __init__(self, theta_total: float):
        if theta_total < 0.0:
            raise ConfigurationError("theta_total must be nonnegative")
        self.theta_total = float(theta_total)
        self.gdot_max = self.theta_total * bump_function(0.5) / BUMP_NORM

    @classmethod
    def zero(cls) -> "SwitchingProfile":
        """Trivial profile with no driving (gdot identically zero)."""
        return cls(0.0)

    def g(self, s):
        """Accumulated rotation angle; g(0) = 0, g(s >= 1) = theta_total."""
        return self.theta_total * smooth_step(s)

    def gdot(self, s):
        """Rotation rate; a normalized bump on (0, 1), zero elsewhere."""
        return self.theta_total * bump_function(s) / BUMP_NORM

    def gddot(self, s):
        """Second derivative of g, used by analytic transport derivatives."""
        return self.theta_total * bump_function_derivative(s) / BUMP_NORM

    def __repr__(self):
        return f"SwitchingProfile(theta_total={self.theta_total!r})"


@dataclass(frozen=True)
class PanelLayout:
    """Record of the geometric panel subdivision of the energy axis."""

    edges: np.ndarray
    nodes_per_panel: int


@dataclass(frozen=True)
class DiscretizedMeasure:
    """Quadrature nodes and weights standing in for L^2(R_+, dk)."""

    nodes: np.ndarray
    weights: np.ndarray
    k_min: float
    k_max: float
    panel_layout: PanelLayout

    def __post_init__(self):
        self.nodes.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum approximating the integral over [k_min, k_max]."""
        return float(self.weights @ values)


@dataclass(frozen=True)
class FormFactor:
    """Coupling density phi(k_j) with small-k exponent beta."""

    beta: float
    values: np.ndarray
    cutoff_fraction: float
    norm_constant: float

    def __post_init__(self):
        self.values.flags.writeable = False


@dataclass(frozen=True)
class FriedrichsModel:
    """Assembled Hamiltonian data: diagonal energies plus rank-one coupling.

    Basis: index 0 is the bound direction, indices 1..N the continuum
    nodes. The static Hamiltonian is diag(0, k_j + gap_shift). The
    exchange generator A maps e0 -> c and v -> <c, v> e0 with the unit
    coupling vector c_j = phi(k_j) sqrt(w_j).
    """

    measure: DiscretizedMeasure
    form_factor: FormFactor
    switching: SwitchingProfile
    gap_shift: float
    coupling: np.ndarray = field(init=False)
    diag_energies: np.ndarray = field(init=False)

    def __post_init__(self):
        c = self.form_factor.values * np.sqrt(self.measure.weights)
        energies = np.concatenate(([0.0], self.measure.nodes + self.gap_shift))
        c.flags.writeable = False
        energies.flags.writeable = False
        object.__setattr__(self, "coupling", c)
        object.__setattr__(self, "diag_energies", energies)

    @property
    def dim(self) -> int:
        return 1 + self.measure.n_nodes

    def bound_state(self) -> "RotatingState":
        amps = np.zeros(self.measure.n_nodes, dtype=complex)
        return RotatingState(1.0 + 0.0j, amps, frame="rotating", time_s=0.0)

    def apply_exchange(self, vec: np.ndarray) -> np.ndarray:
        """A @ vec for a packed (bound, continuum) vector; O(N)."""
        out = np.empty_like(vec, dtype=complex)
        out[0] = self.coupling @ vec[1:]
        out[1:] = vec[0] * self.coupling
        return out

    def hamiltonian_dense(self, s: float | None = None, tau: float = 1.0) -> np.ndarray:
        """Dense H(s) = V(g(s)) H V(g(s))^dagger; s=None gives the static H."""
        h0 = np.diag(self.diag_energies).astype(complex)
        if s is None:
            return h0
        theta = self.switching.g(s)
        v = rotation_dense(self, theta)
        return v @ h0 @ v.conj().T

    def exchange_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim), dtype=complex)
        a[0, 1:] = self.coupling
        a[1:, 0] = self.coupling
        return a


@dataclass
class RotatingState:
    """State split into bound amplitude and continuum amplitudes.

    frame is one of 'lab', 'rotating', 'interaction'; time_s is the scaled
    time the state refers to. The rotating frame removes the driving
    rotation, the interaction frame additionally removes the free phases.
    """

    bound_amp: complex
    continuum_amps: np.ndarray
    frame: str = "rotating"
    time_s: float = 0.0

    def as_vector(self) -> np.ndarray:
        vec = np.empty(1 + len(self.continuum_amps), dtype=complex)
        vec[0] = self.bound_amp
        vec[1:] = self.continuum_amps
        return vec

    @classmethod
    def from_vector(cls, vec: np.ndarray, frame: str, time_s: float) -> "RotatingState":
        return cls(complex(vec[0]), np.array(vec[1:], dtype=complex), frame, time_s)

    def norm(self) -> float:
        return float(np.sqrt(abs(self.bound_amp) ** 2
                             + np.vdot(self.continuum_amps, self.continuum_amps).real))

    def copy(self) -> "RotatingState":
        return RotatingState(self.bound_amp, self.continuum_amps.copy(),
                             self.frame, self.time_s)


def build_grid(k_max: float, n_panels: int, nodes_per_panel: int,
               k_min: float) -> DiscretizedMeasure:
    """Geometric panels from k_max down to k_min, Gauss-Legendre inside each.

    The panel ratio is constant, (k_min/k_max)^(1/n_panels); with
    n_panels = log2(k_max/k_min) this is the ratio-2 grading that keeps
    resolving k ~ 1/tau as tau grows.
    """
    if not (k_max > k_min > 0.0):
        raise ConfigurationError(
            f"need k_max > k_min > 0, got k_max={k_max}, k_min={k_min}")
    if n_panels < 1 or nodes_per_panel < 2:
        raise ConfigurationError("need n_panels >= 1 and nodes_per_panel >= 2")
    ratio = (k_min / k_max) ** (1.0 / n_panels)
    edges = k_max * ratio ** np.arange(n_panels + 1)  # descending
    edges = edges[::-1].copy()
    edges[0], edges[-1] = k_min, k_max  # kill rounding at the ends
    nodes, weights = [], []
    for m in range(n_panels):
        x, w = gauss_panel(edges[m], edges[m + 1], nodes_per_panel)
        nodes.append(x)
        weights.append(w)
    return DiscretizedMeasure(
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        k_min=float(k_min),
        k_max=float(k_max),
        panel_layout=PanelLayout(edges=edges, nodes_per_panel=nodes_per_panel),
    )


def build_form_factor(grid: DiscretizedMeasure, beta: float,
                      cutoff_fraction: float = 0.5) -> FormFactor:
    """Coupling density with integral of phi^2 below x equal to const * x^(2 beta).

    The raw profile sqrt(2 beta) k^(beta - 1/2) is multiplied by a smooth
    cutoff that is 1 below cutoff_fraction * k_max and 0 at k_max, then
    rescaled to unit norm in L^2(w dk). beta = 0 is rejected: phi^2 dk
    would not be integrable at the origin under this realization.
    """
    if beta <= 0.0:
        raise ConfigurationError(f"beta must be > 0, got {beta}")
    if not (0.0 < cutoff_fraction < 1.0):
        raise ConfigurationError(
            f"cutoff_fraction must lie in (0, 1), got {cutoff_fraction}")
    k = grid.nodes
    k_on = cutoff_fraction * grid.k_max
    cut = 1.0 - smooth_step((k - k_on) / (grid.k_max - k_on))
    raw = np.sqrt(2.0 * beta) * k ** (beta - 0.5) * cut
    norm_sq = grid.integrate(raw * raw)
    norm_constant = 1.0 / np.sqrt(norm_sq)
    return FormFactor(beta=float(beta), values=norm_constant * raw,
                      cutoff_fraction=float(cutoff_fraction),
                      norm_constant=float(norm_constant))


def build_switching(theta_total: float) -> SwitchingProfile:
    """Smooth switching with total angle theta_total > 0."""
    if theta_total <= 0.0:
        raise ConfigurationError(f"theta_total must be > 0, got {theta_total}")
    return SwitchingProfile(theta_total)


def assemble_model(grid: DiscretizedMeasure, form_factor: FormFactor,
                   switching: SwitchingProfile, gap_shift: float = 0.0) -> FriedrichsModel:
    """Combine grid, coupling and driving into a model; gap_shift >= 0.

    gap_shift = 0 puts the bound state at the continuum threshold;
    gap_shift > 0 opens a spectral gap below the continuum (control case).
    """
    if gap_shift < 0.0:
        raise ConfigurationError(f"gap_shift must be >= 0, got {gap_shift}")
    if len(form_factor.values) != grid.n_nodes:
        raise AssemblyError(
            f"form factor has {len(form_factor.values)} values for "
            f"{grid.n_nodes} grid nodes")
    model = FriedrichsModel(measure=grid, form_factor=form_factor,
                            switching=switching, gap_shift=float(gap_shift))
    norm = np.linalg.norm(model.coupling)
    if abs(norm - 1.0) > 1e-10:
        raise AssemblyError(f"coupling vector norm {norm} deviates from 1")
    return model


def apply_rotation(model: FriedrichsModel, theta: float,
                   state: RotatingState) -> RotatingState:
    """Apply V(theta) = exp(i theta A) to the state; exact and O(N).

    A^2 is the orthogonal projector onto span{e0, c}, so
    exp(i theta A) = 1 + (cos theta - 1) Pi + i sin theta A.
    """
    vec = state.as_vector()
    c = model.coupling
    b0 = vec[0]
    cc = c @ vec[1:]
    cos_m1 = np.cos(theta) - 1.0
    isin = 1j * np.sin(theta)
    out = vec.copy()
    out[0] += cos_m1 * b0 + isin * cc
    out[1:] += (cos_m1 * cc + isin * b0) * c
    return RotatingState.from_vector(out, state.frame, state.time_s)


def rotation_dense(model: FriedrichsModel, theta: float) -> np.ndarray:
    """Dense matrix of exp(i theta A); for diagnostics at small N."""
    n = model.dim
    c = model.coupling
    out = np.eye(n, dtype=complex)
    cos_m1 = np.cos(theta) - 1.0
    isin = 1j * np.sin(theta)
    out[0, 0] += cos_m1
    out[1:, 1:] += cos_m1 * np.outer(c, c)
    out[0, 1:] += isin * c
    out[1:, 0] += isin * c
    return out
