"""1D stochastic acoustic wave problem.

First-order system on (0, 1) with reflecting ends,

    rho dt v - dx p = f,    kappa^-1 dt p - dx v = g,    v(0) = v(1) = 0,

discretized with modal Legendre dG elements and an impedance-weighted
full-upwind interface flux (Z = sqrt(kappa rho), material cell-wise
constant), stepped with the implicit midpoint rule at tau = c_cfl * h.
The semi-discrete operator is positive semidefinite, so the midpoint
energy 0.5 (|sqrt(rho) v|^2 + |p / sqrt(kappa)|^2) cannot grow once the
source is off.

Level l uses h_l = h0 2^-l; the coarse partner of a sample reuses the
fine density field by averaging adjacent fine-cell pairs, which couples
the level pair through common random numbers.  The quantity of interest
is the L2 norm of (v, p) at the final time over a region aligned with
cell edges, evaluated exactly from the modal coefficients.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DivergedSampleError
from ..seeding import sample_seeds
from . import ModelDescriptor
from .field import CovSpec, FieldSampler


def deriv_matrix(degree: int) -> np.ndarray:
    """D[t, j] = integral of P_j' P_t over [-1, 1] (equals 2 for t < j, t+j odd)."""
    q = degree + 1
    d = np.zeros((q, q))
    for j in range(q):
        for t in range(j):
            if (t + j) % 2 == 1:
                d[t, j] = 2.0
    return d


def assemble_blocks(rho: np.ndarray, kappa: float, h: float, degree: int):
    """Mass diagonal and operator blocks of the dG system.

    Per-cell dof layout [v_0..v_p, p_0..p_p].  Returns
    (mass (n,s), a_lower (n-1,s,s), a_diag (n,s,s), a_upper (n-1,s,s)).
    """
    n = len(rho)
    q = degree + 1
    s = 2 * q
    t_right = np.ones(q)
    t_left = (-1.0) ** np.arange(q)

    mass = np.empty((n, s))
    weights = h / (2.0 * np.arange(q) + 1.0)
    mass[:, :q] = rho[:, None] * weights[None, :]
    mass[:, q:] = weights[None, :] / kappa

    a_diag = np.zeros((n, s, s))
    a_lower = np.zeros((max(n - 1, 0), s, s))
    a_upper = np.zeros((max(n - 1, 0), s, s))

    dmat = deriv_matrix(degree)
    a_diag[:, :q, q:] -= dmat
    a_diag[:, q:, :q] -= dmat

    z = np.sqrt(kappa * rho)
    # interior faces between cells i and i+1
    if n > 1:
        z_lo, z_hi = z[:-1], z[1:]
        coef = 1.0 / (z_lo + z_hi)
        c = coef[:, None, None]
        zo = z_lo[:, None, None]   # own impedance seen from the left cell
        zn = z_hi[:, None, None]

        # left cell (normal +1): own-own and own-neighbor couplings
        o = np.outer(t_right, t_right)
        o2 = np.outer(t_right, t_left)
        a_diag[:-1, q:, q:] += c * o
        a_diag[:-1, q:, :q] += c * zn * o
        a_diag[:-1, :q, q:] += c * zo * o
        a_diag[:-1, :q, :q] += c * zo * zn * o
        a_upper[:, q:, q:] -= c * o2
        a_upper[:, q:, :q] -= c * zn * o2
        a_upper[:, :q, q:] -= c * zo * o2
        a_upper[:, :q, :q] -= c * zo * zn * o2

        # right cell (normal -1): impedance roles swap
        zo, zn = zn, zo
        o = np.outer(t_left, t_left)
        o2 = np.outer(t_left, t_right)
        a_diag[1:, q:, q:] += c * o
        a_diag[1:, q:, :q] -= c * zn * o
        a_diag[1:, :q, q:] -= c * zo * o
        a_diag[1:, :q, :q] += c * zo * zn * o
        a_lower[:, q:, q:] -= c * o2
        a_lower[:, q:, :q] += c * zn * o2
        a_lower[:, :q, q:] += c * zo * o2
        a_lower[:, :q, :q] -= c * zo * zn * o2

    # reflecting boundary faces via mirror ghost states (v_ext.n = -v.n,
    # p_ext = p): adds the penalty <v.n, psi + Z phi.n>, which keeps the
    # operator positive semidefinite for any impedance
    o = np.outer(t_left, t_left)
    a_diag[0, q:, :q] -= o
    a_diag[0, :q, :q] += z[0] * o
    o = np.outer(t_right, t_right)
    a_diag[-1, q:, :q] += o
    a_diag[-1, :q, :q] += z[-1] * o

    return mass, a_lower, a_diag, a_upper


def gauss_points(n_cells: int, h: float, order: int):
    """Gauss-Legendre nodes/weights on every cell; returns (x (n,g), w (g,), xi)."""
    xi, w = np.polynomial.legendre.leggauss(order)
    centers = (np.arange(n_cells) + 0.5) * h
    x = centers[:, None] + 0.5 * h * xi[None, :]
    return x, 0.5 * h * w, xi


def project_profile(fn, n_cells: int, h: float, degree: int,
                    component: str) -> np.ndarray:
    """Weak-form source vector of a spatial profile: entries int fn P_t dx."""
    q = degree + 1
    s = 2 * q
    x, w, xi = gauss_points(n_cells, h, degree + 4)
    vand = np.polynomial.legendre.legvander(xi, degree)   # (g, q)
    vals = fn(x)                                          # (n, g)
    proj = np.einsum("ng,g,gq->nq", vals, w, vand)
    out = np.zeros((n_cells, s))
    if component == "v":
        out[:, :q] = proj
    elif component == "p":
        out[:, q:] = proj
    else:
        raise ValueError(f"component must be 'v' or 'p', got {component!r}")
    return out


def project_state(v_fn, p_fn, n_cells: int, h: float, degree: int) -> np.ndarray:
    """Modal L2 projection of initial data (v, p)."""
    q = degree + 1
    x, w, xi = gauss_points(n_cells, h, degree + 4)
    vand = np.polynomial.legendre.legvander(xi, degree)
    norms = h / (2.0 * np.arange(q) + 1.0)
    u0 = np.zeros((n_cells, 2 * q))
    u0[:, :q] = np.einsum("ng,g,gq->nq", v_fn(x), w, vand) / norms
    u0[:, q:] = np.einsum("ng,g,gq->nq", p_fn(x), w, vand) / norms
    return u0


def run_steps(mass, a_lower, a_diag, a_upper, tau: float, n_steps: int,
              sources, u0: np.ndarray):
    """Advance n_steps of implicit midpoint; sources is a list of
    (time_values_at_midpoints, space_vector (n,s)) pairs."""
    if sources:
        src_time = np.ascontiguousarray(
            np.stack([np.asarray(t, dtype=float) for t, _ in sources]))
        src_space = np.ascontiguousarray(
            np.stack([np.asarray(v, dtype=float) for _, v in sources]))
    else:
        n, s = mass.shape
        src_time = np.zeros((0, n_steps))
        src_space = np.zeros((0, n, s))
    return _kernels.wave_step_loop(
        np.ascontiguousarray(mass), np.ascontiguousarray(a_lower),
        np.ascontiguousarray(a_diag), np.ascontiguousarray(a_upper),
        float(tau), int(n_steps), src_time, src_space,
        np.ascontiguousarray(u0, dtype=float))


def modal_norm_sq(u: np.ndarray, h: float, degree: int,
                  cells: slice = slice(None)) -> float:
    """Exact L2 norm^2 of (v, p) over a cell range, from modal orthogonality."""
    q = degree + 1
    norms = h / (2.0 * np.arange(q) + 1.0)
    block = u[cells]
    return float(np.einsum("ns,s->", block[:, :q] ** 2, norms)
                 + np.einsum("ns,s->", block[:, q:] ** 2, norms))


def eval_modal(u: np.ndarray, degree: int, xi: np.ndarray):
    """Evaluate (v, p) at reference points xi in every cell."""
    q = degree + 1
    vand = np.polynomial.legendre.legvander(xi, degree)
    v = u[:, :q] @ vand.T
    p = u[:, q:] @ vand.T
    return v, p


def l2_error(u: np.ndarray, v_exact, p_exact, h: float, degree: int,
             t: float) -> float:
    """L2 error of (v, p) against exact fields evaluated at time t."""
    n = u.shape[0]
    x, w, xi = gauss_points(n, h, degree + 4)
    v, p = eval_modal(u, degree, xi)
    dv = v - v_exact(x, t)
    dp = p - p_exact(x, t)
    return math.sqrt(float(np.einsum("ng,g->", dv**2 + dp**2, w)))


def ricker(t: np.ndarray, a: float, amplitude: float) -> np.ndarray:
    return amplitude * (1.0 - (t / a) ** 2) * np.exp(-(t**2) / (2.0 * a**2))


def bump_profile(center: float, width: float):
    """Compactly supported C-infinity bump normalized to unit L1 mass."""
    xi, w = np.polynomial.legendre.leggauss(200)
    raw = np.exp(-1.0 / (1.0 - xi**2))
    mass = width * float(np.dot(w, raw))

    def profile(x):
        y = (np.asarray(x, dtype=float) - center) / width
        out = np.zeros_like(y)
        inside = np.abs(y) < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2)) / mass
        return out

    return profile


@dataclass(frozen=True)
class Wave1DSpec:
    kappa: float = 1.0
    degree: int = 1
    c_cfl: float = 2.0**-3
    final_time: float = 1.0
    h0: float = 2.0**-5
    cov: CovSpec = field(default_factory=CovSpec)
    ricker_a: float = math.pi / 10.0
    ricker_amplitude: float = 10.0
    bump_center: float = 0.5
    bump_width: float = 0.1
    qoi_lo: float = 0.25
    qoi_hi: float = 0.75
    cost_scale: float = 1.0

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError("degree must be 0, 1 or 2")
        if self.c_cfl <= 0.0:
            raise ValueError("c_cfl must be > 0")
        n0 = 1.0 / self.h0
        if abs(n0 - round(n0)) > 1e-12:
            raise ValueError("h0 must divide the unit domain evenly")
        for edge in (self.qoi_lo, self.qoi_hi):
            if abs(edge / self.h0 - round(edge / self.h0)) > 1e-12:
                raise ValueError("QoI region edges must align with cell edges")
        if not 0.0 <= self.qoi_lo < self.qoi_hi <= 1.0:
            raise ValueError("QoI region must be inside (0, 1)")


class Wave1DProblem:
    """SampleProblem wrapper: log-normal density -> wave solve -> QoI."""

    def __init__(self, spec: Wave1DSpec, measured_cost: bool = False):
        self.spec = spec
        self.measured_cost = measured_cost
        self.descriptor = ModelDescriptor(spatial_dimension=1, h0=spec.h0)
        self._samplers: dict[int, FieldSampler] = {}
        self._bump = bump_profile(spec.bump_center, spec.bump_width)
        self._bump_proj: dict[int, np.ndarray] = {}
        self._cache_lock = threading.Lock()

    def n_cells(self, level: int) -> int:
        return round(1.0 / (self.spec.h0 * 0.5**level))

    def n_steps(self, level: int) -> int:
        h = self.spec.h0 * 0.5**level
        return max(round(self.spec.final_time / (self.spec.c_cfl * h)), 1)

    def modeled_cost(self, level: int) -> float:
        per = self.spec.cost_scale * (self.spec.degree + 1)
        cost = per * self.n_steps(level) * self.n_cells(level)
        if level > 0:
            cost += per * self.n_steps(level - 1) * self.n_cells(level - 1)
        return cost

    def _sampler(self, level: int) -> FieldSampler:
        with self._cache_lock:
            if level not in self._samplers:
                self._samplers[level] = FieldSampler(self.spec.cov,
                                                     self.n_cells(level))
            return self._samplers[level]

    def _source(self, level: int):
        n = self.n_cells(level)
        steps = self.n_steps(level)
        tau = self.spec.final_time / steps
        with self._cache_lock:
            if n not in self._bump_proj:
                self._bump_proj[n] = project_profile(
                    self._bump, n, 1.0 / n, self.spec.degree, "p")
            proj = self._bump_proj[n]
        t_mid = (np.arange(steps) + 0.5) * tau
        g1 = ricker(t_mid, self.spec.ricker_a, self.spec.ricker_amplitude)
        return [(g1, proj)]

    def _solve(self, rho: np.ndarray, level: int) -> np.ndarray:
        spec = self.spec
        n = len(rho)
        h = 1.0 / n
        steps = self.n_steps(level)
        tau = spec.final_time / steps
        blocks = assemble_blocks(rho, spec.kappa, h, spec.degree)
        u0 = np.zeros((n, 2 * (spec.degree + 1)))
        u, _ = run_steps(*blocks, tau, steps, self._source(level), u0)
        return u

    def _qoi(self, u: np.ndarray, level: int) -> float:
        h = 1.0 / self.n_cells(level)
        i0 = round(self.spec.qoi_lo / h)
        i1 = round(self.spec.qoi_hi / h)
        return math.sqrt(modal_norm_sq(u, h, self.spec.degree, slice(i0, i1)))

    def _evaluate_seed(self, level: int, seed: int):
        t0 = time.thread_time() if self.measured_cost else 0.0
        rho_fine = self._sampler(level).sample(seed)
        u_fine = self._solve(rho_fine, level)
        q_fine = self._qoi(u_fine, level)
        if level == 0:
            q_coarse = 0.0
        else:
            rho_coarse = 0.5 * (rho_fine[0::2] + rho_fine[1::2])
            u_coarse = self._solve(rho_coarse, level - 1)
            q_coarse = self._qoi(u_coarse, level - 1)
        cost = (time.thread_time() - t0 if self.measured_cost
                else self.modeled_cost(level))
        return q_fine, q_coarse, cost

    def evaluate(self, level: int, seed: int) -> tuple[float, float, float]:
        q_fine, q_coarse, cost = self._evaluate_seed(level, seed)
        if not (math.isfinite(q_fine) and math.isfinite(q_coarse)):
            raise DivergedSampleError(level, -1, seed)
        return q_fine, q_coarse, cost

    def evaluate_ordinals(self, level: int, start: int, count: int,
                          master_seed: int):
        seeds = sample_seeds(master_seed, level,
                             np.arange(start, start + count, dtype=np.uint64))
        qf = np.empty(count)
        qc = np.empty(count)
        cost = np.empty(count)
        for i, seed in enumerate(seeds):
            qf[i], qc[i], cost[i] = self._evaluate_seed(level, int(seed))
        return qf, qc, cost

    def snapshot(self, level: int, seed: int):
        """Field and final-time solution at cell midpoints (for dumps)."""
        rho = self._sampler(level).sample(seed)
        u = self._solve(rho, level)
        v, p = eval_modal(u, self.spec.degree, np.zeros(1))
        n = self.n_cells(level)
        x = (np.arange(n) + 0.5) / n
        return x, rho, v[:, 0], p[:, 0]
