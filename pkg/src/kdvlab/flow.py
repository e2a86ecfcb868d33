"""Time integration of the full and frequency-truncated Galerkin flows.

The evolution in coefficient space is

    d/dt u_hat(k) = i k^(2j+1) u_hat(k) + N_hat(k),
    N = -(1/2) d_x Pi(u^2),

with Pi the sharp projection to |k| <= K (full flavor) or |k| <= N
(truncated flavor, the finite-dimensional Hamiltonian flow). The stiff
linear phase exp(i k^(2j+1) t) is always applied exactly through
multipliers; only the nonlinearity is stepped. The default scheme is
ETDRK4 with contour-integral evaluation of the phi-function coefficients
(cancellation-safe for small k); lawson_rk4 is an integrating-factor
alternative of the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import (
    FourierField,
    GridSpec,
    conserved_quantities,
    symplectic_form,
)

__all__ = [
    "FlowSpec",
    "Trajectory",
    "FlowBlowupError",
    "linear_propagate",
    "nonlinear_rhs",
    "integrate",
    "conservation_report",
    "flow_jacobian",
    "check_symplectic",
]

_SCHEMES = ("etdrk4", "lawson_rk4")
_CONTOUR_POINTS = 32
JACOBIAN_DIM_CAP = 64


class FlowBlowupError(RuntimeError):
    """Raised when a coefficient magnitude crosses the blow-up guard."""


@dataclass(frozen=True)
class FlowSpec:
    """Integration configuration.

    flavor "full" projects the nonlinearity to |k| <= K, "truncated" to
    |k| <= N (requires N <= K). T may be negative (backward integration);
    dt is a positive target step, adjusted to land exactly on T.
    """

    grid: GridSpec
    dt: float
    T: float
    flavor: str = "full"
    N: float | None = None
    scheme: str = "etdrk4"
    nonlinear: bool = True
    sample_stride: int = 1
    blowup_threshold: float = 1e12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step dt must be positive, got {self.dt}")
        if self.flavor not in ("full", "truncated"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.flavor == "truncated":
            if self.N is None:
                raise ValueError("truncated flavor requires N")
            if self.N > self.grid.K / self.grid.mu:
                raise ValueError(
                    f"truncated N={self.N} exceeds the grid band "
                    f"K/mu={self.grid.K / self.grid.mu:g}"
                )
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass
class Trajectory:
    """Time-stamped coefficient snapshots plus integrator metadata."""

    times: np.ndarray
    fields: list
    spec: FlowSpec
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) == 0) and len(self.times) > 1:
            raise ValueError("trajectory timestamps must be strictly monotone")


def _phases(grid: GridSpec) -> np.ndarray:
    k = grid.frequencies
    return 1j * k ** (2 * grid.j + 1)


def linear_propagate(u: FourierField, t: float) -> FourierField:
    """Exact free evolution u_hat(k) -> exp(i k^(2j+1) t) u_hat(k)."""
    return FourierField(u.grid, u.coeffs * np.exp(_phases(u.grid) * t))


def _band_mask(grid: GridSpec, flavor: str, N: float | None) -> np.ndarray:
    if flavor == "full":
        return np.ones(grid.K, dtype=bool)
    return grid.frequencies <= N


def _rhs_function(spec: FlowSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized nonlinearity on coefficient arrays: -(1/2) d_x Pi(u^2)."""
    g = spec.grid
    P = g.physical_points
    mask = _band_mask(g, spec.flavor, spec.N)
    ik = 1j * g.frequencies
    phys_scale = P / (2.0 * np.pi * g.mu)
    spec_scale = 2.0 * np.pi * g.mu / P
    half_len = P // 2 + 1

    def rhs(c: np.ndarray) -> np.ndarray:
        half = np.zeros(half_len, dtype=np.complex128)
        half[1 : g.K + 1] = c * phys_scale
        w = np.fft.irfft(half, n=P)
        sq = np.fft.rfft(w * w)[1 : g.K + 1] * spec_scale
        return np.where(mask, -0.5 * ik * sq, 0.0)

    return rhs


def nonlinear_rhs(u: FourierField, flavor: str = "full", N: float | None = None) -> FourierField:
    """Nonlinear tendency -(1/2) d_x Pi(u^2) as a field (alias-free)."""
    spec = FlowSpec(grid=u.grid, dt=1.0, T=1.0, flavor=flavor, N=N)
    return FourierField(u.grid, _rhs_function(spec)(u.coeffs.copy()))


def _etdrk4_tables(lin: np.ndarray, h: float) -> dict:
    """Cox-Matthews coefficients via contour averaging around each h*L.

    The mean of an entire function over a unit circle centered at z equals
    its value at z to spectral accuracy, so the phi-function combinations
    are evaluated without subtractive cancellation even when |h*L| is tiny.
    """
    hl = h * lin
    theta = np.exp(1j * np.pi * (np.arange(_CONTOUR_POINTS) + 0.5) / _CONTOUR_POINTS * 2.0)
    z = hl[:, None] + theta[None, :]
    ez = np.exp(z)
    q = h * np.mean((np.exp(z / 2.0) - 1.0) / z, axis=1)
    f1 = h * np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z**3, axis=1)
    f2 = h * np.mean((2.0 + z + ez * (z - 2.0)) / z**3, axis=1)
    f3 = h * np.mean((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z**3, axis=1)
    return {
        "e_full": np.exp(hl),
        "e_half": np.exp(hl / 2.0),
        "q": q,
        "f1": f1,
        "f2": f2,
        "f3": f3,
    }


class _Stepper:
    """One-step integrator with precomputed exponential tables."""

    def __init__(self, spec: FlowSpec, h: float):
        self.spec = spec
        self.h = h
        lin = _phases(spec.grid)
        if spec.nonlinear:
            self.rhs = _rhs_function(spec)
        else:
            self.rhs = None
        self.max_rhs = 0.0
        if spec.scheme == "etdrk4" and self.rhs is not None:
            self.tab = _etdrk4_tables(lin, h)
        else:
            self.tab = {"e_full": np.exp(h * lin), "e_half": np.exp(h * lin / 2.0)}

    def step(self, c: np.ndarray) -> np.ndarray:
        t = self.tab
        if self.rhs is None:
            return t["e_full"] * c
        if self.spec.scheme == "etdrk4":
            n0 = self.rhs(c)
            a = t["e_half"] * c + t["q"] * n0
            na = self.rhs(a)
            b = t["e_half"] * c + t["q"] * na
            nb = self.rhs(b)
            cc = t["e_half"] * a + t["q"] * (2.0 * nb - n0)
            nc = self.rhs(cc)
            out = t["e_full"] * c + t["f1"] * n0 + 2.0 * t["f2"] * (na + nb) + t["f3"] * nc
        else:  # lawson_rk4
            h = self.h
            e1, e2 = t["e_full"], t["e_half"]
            n0 = self.rhs(c)
            na = self.rhs(e2 * (c + 0.5 * h * n0))
            nb = self.rhs(e2 * c + 0.5 * h * na)
            nc = self.rhs(e1 * c + h * e2 * nb)
            out = e1 * c + (h / 6.0) * (e1 * n0 + 2.0 * e2 * (na + nb) + nc)
        self.max_rhs = max(self.max_rhs, float(np.max(np.abs(n0))))
        return out


def integrate(u0: FourierField, spec: FlowSpec) -> Trajectory:
    """Run the flow from u0 over [0, T]; samples every sample_stride steps.

    Truncated-flavor data is projected onto |k| <= N rather than rejected.
    The requested dt is adjusted to the nearest step count landing exactly
    on T. A coefficient magnitude above the blow-up threshold aborts.
    """
    g = spec.grid
    if (u0.grid.j, u0.grid.K, u0.grid.mu) != (g.j, g.K, g.mu):
        raise ValueError("initial data grid does not match flow grid")
    c = u0.coeffs.copy()
    if spec.flavor == "truncated":
        c = np.where(_band_mask(g, "truncated", spec.N), c, 0.0)

    if spec.T == 0.0:
        field0 = FourierField(g, c)
        return Trajectory(
            times=np.array([0.0]),
            fields=[field0],
            spec=spec,
            stats={"steps": 0, "max_rhs": 0.0, "dt_actual": 0.0},
        )

    n_steps = max(1, round(abs(spec.T) / spec.dt))
    h = spec.T / n_steps
    stepper = _Stepper(spec, h)

    times = [0.0]
    fields = [FourierField(g, c)]
    for step in range(1, n_steps + 1):
        c = stepper.step(c)
        peak = float(np.max(np.abs(c)))
        if not np.isfinite(peak) or peak > spec.blowup_threshold:
            raise FlowBlowupError(
                f"blow-up guard tripped at t={step * h:.6g}: max |coeff| = {peak:.3e} "
                f"> {spec.blowup_threshold:.1e}"
            )
        if step % spec.sample_stride == 0 or step == n_steps:
            times.append(step * h)
            fields.append(FourierField(g, c))
    return Trajectory(
        times=np.array(times),
        fields=fields,
        spec=spec,
        stats={"steps": n_steps, "max_rhs": stepper.max_rhs, "dt_actual": h},
    )


def conservation_report(traj: Trajectory) -> tuple[list, dict]:
    """Per-sample conserved quantities plus maximal drifts.

    The reported Hamiltonian uses the full cubic term also for truncated
    trajectories: projection does not change the integral of u^3 when the
    field itself is band-limited, so H remains the invariant.
    """
    reports = [
        conserved_quantities(u, timestamp=t) for t, u in zip(traj.times, traj.fields)
    ]
    e0 = reports[0].l2_energy
    h0 = reports[0].hamiltonian
    drifts = {
        "mass": max(abs(r.mass) for r in reports),
        "l2_energy": max(abs(r.l2_energy - e0) for r in reports)
        / max(abs(e0), 1e-300),
        "hamiltonian": max(abs(r.hamiltonian - h0) for r in reports)
        / max(abs(h0), 1e-300),
    }
    return reports, drifts


def _coords_of(c: np.ndarray, n_modes: int) -> np.ndarray:
    out = np.empty(2 * n_modes)
    out[0::2] = c[:n_modes].real
    out[1::2] = c[:n_modes].imag
    return out


def _field_of(x: np.ndarray, grid: GridSpec, n_modes: int) -> FourierField:
    c = np.zeros(grid.K, dtype=np.complex128)
    c[:n_modes] = x[0::2] + 1j * x[1::2]
    return FourierField(grid, c)


def flow_jacobian(u0: FourierField, spec: FlowSpec, h: float) -> np.ndarray:
    """Central-difference Jacobian of u0 -> S(T) u0 in real coordinates.

    Coordinates are (Re u_hat(k), Im u_hat(k)) for 0 < k <= N of a
    truncated flow; dimension 2N is capped for cost.
    """
    if spec.flavor != "truncated":
        raise ValueError("flow_jacobian is defined for the truncated flavor")
    n_modes = int(spec.N * spec.grid.mu)
    dim = 2 * n_modes
    if dim > JACOBIAN_DIM_CAP:
        raise ValueError(f"jacobian dimension {dim} exceeds cap {JACOBIAN_DIM_CAP}")
    if not h > 0:
        raise ValueError("finite-difference step must be positive")

    x0 = _coords_of(u0.coeffs, n_modes)
    J = np.empty((dim, dim))
    for i in range(dim):
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        fp = integrate(_field_of(xp, spec.grid, n_modes), spec).fields[-1]
        fm = integrate(_field_of(xm, spec.grid, n_modes), spec).fields[-1]
        J[:, i] = (_coords_of(fp.coeffs, n_modes) - _coords_of(fm.coeffs, n_modes)) / (
            2.0 * h
        )
    return J


def symplectic_matrix(grid: GridSpec, N: float) -> np.ndarray:
    """Matrix of the symplectic pairing on the (Re, Im) coordinate basis.

    Assembled by evaluating the form on basis fields; block-diagonal with
    antisymmetric 2x2 blocks carrying the 1/k antiderivative weight.
    """
    n_modes = int(N * grid.mu)
    dim = 2 * n_modes
    basis = [
        _field_of(np.eye(dim)[i], grid, n_modes) for i in range(dim)
    ]
    omega = np.zeros((dim, dim))
    for a in range(dim):
        for b in range(dim):
            omega[a, b] = symplectic_form(basis[a], basis[b])
    return omega


def check_symplectic(J: np.ndarray, grid: GridSpec, N: float) -> float:
    """Defect max |J^T Omega J - Omega| of a flow-map Jacobian."""
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("jacobian must be square")
    if J.shape[0] % 2 != 0:
        raise ValueError("jacobian dimension must be even")
    omega = symplectic_matrix(grid, N)
    if omega.shape != J.shape:
        raise ValueError(
            f"jacobian dimension {J.shape[0]} does not match 2N={omega.shape[0]}"
        )
    return float(np.max(np.abs(J.T @ omega @ J - omega)))
