"""I-method machinery: multiplier, multilinear forms and modified energies.

The operator I rescales high frequencies by an even weight m that is 1
below a threshold N and decays like N^(-s) |xi|^s above 2N. Modified
energies are built from n-linear lattice sums

    Lambda_n(w; u_1..u_n)
        = (2*pi*mu)^(1-n) * sum over Gamma_n of w(k_1..k_n) prod u_hat(k_i)

restricted to nonzero entries with |index| <= K; with this normalization
Lambda_3(1) equals the integral of u^3. The correction multipliers follow
the cascade

    d/dt E2 = Lambda_3(M3),   sigma3 = -M3/alpha3,
    d/dt E3 = Lambda_4(M4),   sigma4 = -M4/alpha4,
    d/dt E4 = Lambda_5(M5),

where M3 = -i [m(x1) m(x2+x3) (x2+x3)]_sym = (i/3) sum_i m^2(x_i) x_i on
the hyperplane, M4 = -(3i/2) [sigma3(x1,x2,x3+x4) (x3+x4)]_sym and
M5 = -2i [sigma4(x1,x2,x3,x4+x5) (x4+x5)]_sym, with [.]_sym the mean over
all argument permutations. Any symmetrization term whose pair-sum factor
vanishes contributes exactly 0, and sigma4 is defined as 0 on resonant
tuples (alpha4 = 0), where a runtime check confirms M4 vanishes there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .spectral import FourierField, GridSpec

__all__ = [
    "IMultiplier",
    "MultilinearForm",
    "eval_m",
    "apply_I",
    "lambda_n",
    "constant_form",
    "big_m3",
    "big_m3_symmetrized",
    "sigma3",
    "big_m4",
    "sigma4",
    "big_m5",
    "modified_energy",
    "DriftReport",
    "drift_oracle",
]

QUINTIC_K_CAP = 16
IMAG_RESIDUE_TOL = 1e-10
RESONANT_M4_TOL = 1e-10

_M_SHAPES = ("clipped_power", "smooth_log")


@dataclass(frozen=True)
class IMultiplier:
    """Fourier weight m(xi) parameterized by (s, N, shape).

    m = 1 for |xi| <= N and m = N^(-s) |xi|^s for |xi| >= 2N. The default
    clipped_power shape uses min(1, (|xi|/N)^s) everywhere, which matches
    both mandated regions and is continuous; smooth_log interpolates
    monotonically in log|xi| on [N, 2N] instead.
    """

    s: float
    N: float
    shape: str = "clipped_power"

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError(f"threshold N must be positive, got {self.N}")
        if self.s > 0:
            raise ValueError(f"Sobolev index s must be <= 0, got {self.s}")
        if self.shape not in _M_SHAPES:
            raise ValueError(f"unknown multiplier shape {self.shape!r}")

    @property
    def key(self) -> tuple:
        return (self.s, self.N, self.shape)


def _m_array(mult: IMultiplier, k: np.ndarray) -> np.ndarray:
    a = np.abs(np.asarray(k, dtype=np.float64)) / mult.N
    if mult.s == 0.0:
        return np.ones_like(a)
    if mult.shape == "clipped_power":
        return np.where(a <= 1.0, 1.0, np.where(a > 0, a, 1.0) ** mult.s)
    # smooth_log: smoothstep in t = log2(|xi|/N) on [0, 1]
    t = np.log2(np.clip(a, 1.0, 2.0))
    h = 3.0 * t * t - 2.0 * t**3
    mid = 2.0 ** (mult.s * h)
    return np.where(a <= 1.0, 1.0, np.where(a >= 2.0, np.where(a > 0, a, 1.0) ** mult.s, mid))


def eval_m(mult: IMultiplier, k) -> float | np.ndarray:
    """Multiplier value at frequency k (scalar or array)."""
    out = _m_array(mult, np.asarray(k, dtype=np.float64))
    if np.isscalar(k) or np.ndim(k) == 0:
        return float(out)
    return out


def apply_I(u: FourierField, mult: IMultiplier) -> FourierField:
    """Scale every coefficient by m(k); identity on spectra inside [-N, N]."""
    return FourierField(u.grid, u.coeffs * _m_array(mult, u.grid.frequencies))


@dataclass(frozen=True)
class MultilinearForm:
    """n-point frequency multiplier evaluated over the hyperplane Gamma_n.

    weight maps n integer-index arrays (frequencies are index/mu) to a
    complex array. cache_key, when set, lets evaluators reuse weight
    tables across calls on the same lattice.
    """

    n: int
    weight: Callable[..., np.ndarray]
    tag: str = "custom"
    cache_key: tuple | None = None


def constant_form(n: int, value: complex = 1.0) -> MultilinearForm:
    def w(*idx):
        return np.full(idx[0].shape, value, dtype=np.complex128)

    return MultilinearForm(n=n, weight=w, tag="constant", cache_key=("const", n, value))


def _int64_pow_guard(j: int, max_abs: int, nterms: int = 5) -> None:
    e = 2 * j + 1
    if nterms * max_abs**e >= 2**62:
        raise OverflowError(
            f"|index|^{e} with |index| <= {max_abs} exceeds exact int64 range; "
            f"reduce K or j"
        )


def _pn_int(idx_arrays: Sequence[np.ndarray], j: int) -> np.ndarray:
    """Exact sum of (2j+1)-th powers of integer index arrays (int64)."""
    mx = max(int(np.max(np.abs(a))) if a.size else 0 for a in idx_arrays)
    _int64_pow_guard(j, mx, nterms=len(idx_arrays))
    e = 2 * j + 1
    acc = np.zeros(idx_arrays[0].shape, dtype=np.int64)
    for a in idx_arrays:
        acc = acc + a.astype(np.int64) ** e
    return acc


@lru_cache(maxsize=32)
def _hyperplane_tuples(n: int, K: int) -> tuple:
    """Integer index tuples on Gamma_n with nonzero entries, |index| <= K."""
    vals = np.concatenate([np.arange(-K, 0), np.arange(1, K + 1)]).astype(np.int64)
    if n == 2:
        return (vals.copy(), -vals)
    grids = np.meshgrid(*([vals] * (n - 1)), indexing="ij")
    free = [g.reshape(-1) for g in grids]
    last = -sum(free)
    mask = (last != 0) & (np.abs(last) <= K)
    out = tuple(a[mask] for a in free) + (last[mask],)
    for a in out:
        a.flags.writeable = False
    return out


_WEIGHT_CACHE: dict = {}


def _form_weights(form: MultilinearForm, K: int) -> np.ndarray:
    idx = _hyperplane_tuples(form.n, K)
    if form.cache_key is None:
        return form.weight(*idx)
    key = (form.cache_key, form.n, K)
    if key not in _WEIGHT_CACHE:
        _WEIGHT_CACHE[key] = form.weight(*idx)
    return _WEIGHT_CACHE[key]


def _coeff_table(u: FourierField) -> np.ndarray:
    """Lookup table over signed indices: table[idx + K] = u_hat(idx/mu)."""
    K = u.grid.K
    table = np.zeros(2 * K + 1, dtype=np.complex128)
    table[K + 1 :] = u.coeffs
    table[:K] = np.conj(u.coeffs[::-1])
    return table


def _lambda_with_scale(
    form: MultilinearForm, fields: Sequence[FourierField]
) -> tuple[complex, float]:
    if len(fields) != form.n:
        raise ValueError(f"form arity {form.n} != {len(fields)} fields")
    grid = fields[0].grid
    for f in fields[1:]:
        if (f.grid.j, f.grid.K, f.grid.mu) != (grid.j, grid.K, grid.mu):
            raise ValueError("lambda_n requires all fields on one grid")
    if form.n >= 5 and grid.K > QUINTIC_K_CAP:
        raise ValueError(
            f"quintic hyperplane sums are capped at K={QUINTIC_K_CAP}, got K={grid.K}"
        )
    idx = _hyperplane_tuples(form.n, grid.K)
    w = _form_weights(form, grid.K)
    prod = np.ones(idx[0].shape, dtype=np.complex128)
    for a, f in zip(idx, fields):
        prod = prod * _coeff_table(f)[a + grid.K]
    norm = (2.0 * np.pi * grid.mu) ** (1 - form.n)
    terms = w * prod
    return norm * complex(np.sum(terms)), norm * float(np.sum(np.abs(terms)))


def lambda_n(form: MultilinearForm, fields: Sequence[FourierField]) -> complex:
    """Evaluate Lambda_n(form; fields) over the truncated hyperplane lattice."""
    value, _ = _lambda_with_scale(form, fields)
    return value


def _real_part(value: complex, scale: float, what: str) -> float:
    if abs(value.imag) > IMAG_RESIDUE_TOL * max(scale, 1e-300):
        raise ArithmeticError(
            f"{what}: imaginary residue {value.imag:.3e} exceeds "
            f"{IMAG_RESIDUE_TOL:.0e} x term scale {scale:.3e} (symmetrization bug?)"
        )
    return value.real


# ---------------------------------------------------------------------------
# Correction multipliers
# ---------------------------------------------------------------------------


def big_m3(mult: IMultiplier, grid: GridSpec) -> MultilinearForm:
    """Closed form M3 = (i/3) (m^2(k1) k1 + m^2(k2) k2 + m^2(k3) k3)."""
    mu = grid.mu

    def w(i1, i2, i3):
        acc = np.zeros(i1.shape, dtype=np.float64)
        for a in (i1, i2, i3):
            k = a / mu
            acc = acc + _m_array(mult, k) ** 2 * k
        return (1j / 3.0) * acc

    return MultilinearForm(3, w, tag="M3", cache_key=("M3", mult.key, grid.j, mu))


def big_m3_symmetrized(mult: IMultiplier, grid: GridSpec) -> MultilinearForm:
    """M3 as the explicit mean over S3 of -i m(k1) m(k2+k3) (k2+k3)."""
    mu = grid.mu

    def w(i1, i2, i3):
        acc = np.zeros(i1.shape, dtype=np.float64)
        for a, b, c in ((i1, i2, i3), (i1, i3, i2), (i2, i1, i3),
                        (i2, i3, i1), (i3, i1, i2), (i3, i2, i1)):
            ka = a / mu
            p = (b + c) / mu
            acc = acc + _m_array(mult, ka) * _m_array(mult, p) * p
        return (-1j / 6.0) * acc

    return MultilinearForm(3, w, tag="M3sym", cache_key=("M3sym", mult.key, grid.j, mu))


def _sigma3_values(
    mult: IMultiplier,
    grid: GridSpec,
    i1: np.ndarray,
    i2: np.ndarray,
    i3: np.ndarray,
    active: np.ndarray | None = None,
) -> np.ndarray:
    """Real sigma3 on Gamma_3 index tuples; inactive lanes return 0.

    alpha3 = i mu^-(2j+1) P3(indices) never vanishes on active lanes
    (nonzero entries), by the exact factorization; a vanishing P3 there
    indicates a bug and raises.
    """
    if active is None:
        active = np.ones(i1.shape, dtype=bool)
    p3 = _pn_int((i1, i2, i3), grid.j)
    if np.any((p3 == 0) & active):
        raise ArithmeticError(
            "alpha3 = 0 on a nonzero-entry lattice tuple: contradicts the "
            "exact factorization of the resonance polynomial"
        )
    mu = grid.mu
    num = np.zeros(i1.shape, dtype=np.float64)
    for a in (i1, i2, i3):
        k = a / mu
        num = num + _m_array(mult, k) ** 2 * k
    p3_freq = p3.astype(np.float64) * mu ** (-(2 * grid.j + 1))
    denom = np.where(active, p3_freq, 1.0)
    return np.where(active, -(num / 3.0) / denom, 0.0)


def sigma3(mult: IMultiplier, grid: GridSpec) -> MultilinearForm:
    """sigma3 = -M3/alpha3; real, even, permutation-symmetric."""

    def w(i1, i2, i3):
        return _sigma3_values(mult, grid, i1, i2, i3).astype(np.complex128)

    return MultilinearForm(3, w, tag="sigma3", cache_key=("sigma3", mult.key, grid.j, grid.mu))


def _pair_lane(pair: np.ndarray, cutoff: int | None) -> np.ndarray:
    lane = pair != 0
    if cutoff is not None:
        lane &= np.abs(pair) <= cutoff
    return lane


def _m4_values(
    mult: IMultiplier,
    grid: GridSpec,
    idx: tuple,
    active: np.ndarray | None = None,
    cutoff: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(M4 values, max |summand|) at Gamma_4 index tuples.

    Pair reduction of the S4 symmetrization: each of the 6 pair choices
    {a,b} contributes sigma3(rest, sum) * sum, and a vanishing pair sum
    contributes exactly 0. With a lattice cutoff, pair sums above it are
    dropped as well: they correspond to modes absent from the K-truncated
    Galerkin system, whose energy derivative this multiplier represents.
    """
    if active is None:
        active = np.ones(idx[0].shape, dtype=bool)
    mu = grid.mu
    acc = np.zeros(idx[0].shape, dtype=np.float64)
    scale = np.zeros(idx[0].shape, dtype=np.float64)
    for a, b in combinations(range(4), 2):
        c, d = (x for x in range(4) if x not in (a, b))
        pair = idx[a] + idx[b]
        lane = active & _pair_lane(pair, cutoff)
        s3 = _sigma3_values(mult, grid, idx[c], idx[d], np.where(lane, pair, 1), lane)
        term = s3 * (pair / mu)
        acc = acc + term
        scale = np.maximum(scale, np.abs(term))
    return (-0.25j) * acc, scale


def big_m4(
    mult: IMultiplier, grid: GridSpec, lattice_cutoff: int | None = None
) -> MultilinearForm:
    """M4 = -(3i/2) [sigma3(k1,k2,k3+k4) (k3+k4)]_sym.

    lattice_cutoff (index units) restricts symmetrization pair sums to the
    stored lattice; None gives the continuum multiplier.
    """

    def w(i1, i2, i3, i4):
        values, _ = _m4_values(mult, grid, (i1, i2, i3, i4), cutoff=lattice_cutoff)
        return values

    return MultilinearForm(
        4, w, tag="M4", cache_key=("M4", mult.key, grid.j, grid.mu, lattice_cutoff)
    )


def _sigma4_values(
    mult: IMultiplier,
    grid: GridSpec,
    idx: tuple,
    active: np.ndarray | None = None,
    cutoff: int | None = None,
) -> np.ndarray:
    """sigma4 = -M4/alpha4 off the resonant set, 0 on it.

    On resonant tuples (alpha4 = 0, exact integer test) the pointwise
    envelope for M4 forces M4 = 0; asserted at RESONANT_M4_TOL relative
    to the largest symmetrized summand.
    """
    if active is None:
        active = np.ones(idx[0].shape, dtype=bool)
    p4 = _pn_int(idx, grid.j)
    resonant = (p4 == 0) & active
    m4, scale = _m4_values(mult, grid, idx, active, cutoff)
    if np.any(resonant):
        bad = np.abs(m4[resonant]) > RESONANT_M4_TOL * np.maximum(
            scale[resonant], 1e-300
        )
        if np.any(bad):
            worst = float(np.max(np.abs(m4[resonant])))
            raise ArithmeticError(
                f"M4 does not vanish on a resonant tuple (|M4| up to {worst:.3e}); "
                "contradicts the resonant-set envelope"
            )
    mu = grid.mu
    p4_freq = p4.astype(np.float64) * mu ** (-(2 * grid.j + 1))
    lane = active & ~resonant
    alpha4 = 1j * np.where(lane, p4_freq, 1.0)
    return np.where(lane, -m4 / alpha4, 0.0)


def sigma4(
    mult: IMultiplier, grid: GridSpec, lattice_cutoff: int | None = None
) -> MultilinearForm:
    """sigma4 = -M4/alpha4 with the resonant-set zero convention."""

    def w(i1, i2, i3, i4):
        return _sigma4_values(mult, grid, (i1, i2, i3, i4), cutoff=lattice_cutoff)

    return MultilinearForm(
        4, w, tag="sigma4", cache_key=("sigma4", mult.key, grid.j, grid.mu, lattice_cutoff)
    )


def big_m5(
    mult: IMultiplier, grid: GridSpec, lattice_cutoff: int | None = None
) -> MultilinearForm:
    """M5 = -2i [sigma4(k1,k2,k3,k4+k5) (k4+k5)]_sym."""
    mu = grid.mu

    def w(*idx):
        acc = np.zeros(idx[0].shape, dtype=np.complex128)
        for a, b in combinations(range(5), 2):
            rest = [idx[x] for x in range(5) if x not in (a, b)]
            pair = idx[a] + idx[b]
            lane = _pair_lane(pair, lattice_cutoff)
            s4 = _sigma4_values(
                mult, grid, (*rest, np.where(lane, pair, 1)), lane, lattice_cutoff
            )
            acc = acc + s4 * np.where(lane, pair / mu, 0.0)
        return (-1j / 5.0) * acc

    return MultilinearForm(
        5, w, tag="M5", cache_key=("M5", mult.key, grid.j, grid.mu, lattice_cutoff)
    )


def _successor_form(order: int, mult: IMultiplier, grid: GridSpec) -> MultilinearForm:
    """Multiplier of Lambda_(order+1) equal to d/dt E^order on the K-lattice."""
    if order == 2:
        return big_m3(mult, grid)
    if order == 3:
        return big_m4(mult, grid, lattice_cutoff=grid.K)
    return big_m5(mult, grid, lattice_cutoff=grid.K)


# ---------------------------------------------------------------------------
# Modified energies and the drift oracle
# ---------------------------------------------------------------------------


def modified_energy(u: FourierField, mult: IMultiplier, order: int) -> float:
    """E2 = ||Iu||_{L2}^2; E3 = E2 + Lambda_3(sigma3); E4 = E3 + Lambda_4(sigma4).

    The quartic correction uses the K-lattice-consistent sigma4 so the
    derivative identities hold exactly for the integrated Galerkin system.
    """
    if order not in (2, 3, 4):
        raise ValueError(f"order must be 2, 3 or 4, got {order}")
    m = _m_array(mult, u.grid.frequencies)
    value = 2.0 * np.sum(m * m * np.abs(u.coeffs) ** 2) / (2.0 * np.pi * u.grid.mu)
    if order >= 3:
        corr, scale = _lambda_with_scale(sigma3(mult, u.grid), [u] * 3)
        value += _real_part(corr, scale, "Lambda_3 correction")
    if order >= 4:
        form = sigma4(mult, u.grid, lattice_cutoff=u.grid.K)
        corr, scale = _lambda_with_scale(form, [u] * 4)
        value += _real_part(corr, scale, "Lambda_4 correction")
    return float(value)


@dataclass
class DriftReport:
    """Finite-difference derivative of a modified energy vs its Lambda form."""

    order: int
    times: np.ndarray
    fd: np.ndarray
    direct: np.ndarray
    max_abs_discrepancy: float
    max_rel_discrepancy: float
    reference_scale: float


def drift_oracle(traj, mult: IMultiplier, order: int) -> DriftReport:
    """Compare centered-difference d/dt E^order against Lambda_(order+1)(M).

    The derivative identity holds exactly for the K-mode Galerkin system,
    so the trajectory must come from the full flavor (or a truncated one
    with N >= K). Relative discrepancy is measured against max |Lambda|
    over the interior samples. When the Lambda series vanishes
    identically, a finite-difference series within the round-off floor of
    the energies counts as zero discrepancy (the identity is 0 = 0);
    anything above that floor reports as infinite.
    """
    if order not in (2, 3, 4):
        raise ValueError(f"order must be 2, 3 or 4, got {order}")
    if len(traj.fields) < 3:
        raise ValueError("drift oracle needs at least 3 trajectory samples")
    spec = traj.spec
    if spec.flavor == "truncated" and spec.N < spec.grid.K / spec.grid.mu:
        raise ValueError(
            "drift oracle requires the full Galerkin flow: the derivative "
            "identity holds for the K-mode system, not the N-truncated one"
        )
    t = np.asarray(traj.times)
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-15):
        raise ValueError("drift oracle needs uniform sample spacing")

    energies = np.array([modified_energy(u, mult, order) for u in traj.fields])
    form = _successor_form(order, mult, traj.fields[0].grid)
    direct = np.empty(len(traj.fields) - 2)
    for i in range(1, len(traj.fields) - 1):
        val, scale = _lambda_with_scale(form, [traj.fields[i]] * form.n)
        direct[i - 1] = _real_part(val, scale, f"Lambda_{form.n}({form.tag})")
    fd = (energies[2:] - energies[:-2]) / (t[2:] - t[:-2])

    diff = np.abs(fd - direct)
    max_abs = float(np.max(diff)) if diff.size else 0.0
    ref = float(np.max(np.abs(direct)))
    window = float(t[2] - t[0])
    fd_floor = 64.0 * np.finfo(float).eps * float(np.max(np.abs(energies))) / window
    if ref > 0:
        max_rel = max_abs / ref
    elif max_abs <= fd_floor:
        max_rel = 0.0
    else:
        max_rel = np.inf
    return DriftReport(
        order=order,
        times=t[1:-1],
        fd=fd,
        direct=direct,
        max_abs_discrepancy=max_abs,
        max_rel_discrepancy=max_rel,
        reference_scale=ref,
    )
