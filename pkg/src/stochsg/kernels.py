"""Propagator kernels of the 2D Minkowski Klein-Gordon operator and the
noise covariance Q.

Conventions.  A point is z = (t, x) with Lorentzian square z^2 = -t^2 + x^2,
computed as (x - t) * (x + t) to avoid cancellation near the cone.  Null
coordinates are u = t - x, v = t + x; the closed future cone of the origin
is {u >= 0, v >= 0}.

The retarded kernel carries a global sign convention: "paper" gives
-1/2 * J0(m * sqrt(t^2 - x^2)) * theta(t - |x|), "green" the genuine Green
kernel +1/2 * J0 * theta inverting dt^2 - dx^2 + m^2.  Quantities quadratic
in the propagator (Q in particular) do not depend on the flag.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage
from scipy.special import j0 as _j0, k0 as _k0, y0 as _y0

from .errors import EvalOnLightcone, OutOfDomain
from .results import QuadResult

LIGHTCONE_FLOOR = 1e-12


class SpacetimePoint(NamedTuple):
    t: float
    x: float

    def __neg__(self) -> "SpacetimePoint":
        return SpacetimePoint(-self.t, -self.x)


def lorentzian_square(t, x):
    """z^2 = -t^2 + x^2 evaluated as (x - t)(x + t)."""
    return (np.asarray(x) - np.asarray(t)) * (np.asarray(x) + np.asarray(t))


def in_future_cone(t, x):
    """Membership of the closed future cone J^+(0)."""
    t = np.asarray(t)
    return t >= np.abs(np.asarray(x))


@dataclass(frozen=True)
class ModelParams:
    m: float = 0.0              # mass
    a: float = 1.0              # vertex charge
    hbar: float = 1.0
    lam: float = 1.0            # coupling
    mu: float = 1.0             # diamond half-size
    mu_ref: float | None = None  # log-kernel reference scale; defaults to mu
    t_switch: float = 0.0       # noise switch-on time T
    sign_convention: str = "paper"
    chi_width: float = 1.0      # ramp width of the switch-on cutoff

    def __post_init__(self):
        if self.mu_ref is None:
            object.__setattr__(self, "mu_ref", self.mu)
        if self.sign_convention not in ("paper", "green"):
            raise ValueError(f"unknown sign convention {self.sign_convention!r}")
        if self.mu <= 0 or self.chi_width <= 0:
            raise ValueError("mu and chi_width must be positive")
        if self.m < 0 or self.a < 0 or self.hbar < 0 or self.lam < 0:
            raise ValueError("m, a, hbar, lam must be nonnegative")

    @property
    def alpha(self) -> float:
        """Ultraviolet exponent a^2 hbar / (4 pi)."""
        return self.a ** 2 * self.hbar / (4.0 * np.pi)

    @property
    def retarded_sign(self) -> float:
        return -1.0 if self.sign_convention == "paper" else 1.0

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# switch-on cutoff
# ---------------------------------------------------------------------------

def _mollifier_step(s):
    """C-infinity monotone step: 0 for s<=0, 1 for s>=1."""
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        f = np.where(s > 0.0, np.exp(-1.0 / np.where(s > 0.0, s, 1.0)), 0.0)
        g = np.where(s < 1.0, np.exp(-1.0 / np.where(s < 1.0, 1.0 - s, 1.0)), 0.0)
    return f / (f + g)


def chi_cutoff(t, T: float, width: float = 1.0):
    """Smooth switch-on: 0 for t < T, 1 for t >= T + width."""
    return _mollifier_step((np.asarray(t, dtype=float) - T) / width)


# ---------------------------------------------------------------------------
# propagator kernels, all as functions of the difference z = (t, x)
# ---------------------------------------------------------------------------

def retarded_massless(t, x, sign: float = -1.0):
    """sign * 1/2 on the closed future cone, 0 elsewhere."""
    return np.where(in_future_cone(t, x), 0.5 * sign, 0.0)


def retarded_massive(t, x, m: float, sign: float = -1.0):
    """sign * 1/2 * J0(m sqrt(t^2 - x^2)) on the closed future cone."""
    if m < 0:
        raise ValueError("mass must be nonnegative")
    inside = in_future_cone(t, x)
    if m == 0.0:
        return np.where(inside, 0.5 * sign, 0.0)
    s2 = np.maximum(-lorentzian_square(t, x), 0.0)
    return np.where(inside, 0.5 * sign * _j0(m * np.sqrt(s2)), 0.0)


def advanced(t, x, m: float, sign: float = -1.0):
    """Reflection advanced(z) = retarded(-z); supported in the past cone."""
    return retarded_massive(-np.asarray(t), -np.asarray(x), m, sign)


def pauli_jordan(t, x, m: float, sign: float = -1.0):
    """Commutator kernel Delta = Delta^R - Delta^A."""
    return retarded_massive(t, x, m, sign) - advanced(t, x, m, sign)


def _check_off_cone(t, x, floor: float):
    if np.any(np.abs(lorentzian_square(t, x)) < floor):
        raise EvalOnLightcone("|z^2| below the lightcone floor %g" % floor)


def hadamard_massless(t, x, mu_ref: float, floor: float = LIGHTCONE_FLOOR,
                      check: bool = True):
    """H0(z) = -(1/4pi) log|z^2 / (4 mu_ref^2)|."""
    if check:
        _check_off_cone(t, x, floor)
    s2 = np.abs(lorentzian_square(t, x))
    return -np.log(np.maximum(s2, floor) / (4.0 * mu_ref ** 2)) / (4.0 * np.pi)


def hadamard_massive(t, x, m: float, floor: float = LIGHTCONE_FLOOR,
                     check: bool = True):
    """H(z) = (1/2pi) Re K0(m sqrt(z^2)).

    Spacelike separation gives K0 of a real argument; timelike separation
    uses Re K0(i m s) = -(pi/2) Y0(m s).
    """
    if m <= 0:
        raise ValueError("hadamard_massive needs m > 0; use hadamard_massless")
    if check:
        _check_off_cone(t, x, floor)
    s2 = lorentzian_square(t, x)
    mag = np.sqrt(np.maximum(np.abs(s2), floor))
    space = _k0(m * mag) / (2.0 * np.pi)
    time = -_y0(m * mag) / 4.0
    return np.where(s2 > 0.0, space, time)


def hadamard(t, x, p: ModelParams, floor: float = LIGHTCONE_FLOOR,
             check: bool = True):
    """Mass-aware Hadamard kernel: massive for m>0, else the log kernel."""
    if p.m > 0:
        return hadamard_massive(t, x, p.m, floor, check)
    return hadamard_massless(t, x, p.mu_ref, floor, check)


def wightman(t, x, p: ModelParams, floor: float = LIGHTCONE_FLOOR,
             check: bool = True):
    """omega = H + (i/2) Delta."""
    h = hadamard(t, x, p, floor, check)
    return h + 0.5j * pauli_jordan(t, x, p.m, p.retarded_sign)


def feynman(t, x, p: ModelParams, floor: float = LIGHTCONE_FLOOR,
            check: bool = True):
    """Delta_F = omega + i Delta^A."""
    return wightman(t, x, p, floor, check) + 1j * advanced(t, x, p.m, p.retarded_sign)


def antifeynman(t, x, p: ModelParams, floor: float = LIGHTCONE_FLOOR,
                check: bool = True):
    """Delta_AF = omega - i Delta^R."""
    return wightman(t, x, p, floor, check) - 1j * retarded_massive(t, x, p.m, p.retarded_sign)


# ---------------------------------------------------------------------------
# smearing functions: finite mixtures of scaled C-infinity bumps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpComponent:
    center: SpacetimePoint
    radius: float
    amplitude: float = 1.0


def _bump_profile(r2):
    """exp(1 - 1/(1 - r2)) for r2 < 1, zero outside; peak value 1."""
    r2 = np.asarray(r2, dtype=float)
    inside = r2 < 1.0
    safe = np.where(inside, r2, 0.0)
    with np.errstate(over="ignore"):
        val = np.exp(1.0 - 1.0 / (1.0 - safe))
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class SmearingFunction:
    """Compactly supported test function: a finite sum of Euclidean bumps."""

    components: tuple[BumpComponent, ...]
    name: str = "f"

    @staticmethod
    def bump(t0: float, x0: float, radius: float, amplitude: float = 1.0,
             name: str = "f") -> "SmearingFunction":
        return SmearingFunction(
            (BumpComponent(SpacetimePoint(t0, x0), radius, amplitude),), name)

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        total = np.zeros(np.broadcast(t, x).shape)
        for c in self.components:
            r2 = ((t - c.center.t) ** 2 + (x - c.center.x) ** 2) / c.radius ** 2
            total = total + c.amplitude * _bump_profile(r2)
        return total

    def support_box(self) -> tuple[float, float, float, float]:
        """(tmin, tmax, xmin, xmax) bounding the support."""
        tmin = min(c.center.t - c.radius for c in self.components)
        tmax = max(c.center.t + c.radius for c in self.components)
        xmin = min(c.center.x - c.radius for c in self.components)
        xmax = max(c.center.x + c.radius for c in self.components)
        return tmin, tmax, xmin, xmax

    def max_time(self) -> float:
        return self.support_box()[1]

    def inside_diamond(self, mu: float) -> bool:
        # a disk of radius r reaches r*sqrt(2) in the null coordinates
        root2 = np.sqrt(2.0)
        for c in self.components:
            u, v = c.center.t - c.center.x, c.center.t + c.center.x
            if abs(u) + c.radius * root2 >= mu:
                return False
            if abs(v) + c.radius * root2 >= mu:
                return False
        return True

    def is_nonnegative(self) -> bool:
        return all(c.amplitude >= 0 for c in self.components)

    def weighted_nodes(self, n: int = 24) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes (k, 2) and weights including the f values.

        Sum_j w_j K(z - y_j) approximates the smeared kernel (K f)(z).
        """
        gl_x, gl_w = np.polynomial.legendre.leggauss(n)
        pts, wts = [], []
        for c in self.components:
            tt = c.center.t + c.radius * gl_x
            xx = c.center.x + c.radius * gl_x
            T, X = np.meshgrid(tt, xx, indexing="ij")
            W = np.outer(gl_w, gl_w) * c.radius ** 2
            r2 = ((T - c.center.t) ** 2 + (X - c.center.x) ** 2) / c.radius ** 2
            vals = c.amplitude * _bump_profile(r2)
            keep = vals != 0.0
            pts.append(np.stack([T[keep], X[keep]], axis=-1))
            wts.append((W * vals)[keep])
        return np.concatenate(pts, axis=0), np.concatenate(wts, axis=0)

    def integral(self, n: int = 48) -> float:
        _, w = self.weighted_nodes(n)
        return float(np.sum(w))

    def norm_lq(self, q: float, n: int = 48) -> float:
        """L^q norm over the plane (the support is compact)."""
        gl_x, gl_w = np.polynomial.legendre.leggauss(n)
        total = 0.0
        for c in self.components:
            tt = c.center.t + c.radius * gl_x
            xx = c.center.x + c.radius * gl_x
            T, X = np.meshgrid(tt, xx, indexing="ij")
            W = np.outer(gl_w, gl_w) * c.radius ** 2
            total += float(np.sum(W * np.abs(self(T, X)) ** q))
        return total ** (1.0 / q)


# ---------------------------------------------------------------------------
# noise covariance Q
# ---------------------------------------------------------------------------

def covariance_q0_sharp(z: SpacetimePoint, zp: SpacetimePoint, T: float) -> float:
    """Closed-form massless Q with a sharp theta(t - T) cutoff.

    The intersection of two past cones is the past cone of the null-coordinate
    meet; truncated at t >= T it is a triangle of Euclidean area (t* - T)^2,
    and the two factors of +-1/2 contribute 1/4.
    """
    ustar = min(z.t - z.x, zp.t - zp.x)
    vstar = min(z.t + z.x, zp.t + zp.x)
    tstar = 0.5 * (ustar + vstar)
    if tstar <= T:
        return 0.0
    return 0.25 * (tstar - T) ** 2


def _gl_nodes(lo, hi, n):
    """Affine Gauss-Legendre nodes/weights on [lo, hi]; lo/hi may be arrays."""
    gx, gw = np.polynomial.legendre.leggauss(n)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * gx, half * gw


def _q_segment(t, x, tp, xp, p: ModelParams, lo, hi, n_outer: int, n_inner: int):
    """Integral of chi^2 * Delta^R Delta^R over t-hat in [lo, hi], vectorized."""
    th, wout = _gl_nodes(lo, hi, n_outer)              # (..., n_outer)
    chi2 = chi_cutoff(th, p.t_switch, p.chi_width) ** 2
    dt1 = t[..., None] - th
    dt2 = tp[..., None] - th
    xlo = np.maximum(x[..., None] - dt1, xp[..., None] - dt2)
    xhi = np.minimum(x[..., None] + dt1, xp[..., None] + dt2)
    length = np.maximum(xhi - xlo, 0.0)
    if p.m == 0.0:
        inner = 0.25 * length
    else:
        xh, winn = _gl_nodes(xlo, xhi, n_inner)        # (..., n_outer, n_inner)
        s1 = np.maximum(dt1[..., None] ** 2 - (x[..., None, None] - xh) ** 2, 0.0)
        s2 = np.maximum(dt2[..., None] ** 2 - (xp[..., None, None] - xh) ** 2, 0.0)
        vals = 0.25 * _j0(p.m * np.sqrt(s1)) * _j0(p.m * np.sqrt(s2))
        inner = np.sum(winn * vals, axis=-1)
    return np.sum(wout * chi2 * inner, axis=-1)


def _q_values(t, x, tp, xp, p: ModelParams, n_outer: int, n_inner: int):
    """Q(z, z') for arrays of point pairs, by nested Gauss-Legendre."""
    t, x, tp, xp = np.broadcast_arrays(*map(np.asarray, (t, x, tp, xp)))
    t = t.astype(float); x = x.astype(float)
    tp = tp.astype(float); xp = xp.astype(float)
    ustar = np.minimum(t - x, tp - xp)
    vstar = np.minimum(t + x, tp + xp)
    tstar = 0.5 * (ustar + vstar)
    T = p.t_switch
    out = np.zeros(t.shape)
    active = tstar > T
    if not np.any(active):
        return out
    ts = np.where(active, tstar, T)
    # split the outer integral at the end of the chi ramp
    ramp_end = np.minimum(ts, T + p.chi_width)
    val = _q_segment(t, x, tp, xp, p, np.full_like(ts, T), ramp_end,
                     n_outer, n_inner)
    tail = ts > T + p.chi_width
    if np.any(tail):
        val = val + np.where(
            tail,
            _q_segment(t, x, tp, xp, p, np.full_like(ts, T + p.chi_width),
                       ts, n_outer, n_inner),
            0.0)
    return np.where(active, val, 0.0)


def covariance_q(z: SpacetimePoint, zp: SpacetimePoint, p: ModelParams,
                 budget: int = 256) -> QuadResult:
    """Q(z, z') = int chi^2 Delta^R(z - .) Delta^R(z' - .), with an error
    estimate from comparing two quadrature resolutions.

    The result does not depend on the sign convention (the integrand is
    quadratic in Delta^R).  An empty integration region gives exactly 0.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    ustar = min(z.t - z.x, zp.t - zp.x)
    vstar = min(z.t + z.x, zp.t + zp.x)
    if 0.5 * (ustar + vstar) <= p.t_switch:
        return QuadResult(0.0, 0.0, 0)
    n = max(6, int(round(budget ** 0.5)))
    nc = max(3, n // 2)
    t = np.asarray([z.t]); x = np.asarray([z.x])
    tp = np.asarray([zp.t]); xp = np.asarray([zp.x])
    fine = float(_q_values(t, x, tp, xp, p, n, n)[0])
    coarse = float(_q_values(t, x, tp, xp, p, nc, nc)[0])
    err = abs(fine - coarse) + 1e-15 * abs(fine)
    return QuadResult(fine, err, 2 * n * n)


# ---------------------------------------------------------------------------
# tabulated Q with interpolation
# ---------------------------------------------------------------------------

_QTBL_MAGIC = b"QTBL"
_QTBL_VERSION = 1
_SIGN_CODE = {"paper": 0.0, "green": 1.0}


@dataclass
class QTable:
    """Q tabulated on (t, t', x - x') over D_mu x D_mu.

    Spatial translation invariance reduces Q(z, z') to three variables.
    Interpolation is a tensor B-spline (tricubic by default, trilinear as a
    fallback) on the uniform grid, evaluated through prefiltered spline
    coefficients.
    """

    time_grid: np.ndarray
    space_offset_grid: np.ndarray
    values: np.ndarray          # (nT, nT, nX)
    params: ModelParams
    interp_method: str = "cubic"
    _coeffs: np.ndarray | None = field(default=None, repr=False)

    @property
    def _order(self) -> int:
        return 1 if self.interp_method == "linear" else 3

    def _spline_coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            if self._order == 1:
                self._coeffs = self.values
            else:
                self._coeffs = ndimage.spline_filter(
                    self.values, order=3, mode="mirror")
        return self._coeffs

    def interp(self, t, x, tp, xp):
        """Q(z, z') with z = (t, x), z' = (tp, xp); raises OutOfDomain."""
        t, x, tp, xp = np.broadcast_arrays(*map(np.asarray, (t, x, tp, xp)))
        tg, dg = self.time_grid, self.space_offset_grid
        st = tg[1] - tg[0]
        sd = dg[1] - dg[0]
        it = (np.asarray(t, dtype=float) - tg[0]) / st
        jt = (np.asarray(tp, dtype=float) - tg[0]) / st
        kd = (np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
              - dg[0]) / sd
        eps = 1e-9
        if (np.any(it < -eps) or np.any(it > len(tg) - 1 + eps)
                or np.any(jt < -eps) or np.any(jt > len(tg) - 1 + eps)
                or np.any(kd < -eps) or np.any(kd > len(dg) - 1 + eps)):
            raise OutOfDomain("Q table query outside the tabulated box")
        coords = np.stack([np.clip(it, 0, len(tg) - 1),
                           np.clip(jt, 0, len(tg) - 1),
                           np.clip(kd, 0, len(dg) - 1)])
        shape = coords.shape[1:]
        out = ndimage.map_coordinates(self._spline_coeffs(),
                                      coords.reshape(3, -1),
                                      order=self._order, mode="mirror",
                                      prefilter=False)
        return out.reshape(shape)

    def diag(self, t, x):
        return self.interp(t, x, t, x)

    def save(self, path: str) -> None:
        p = self.params
        header = struct.pack(
            "<4sIIII", _QTBL_MAGIC, _QTBL_VERSION,
            len(self.time_grid), len(self.space_offset_grid),
            0 if self.interp_method == "linear" else 1)
        meta = struct.pack("<9d", p.m, p.a, p.hbar, p.lam, p.mu, p.mu_ref,
                           p.t_switch, _SIGN_CODE[p.sign_convention], p.chi_width)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(meta)
            fh.write(np.ascontiguousarray(self.time_grid, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.space_offset_grid, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @staticmethod
    def load(path: str) -> "QTable":
        with open(path, "rb") as fh:
            magic, version, n_t, n_x, interp_code = struct.unpack(
                "<4sIIII", fh.read(20))
            if magic != _QTBL_MAGIC:
                raise ValueError("not a QTBL file")
            if version != _QTBL_VERSION:
                raise ValueError(f"unsupported QTBL version {version}")
            m, a, hbar, lam, mu, mu_ref, t_switch, sign, chi_width = \
                struct.unpack("<9d", fh.read(72))
            tgrid = np.frombuffer(fh.read(8 * n_t), dtype="<f8").copy()
            dgrid = np.frombuffer(fh.read(8 * n_x), dtype="<f8").copy()
            vals = np.frombuffer(fh.read(8 * n_t * n_t * n_x), dtype="<f8")
            vals = vals.reshape(n_t, n_t, n_x).copy()
        params = ModelParams(
            m=m, a=a, hbar=hbar, lam=lam, mu=mu, mu_ref=mu_ref,
            t_switch=t_switch,
            sign_convention="paper" if sign == 0.0 else "green",
            chi_width=chi_width)
        return QTable(tgrid, dgrid, vals, params,
                      "linear" if interp_code == 0 else "cubic")


def build_q_table(p: ModelParams, n_t: int = 64, n_x: int = 128,
                  budget: int = 256, interp_method: str = "cubic",
                  chunk: int = 8192) -> QTable:
    """Tabulate Q(t, t', x - x') over D_mu x D_mu.

    Chunks of entries are independent, so they run on a thread pool sized by
    the WORKERS environment variable; the output is deterministic either way.
    """
    if n_t < 4 or n_x < 4:
        raise ValueError("n_t and n_x must be >= 4")
    tgrid = np.linspace(-p.mu, p.mu, n_t)
    dgrid = np.linspace(-2 * p.mu, 2 * p.mu, n_x)
    n = max(6, int(round(budget ** 0.5)))
    T, TP, D = np.meshgrid(tgrid, tgrid, dgrid, indexing="ij")
    t = T.ravel(); tp = TP.ravel(); d = D.ravel()
    vals = np.empty(t.shape)

    def fill(lo: int):
        sl = slice(lo, lo + chunk)
        vals[sl] = _q_values(t[sl], d[sl], tp[sl], np.zeros_like(d[sl]),
                             p, n, n)

    starts = list(range(0, t.size, chunk))
    workers = min(_worker_count(), len(starts))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for lo in starts:
            fill(lo)
    values = vals.reshape(n_t, n_t, n_x)
    return QTable(tgrid, dgrid, values, p, interp_method)


def _worker_count() -> int:
    import os
    env = os.environ.get("WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def q_interp(table: QTable, z: SpacetimePoint, zp: SpacetimePoint) -> float:
    return float(table.interp(z.t, z.x, zp.t, zp.x))


def gq_weight(z: SpacetimePoint, p: ModelParams, table: QTable,
              g: SmearingFunction) -> float:
    """Dressed cutoff g_Q(z) = g(z) exp(-(a^2/2) Q(z, z))."""
    qzz = float(table.diag(z.t, z.x))
    return float(g(z.t, z.x)) * float(np.exp(-0.5 * p.a ** 2 * qzz))


def gq_weight_arrays(t, x, p: ModelParams, table: QTable, g: SmearingFunction):
    return g(t, x) * np.exp(-0.5 * p.a ** 2 * table.diag(t, x))


# ---------------------------------------------------------------------------
# numeric kernel bindings for the quadrature layer
# ---------------------------------------------------------------------------

def difference_kernel(symbol: str, p: ModelParams,
                      convention: str | None = None,
                      floor: float = LIGHTCONE_FLOOR) -> Callable:
    """Vectorized evaluator K(dt, dx) for a translation-invariant kernel.

    ``convention`` overrides the params' retarded sign (the symbolic layer
    pins "paper" so that the classical expansion matches the SPDE hierarchy).
    """
    sign = p.retarded_sign if convention is None else (
        -1.0 if convention == "paper" else 1.0)
    pp = p if convention is None else p.with_(sign_convention=convention)
    if symbol == "H":
        return lambda dt, dx: hadamard(dt, dx, pp, floor, check=False)
    if symbol == "H0":
        return lambda dt, dx: hadamard_massless(dt, dx, pp.mu_ref, floor, check=False)
    if symbol == "DeltaR":
        return lambda dt, dx: retarded_massive(dt, dx, pp.m, sign)
    if symbol == "DeltaA":
        return lambda dt, dx: advanced(dt, dx, pp.m, sign)
    if symbol == "Delta":
        return lambda dt, dx: pauli_jordan(dt, dx, pp.m, sign)
    if symbol == "Omega":
        return lambda dt, dx: wightman(dt, dx, pp, floor, check=False)
    if symbol == "DeltaF":
        return lambda dt, dx: feynman(dt, dx, pp, floor, check=False)
    if symbol == "DeltaAF":
        return lambda dt, dx: antifeynman(dt, dx, pp, floor, check=False)
    raise KeyError(f"unknown kernel symbol {symbol!r}")
