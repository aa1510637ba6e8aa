"""Stationary process models: densities, scores, covariances, simulators.

Families
--------
white_noise   f = sigma2 / 2pi
ar1           f = (sigma2/2pi) |1 - theta e^{-i lam}|^{-2}
arma          f = (sigma2/2pi) |b(e^{-i lam})|^2 / |a(e^{-i lam})|^2
arfima0d0     f = (2 sin(|lam|/2))^{-2d}          (no 2pi factor; see below)
arfima_pdq    f = (sigma2/2pi) |1-e^{-i lam}|^{-2d} |b|^2 / |a|^2
fgn           f = c(H) |1-e^{-i lam}|^2 sum_k |lam + 2pi k|^{-(2H+1)}

The pure fractional family is normalized so its density is exactly
(2 sin(lam/2))^{-2d}; its simulator therefore scales unit-variance
innovations by sqrt(2pi).  The mixed arfima_pdq family instead follows the
rational convention with sigma2/2pi included.  fGn is normalized to unit
variance (integral of f equals r(0) = 1).

All spectral densities are even functions on [-pi, pi].  Scores are
gradients of log f with respect to the family's parameter vector, in the
order given by `param_names`.

Simulation is driven by an innovation distribution with unit variance
(`NoiseDriver`): gaussian, centered_exponential (Exp(1) - 1, kappa4 = 6),
or laplace (scale 1/sqrt(2), kappa4 = 3).  Randomness comes from
counter-based Philox streams; use `derive_seed(master, rep)` to key one
stream per Monte Carlo replication.
"""

from __future__ import annotations

import functools
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
from scipy.signal import fftconvolve, lfilter

from ._quad import cosine_coefficient, spectral_integral
from .errors import DomainError, SchemaError

# ---------------------------------------------------------------------------
# randomness

def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed by an integer seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_seed(master_seed: int, rep: int) -> int:
    """Stable 64-bit sub-seed for replication `rep` of a master seed."""
    ss = np.random.SeedSequence((int(master_seed), int(rep)))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# innovation drivers

@dataclass(frozen=True)
class NoiseDriver:
    """Unit-variance innovation distribution with known fourth cumulant."""

    name: str
    kappa4: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sampler(rng, n)


def gaussian() -> NoiseDriver:
    return NoiseDriver("gaussian", 0.0, lambda rng, n: rng.standard_normal(n))


def centered_exponential() -> NoiseDriver:
    return NoiseDriver(
        "centered_exponential", 6.0, lambda rng, n: rng.exponential(1.0, n) - 1.0
    )


def laplace() -> NoiseDriver:
    scale = 1.0 / math.sqrt(2.0)
    return NoiseDriver("laplace", 3.0, lambda rng, n: rng.laplace(0.0, scale, n))


_DRIVERS = {
    "gaussian": gaussian,
    "centered_exponential": centered_exponential,
    "laplace": laplace,
}


def get_driver(name: str) -> NoiseDriver:
    try:
        return _DRIVERS[name]()
    except KeyError:
        raise SchemaError(
            f"unknown driver {name!r}; expected one of {sorted(_DRIVERS)}"
        ) from None


# ---------------------------------------------------------------------------
# sample container

@dataclass
class TimeSeries:
    """Simulated sample path plus a provenance record."""

    values: np.ndarray
    provenance: dict

    @property
    def T(self) -> int:
        return int(self.values.shape[0])


# ---------------------------------------------------------------------------
# model base

class Model:
    """Common interface for all families.

    Subclasses set `family`, `param_names`, `memory_class`, `free_names`
    (parameters a fitter optimizes) and `scale_name` (the multiplicative
    variance parameter profiled out in closed form, or None).
    """

    family: str = ""
    param_names: tuple = ()
    memory_class: str = "short"
    free_names: tuple = ()
    scale_name: str | None = None

    def params(self) -> dict:
        return {name: getattr(self, name) for name in self.param_names}

    def density(self, lam) -> np.ndarray:
        raise NotImplementedError

    def score(self, lam) -> np.ndarray:
        """d log f / d theta, shape (p, len(lam))."""
        raise NotImplementedError

    def covariance(self, u):
        """r(u) = int e^{i u lam} f(lam) dlam (real, even in u)."""
        raise NotImplementedError

    def simulate(self, driver: NoiseDriver, T: int, seed: int) -> TimeSeries:
        raise NotImplementedError

    def with_params(self, **updates) -> "Model":
        merged = self.params()
        merged.update(updates)
        return type(self)(**merged)

    def free_vector(self) -> np.ndarray:
        return np.array([_flatten_one(getattr(self, n)) for n in self.free_names],
                        dtype=float)

    def with_free(self, vec: Sequence[float]) -> "Model":
        return self.with_params(**dict(zip(self.free_names, vec)))

    def describe(self) -> str:
        parts = []
        for name in self.param_names:
            val = getattr(self, name)
            if isinstance(val, tuple):
                parts.append(f"{name}=[{','.join(repr(float(v)) for v in val)}]")
            else:
                parts.append(f"{name}={float(val)!r}")
        return f"{self.family}{{{','.join(parts)}}}"

    def __repr__(self) -> str:
        return self.describe()

    def _base_provenance(self, driver, T, seed) -> dict:
        return {
            "model": self.describe(),
            "driver": driver.name,
            "T": int(T),
            "seed": int(seed),
        }


def _flatten_one(v):
    if isinstance(v, tuple):
        raise ValueError("vector parameter cannot be a scalar free slot")
    return float(v)


def _as_lam(lam) -> np.ndarray:
    return np.atleast_1d(np.asarray(lam, dtype=float))


def _maybe_scalar(out, lam):
    if np.ndim(lam) == 0:
        return float(out[0])
    return out


# ---------------------------------------------------------------------------
# white noise

class WhiteNoise(Model):
    family = "white_noise"
    param_names = ("sigma2",)
    free_names = ()
    scale_name = "sigma2"

    def __init__(self, sigma2: float = 1.0):
        if sigma2 <= 0:
            raise DomainError("white_noise requires sigma2 > 0")
        self.sigma2 = float(sigma2)

    def density(self, lam):
        lam_arr = _as_lam(lam)
        out = np.full(lam_arr.shape, self.sigma2 / (2.0 * math.pi))
        return _maybe_scalar(out, lam)

    def score(self, lam):
        lam_arr = _as_lam(lam)
        return np.full((1, lam_arr.size), 1.0 / self.sigma2)

    def covariance(self, u):
        u_arr = np.atleast_1d(np.asarray(u))
        out = np.where(u_arr == 0, self.sigma2, 0.0).astype(float)
        return _maybe_scalar(out, u)

    def simulate(self, driver, T, seed):
        rng = make_rng(seed)
        x = math.sqrt(self.sigma2) * driver.sample(rng, T)
        return TimeSeries(x, self._base_provenance(driver, T, seed))


# ---------------------------------------------------------------------------
# ARMA machinery shared by ar1 / arma / arfima_pdq

def _arma_polys(phi: tuple, theta: tuple):
    a = np.r_[1.0, -np.asarray(phi, dtype=float)]
    b = np.r_[1.0, np.asarray(theta, dtype=float)]
    return a, b


def _poly_on_circle(coeffs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    z = np.exp(-1j * lam)
    return np.polyval(coeffs[::-1], z)


def _spectral_radius(poly: np.ndarray) -> float:
    """Largest inverse-root modulus of 1 + c1 z + ... + cp z^p."""
    if poly.size <= 1:
        return 0.0
    roots = np.roots(poly[::-1])
    if roots.size == 0:
        return 0.0
    return float(np.max(1.0 / np.abs(roots)))


def _check_arma(phi, theta):
    a, b = _arma_polys(phi, theta)
    rho_ar = _spectral_radius(a)
    rho_ma = _spectral_radius(b)
    if rho_ar >= 1.0:
        raise DomainError("autoregressive polynomial has a root on or inside the unit circle")
    if rho_ma >= 1.0:
        raise DomainError("moving-average polynomial is not invertible")
    return a, b, rho_ar


def _burn_in(rho: float) -> int:
    if rho <= 0.0:
        return 500
    return max(500, int(math.ceil(50.0 / (1.0 - rho))))


def _arma_psi(a: np.ndarray, b: np.ndarray, rho: float, tol: float = 1e-16) -> np.ndarray:
    """MA(infinity) weights of b/a, truncated once the geometric tail is below tol."""
    if a.size == 1:
        return b.copy()
    if rho > 0:
        L = max(b.size, int(math.ceil(math.log(tol) / math.log(rho))) + a.size)
    else:
        L = b.size
    impulse = np.zeros(L)
    impulse[0] = 1.0
    return lfilter(b, a, impulse)


class AR1(Model):
    family = "ar1"
    param_names = ("theta", "sigma2")
    free_names = ("theta",)
    scale_name = "sigma2"

    def __init__(self, theta: float, sigma2: float = 1.0):
        if not -1.0 < theta < 1.0:
            raise DomainError("ar1 requires |theta| < 1")
        if sigma2 <= 0:
            raise DomainError("ar1 requires sigma2 > 0")
        self.theta = float(theta)
        self.sigma2 = float(sigma2)

    def density(self, lam):
        lam_arr = _as_lam(lam)
        denom = 1.0 - 2.0 * self.theta * np.cos(lam_arr) + self.theta**2
        return _maybe_scalar(self.sigma2 / (2.0 * math.pi * denom), lam)

    def score(self, lam):
        lam_arr = _as_lam(lam)
        c = np.cos(lam_arr)
        denom = 1.0 - 2.0 * self.theta * c + self.theta**2
        row_theta = 2.0 * (c - self.theta) / denom
        row_sigma = np.full(lam_arr.size, 1.0 / self.sigma2)
        return np.vstack([row_theta, row_sigma])

    def covariance(self, u):
        u_arr = np.abs(np.atleast_1d(np.asarray(u)).astype(float))
        out = self.sigma2 * self.theta**u_arr / (1.0 - self.theta**2)
        return _maybe_scalar(out, u)

    def simulate(self, driver, T, seed):
        rng = make_rng(seed)
        burn = _burn_in(abs(self.theta))
        e = math.sqrt(self.sigma2) * driver.sample(rng, T + burn)
        x = lfilter([1.0], [1.0, -self.theta], e)[burn:]
        prov = self._base_provenance(driver, T, seed)
        prov["burn_in"] = burn
        return TimeSeries(x, prov)


class ARMA(Model):
    family = "arma"
    param_names = ("phi", "theta", "sigma2")
    scale_name = "sigma2"

    def __init__(self, phi=(), theta=(), sigma2: float = 1.0):
        phi = tuple(float(v) for v in np.atleast_1d(np.asarray(phi, dtype=float))) if np.size(phi) else ()
        theta = tuple(float(v) for v in np.atleast_1d(np.asarray(theta, dtype=float))) if np.size(theta) else ()
        if sigma2 <= 0:
            raise DomainError("arma requires sigma2 > 0")
        self._a, self._b, self._rho = _check_arma(phi, theta)
        self.phi = phi
        self.theta = theta
        self.sigma2 = float(sigma2)
        self.free_names = tuple(f"phi{i+1}" for i in range(len(phi))) + tuple(
            f"theta{i+1}" for i in range(len(theta))
        )

    def with_params(self, **updates):
        merged = {"phi": self.phi, "theta": self.theta, "sigma2": self.sigma2}
        phi = list(merged["phi"])
        th = list(merged["theta"])
        for key, val in updates.items():
            if key in merged:
                merged[key] = val
            elif key.startswith("phi"):
                phi[int(key[3:]) - 1] = float(val)
            elif key.startswith("theta"):
                th[int(key[5:]) - 1] = float(val)
            else:
                raise ValueError(f"unknown arma parameter {key!r}")
        merged["phi"] = tuple(phi)
        merged["theta"] = tuple(th)
        return ARMA(**merged)

    def free_vector(self):
        return np.array(self.phi + self.theta, dtype=float)

    def with_free(self, vec):
        vec = np.asarray(vec, dtype=float)
        p = len(self.phi)
        return ARMA(phi=tuple(vec[:p]), theta=tuple(vec[p:]), sigma2=self.sigma2)

    def density(self, lam):
        lam_arr = _as_lam(lam)
        num = np.abs(_poly_on_circle(self._b, lam_arr)) ** 2
        den = np.abs(_poly_on_circle(self._a, lam_arr)) ** 2
        return _maybe_scalar(self.sigma2 * num / (2.0 * math.pi * den), lam)

    def score(self, lam):
        lam_arr = _as_lam(lam)
        z = np.exp(-1j * lam_arr)
        a_val = _poly_on_circle(self._a, lam_arr)
        b_val = _poly_on_circle(self._b, lam_arr)
        rows = []
        zp = np.ones_like(z)
        for j in range(1, len(self.phi) + 1):
            zp = zp * z
            rows.append(2.0 * np.real(zp * np.conj(a_val)) / np.abs(a_val) ** 2)
        zp = np.ones_like(z)
        for j in range(1, len(self.theta) + 1):
            zp = zp * z
            rows.append(2.0 * np.real(zp * np.conj(b_val)) / np.abs(b_val) ** 2)
        rows.append(np.full(lam_arr.size, 1.0 / self.sigma2))
        return np.vstack(rows)

    def covariance(self, u):
        psi = _arma_psi(self._a, self._b, self._rho)
        acov = np.correlate(psi, psi, mode="full")[psi.size - 1:]
        u_arr = np.abs(np.atleast_1d(np.asarray(u)).astype(int))
        out = np.where(u_arr < acov.size, self.sigma2 * acov[np.minimum(u_arr, acov.size - 1)], 0.0)
        return _maybe_scalar(out, u)

    def simulate(self, driver, T, seed):
        rng = make_rng(seed)
        burn = _burn_in(self._rho)
        e = math.sqrt(self.sigma2) * driver.sample(rng, T + burn)
        x = lfilter(self._b, self._a, e)[burn:]
        prov = self._base_provenance(driver, T, seed)
        prov["burn_in"] = burn
        return TimeSeries(x, prov)


# ---------------------------------------------------------------------------
# fractional integration

_PSI_CAP = 1 << 20


@functools.lru_cache(maxsize=8)
def _frac_psi(d: float, tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """MA weights of (1-B)^{-d} with relative tail energy below tol.

    psi_k = psi_{k-1} (k-1+d)/k.  The tail energy past K behaves like
    psi_K^2 K / (1 - 2d); K grows like tol^{1/(1-2d)} and is capped at
    2^20 coefficients, with the achieved tail fraction reported so callers
    can record it.  Cached per d (the array can reach 8 MB and simulation
    sweeps reuse one d thousands of times); the result is write-protected.
    """
    chunks = [np.ones(1)]
    total = 1.0
    k0 = 1
    last = 1.0
    tail_frac = 1.0
    while k0 <= _PSI_CAP:
        size = min(1 << 14, _PSI_CAP - k0 + 1)
        k = np.arange(k0, k0 + size, dtype=float)
        ratios = (k - 1.0 + d) / k
        block = last * np.cumprod(ratios)
        chunks.append(block)
        last = block[-1]
        total += float(np.sum(block**2))
        k_end = k0 + size - 1
        tail = last**2 * k_end / max(1.0 - 2.0 * d, 1e-12)
        tail_frac = tail / total
        if tail_frac < tol:
            break
        k0 += size
    psi = np.concatenate(chunks)
    psi.setflags(write=False)
    return psi, float(tail_frac)


def _frac_r0(d: float) -> float:
    return 2.0 * math.pi * math.gamma(1.0 - 2.0 * d) / math.gamma(1.0 - d) ** 2


class ARFIMA0d0(Model):
    family = "arfima0d0"
    param_names = ("d",)
    free_names = ("d",)
    scale_name = None

    def __init__(self, d: float):
        if not -0.5 < d < 0.5:
            raise DomainError("arfima0d0 requires -1/2 < d < 1/2")
        self.d = float(d)
        self.memory_class = "long" if d > 0 else ("intermediate" if d < 0 else "short")

    def density(self, lam):
        lam_arr = _as_lam(lam)
        s = 2.0 * np.sin(np.abs(lam_arr) / 2.0)
        with np.errstate(divide="ignore"):
            out = s ** (-2.0 * self.d)
        return _maybe_scalar(out, lam)

    def score(self, lam):
        lam_arr = _as_lam(lam)
        s = 2.0 * np.sin(np.abs(lam_arr) / 2.0)
        with np.errstate(divide="ignore"):
            return -2.0 * np.log(s)[None, :]

    def covariance(self, u):
        u_arr = np.abs(np.atleast_1d(np.asarray(u)).astype(int))
        top = int(u_arr.max()) if u_arr.size else 0
        r = np.empty(top + 1)
        r[0] = _frac_r0(self.d)
        for k in range(1, top + 1):
            r[k] = r[k - 1] * (k - 1.0 + self.d) / (k - self.d)
        return _maybe_scalar(r[u_arr], u)

    def simulate(self, driver, T, seed):
        rng = make_rng(seed)
        psi, tail_frac = _frac_psi(self.d)
        K = psi.size - 1
        xi = driver.sample(rng, T + K)
        x = math.sqrt(2.0 * math.pi) * fftconvolve(xi, psi)[K:K + T]
        prov = self._base_provenance(driver, T, seed)
        prov["ma_truncation"] = K
        prov["ma_tail_fraction"] = tail_frac
        return TimeSeries(x, prov)


class ArfimaPDQ(Model):
    family = "arfima_pdq"
    param_names = ("d", "phi", "theta", "sigma2")
    scale_name = "sigma2"

    def __init__(self, d: float, phi=(), theta=(), sigma2: float = 1.0):
        if not -0.5 < d < 0.5:
            raise DomainError("arfima_pdq requires -1/2 < d < 1/2")
        if sigma2 <= 0:
            raise DomainError("arfima_pdq requires sigma2 > 0")
        phi = tuple(float(v) for v in np.atleast_1d(np.asarray(phi, dtype=float))) if np.size(phi) else ()
        theta = tuple(float(v) for v in np.atleast_1d(np.asarray(theta, dtype=float))) if np.size(theta) else ()
        self._a, self._b, self._rho = _check_arma(phi, theta)
        self.d = float(d)
        self.phi = phi
        self.theta = theta
        self.sigma2 = float(sigma2)
        self.memory_class = "long" if d > 0 else ("intermediate" if d < 0 else "short")
        self.free_names = ("d",) + tuple(f"phi{i+1}" for i in range(len(phi))) + tuple(
            f"theta{i+1}" for i in range(len(theta))
        )
        self._cov_cache: dict[int, float] = {}

    def with_params(self, **updates):
        merged = {"d": self.d, "phi": self.phi, "theta": self.theta, "sigma2": self.sigma2}
        phi = list(merged["phi"])
        th = list(merged["theta"])
        for key, val in updates.items():
            if key in merged:
                merged[key] = val
            elif key.startswith("phi"):
                phi[int(key[3:]) - 1] = float(val)
            elif key.startswith("theta"):
                th[int(key[5:]) - 1] = float(val)
            else:
                raise ValueError(f"unknown arfima_pdq parameter {key!r}")
        merged["phi"] = tuple(phi)
        merged["theta"] = tuple(th)
        return ArfimaPDQ(**merged)

    def free_vector(self):
        return np.array((self.d,) + self.phi + self.theta, dtype=float)

    def with_free(self, vec):
        vec = np.asarray(vec, dtype=float)
        p = len(self.phi)
        return ArfimaPDQ(d=float(vec[0]), phi=tuple(vec[1:1 + p]),
                         theta=tuple(vec[1 + p:]), sigma2=self.sigma2)

    def density(self, lam):
        lam_arr = _as_lam(lam)
        s = 2.0 * np.sin(np.abs(lam_arr) / 2.0)
        num = np.abs(_poly_on_circle(self._b, lam_arr)) ** 2
        den = np.abs(_poly_on_circle(self._a, lam_arr)) ** 2
        with np.errstate(divide="ignore"):
            frac = s ** (-2.0 * self.d)
        return _maybe_scalar(self.sigma2 * frac * num / (2.0 * math.pi * den), lam)

    def score(self, lam):
        lam_arr = _as_lam(lam)
        s = 2.0 * np.sin(np.abs(lam_arr) / 2.0)
        with np.errstate(divide="ignore"):
            d_row = -2.0 * np.log(s)
        arma = ARMA(phi=self.phi, theta=self.theta, sigma2=self.sigma2)
        arma_rows = arma.score(lam_arr)
        return np.vstack([d_row, arma_rows])

    def covariance(self, u):
        u_arr = np.abs(np.atleast_1d(np.asarray(u)).astype(int))
        long_mem = self.memory_class != "short"
        cache = self._cov_cache
        out = np.empty(u_arr.size)
        for i, k in enumerate(u_arr):
            k = int(k)
            if k not in cache:
                cache[k] = cosine_coefficient(self.density, k, long_memory=long_mem)
            out[i] = cache[k]
        return _maybe_scalar(out, u)

    def simulate(self, driver, T, seed):
        rng = make_rng(seed)
        psi, tail_frac = _frac_psi(self.d)
        K = psi.size - 1
        burn = _burn_in(self._rho)
        xi = driver.sample(rng, T + burn + K)
        frac = fftconvolve(xi, psi)[K:K + T + burn]
        x = lfilter(self._b, self._a, math.sqrt(self.sigma2) * frac)[burn:]
        prov = self._base_provenance(driver, T, seed)
        prov["burn_in"] = burn
        prov["ma_truncation"] = K
        prov["ma_tail_fraction"] = tail_frac
        return TimeSeries(x, prov)


# ---------------------------------------------------------------------------
# fractional Gaussian noise

_FGN_K = 100


class FGN(Model):
    family = "fgn"
    param_names = ("H",)
    free_names = ("H",)
    scale_name = None

    _norm_cache: dict[float, float] = {}

    def __init__(self, H: float):
        if not 0.0 < H < 1.0:
            raise DomainError("fgn requires 0 < H < 1")
        self.H = float(H)
        self.memory_class = (
            "long" if H > 0.5 else ("intermediate" if H < 0.5 else "short")
        )

    def _bracket(self, lam_arr: np.ndarray) -> np.ndarray:
        """|1-e^{-i lam}|^2 sum_{|k|<=100} |lam+2pi k|^{-(2H+1)} + tail."""
        expo = 2.0 * self.H + 1.0
        out = np.empty(lam_arr.size)
        k = np.arange(-_FGN_K, _FGN_K + 1, dtype=float)
        step = max(1, (4 << 20) // (8 * k.size))
        for i in range(0, lam_arr.size, step):
            block = lam_arr[i:i + step, None]
            core = np.sum(np.abs(block + 2.0 * math.pi * k[None, :]) ** (-expo), axis=1)
            edge = 2.0 * math.pi * (_FGN_K + 0.5)
            tail = ((edge + block[:, 0]) ** (-expo + 1.0)
                    + (edge - block[:, 0]) ** (-expo + 1.0)) / (2.0 * math.pi * (expo - 1.0))
            out[i:i + step] = core + tail
        return (2.0 - 2.0 * np.cos(lam_arr)) * out

    def _norm(self) -> float:
        c = FGN._norm_cache.get(self.H)
        if c is None:
            # For some H the extrapolation against the origin pole bottoms
            # out at roundoff and scipy warns while still returning ~1e-9
            # accuracy; the value is pinned by closed-form r(u) checks, so
            # the warning carries no information here.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
                total = spectral_integral(
                    lambda lam: self._bracket(np.abs(lam)), long_memory=self.H != 0.5
                )
            c = 1.0 / total
            FGN._norm_cache[self.H] = c
        return c

    def density(self, lam):
        lam_arr = _as_lam(lam)
        out = self._norm() * self._bracket(np.abs(lam_arr))
        return _maybe_scalar(out, lam)

    def score(self, lam):
        lam_arr = _as_lam(lam)
        dh = 1e-5
        lo = FGN(self.H - dh)
        hi = FGN(self.H + dh)
        with np.errstate(divide="ignore"):
            row = (np.log(hi.density(lam_arr)) - np.log(lo.density(lam_arr))) / (2.0 * dh)
        return row[None, :]

    def covariance(self, u):
        u_arr = np.abs(np.atleast_1d(np.asarray(u)).astype(float))
        h2 = 2.0 * self.H
        out = 0.5 * ((u_arr + 1.0) ** h2 - 2.0 * u_arr**h2 + np.abs(u_arr - 1.0) ** h2)
        return _maybe_scalar(out, u)

    def simulate(self, driver, T, seed):
        if driver.name != "gaussian":
            raise DomainError("fgn simulation is defined for the gaussian driver only")
        rng = make_rng(seed)
        prov = self._base_provenance(driver, T, seed)
        if T == 1:
            return TimeSeries(rng.standard_normal(1), prov)
        r = np.asarray(self.covariance(np.arange(T)), dtype=float)
        circ = np.concatenate([r, r[-2:0:-1]])
        eig = np.fft.fft(circ).real
        neg = eig < 0.0
        prov["clipped_eigenvalues"] = int(np.sum(neg))
        prov["clipped_mass"] = float(-np.sum(eig[neg]))
        eig = np.clip(eig, 0.0, None)
        m = circ.size
        u_norm = rng.standard_normal(m)
        v_norm = rng.standard_normal(m)
        z = np.sqrt(eig / m) * (u_norm + 1j * v_norm)
        x = np.fft.fft(z).real[:T]
        return TimeSeries(x, prov)


# ---------------------------------------------------------------------------
# model grammar

_MODEL_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*(?:\{(.*)\}\s*)?$", re.S)


def _split_args(body: str) -> list[str]:
    parts = []
    depth = 0
    token = []
    for ch in body:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(token))
            token = []
        else:
            token.append(ch)
    if token or parts:
        parts.append("".join(token))
    return [p for p in (s.strip() for s in parts) if p]


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise SchemaError(f"unterminated list in model parameter: {text!r}")
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(float(v) for v in inner.split(","))
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"cannot parse model parameter value {text!r}") from None


_FAMILIES: dict[str, type] = {
    "white_noise": WhiteNoise,
    "ar1": AR1,
    "arma": ARMA,
    "arfima0d0": ARFIMA0d0,
    "arfima_pdq": ArfimaPDQ,
    "fgn": FGN,
}


def parse_model(text: str) -> Model:
    """Build a model from grammar like ``ar1{theta=0.5,sigma2=1}``.

    ``arfima{d=0.3}`` is accepted as an alias: it resolves to the pure
    fractional family when only ``d`` is given and to the mixed family
    when ARMA parameters appear.
    """
    match = _MODEL_RE.match(text)
    if not match:
        raise SchemaError(f"cannot parse model specification {text!r}")
    name, body = match.group(1), match.group(2) or ""
    kwargs = {}
    for item in _split_args(body):
        if "=" not in item:
            raise SchemaError(f"model parameter {item!r} is not key=value")
        key, _, val = item.partition("=")
        kwargs[key.strip()] = _parse_value(val)
    if name == "arfima":
        name = "arfima0d0" if set(kwargs) <= {"d"} else "arfima_pdq"
    cls = _FAMILIES.get(name)
    if cls is None:
        raise SchemaError(
            f"unknown model family {name!r}; expected one of {sorted(_FAMILIES) + ['arfima']}"
        )
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise SchemaError(f"bad parameters for {name}: {exc}") from None
