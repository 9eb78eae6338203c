"""Kernel functions on R^r and their certified constants.

Three families are available:

``box``
    Product of the indicator of [-1/2, 1/2] (height 1 in every dimension).
``epanechnikov``
    Product of the profile 0.75 (1 - u^2) on [-1, 1].
``gaussian``
    Isotropic standard normal density.

Points are numpy arrays whose trailing axis has length ``r``. For ``r = 1`` a
trailing axis may be omitted, so scalars and 1-D arrays of scalars are
accepted as collections of one-dimensional points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

FAMILIES = ("box", "epanechnikov", "gaussian")

_ALIASES = {
    "box": "box",
    "uniform": "box",
    "uniform-box": "box",
    "epanechnikov": "epanechnikov",
    "epanechnikov-product": "epanechnikov",
    "gaussian": "gaussian",
    "normal": "gaussian",
}

# half-width of the support of the 1-D profile
_HALF_WIDTH = {"box": 0.5, "epanechnikov": 1.0, "gaussian": math.inf}
# gaussian integrals are truncated here; the neglected mass is below 1e-32
GAUSSIAN_CUTOFF = 12.0


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: str
    dim: int = 1

    def __post_init__(self):
        family = _ALIASES.get(self.family)
        if family is None:
            raise ValueError(f"unknown kernel {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "family", family)
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"kernel dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def compact(self) -> bool:
        return self.family != "gaussian"

    @property
    def half_width(self) -> float:
        """Half-width of the per-coordinate support (inf for gaussian)."""
        return _HALF_WIDTH[self.family]

    @property
    def sup_bound(self) -> float:
        """K-bar, the supremum of K."""
        if self.family == "box":
            return 1.0
        if self.family == "epanechnikov":
            return 0.75**self.dim
        return (2.0 * math.pi) ** (-self.dim / 2.0)

    def __call__(self, u) -> np.ndarray:
        """Evaluate K on an array of points (trailing axis r)."""
        u = as_points(u, self.dim)
        if self.family == "gaussian":
            sq = np.sum(u * u, axis=-1)
            return np.exp(-0.5 * sq) * self.sup_bound
        if self.family == "box":
            inside = np.all(np.abs(u) <= 0.5, axis=-1)
            return inside.astype(np.float64)
        profile = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
        return np.prod(profile, axis=-1)

    def profile(self, u) -> np.ndarray:
        """1-D profile applied elementwise; used by quadrature routines."""
        u = np.asarray(u, dtype=np.float64)
        if self.family == "gaussian":
            return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        if self.family == "box":
            return (np.abs(u) <= 0.5).astype(np.float64)
        return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)

    def support_box(self) -> tuple[float, float]:
        """Per-coordinate integration range (gaussian truncated at the cutoff)."""
        h = self.half_width if self.compact else GAUSSIAN_CUTOFF
        return -h, h


def kernel(name: str, dim: int = 1) -> KernelSpec:
    return KernelSpec(name, dim)


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to an array of points with trailing axis ``dim``."""
    x = np.asarray(x, dtype=np.float64)
    if dim == 1:
        # a 1-D array is a list of scalar points, never a single point
        if x.ndim <= 1 or x.shape[-1] != 1:
            x = x[..., np.newaxis]
        return x
    if x.ndim == 0 or x.shape[-1] != dim:
        raise DimensionError(f"expected points with trailing dimension {dim}, got shape {x.shape}")
    return x


def evaluate(k: KernelSpec, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size != k.dim:
        raise DimensionError(f"point has {x.size} coordinates, kernel dimension is {k.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    return float(k(x.reshape(1, k.dim))[0])


def scaled_evaluate(k: KernelSpec, xbar, x, theta: float) -> float:
    """theta^-r K((xbar - x) / theta) for a single pair of points."""
    if not theta > 0:
        raise ValueError(f"window theta must be positive, got {theta}")
    xbar = np.asarray(xbar, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if xbar.size != k.dim or x.size != k.dim:
        raise DimensionError("point dimension does not match the kernel")
    return evaluate(k, (xbar - x) / theta) * theta ** (-k.dim)


def scaled_values(k: KernelSpec, xbar, x, theta) -> np.ndarray:
    """Vectorised theta^-r K((xbar - x) / theta) with numpy broadcasting.

    ``xbar`` and ``x`` are point arrays; ``theta`` broadcasts against the
    leading (non-point) axes of the result.
    """
    xbar = as_points(xbar, k.dim)
    x = as_points(x, k.dim)
    theta = np.asarray(theta, dtype=np.float64)
    u = (xbar - x) / theta[..., np.newaxis]
    return k(u) * theta ** (-k.dim)


def width_characteristic(k: KernelSpec, nu: float) -> float:
    """A(nu) = integral of ||y||^nu K(y) dy."""
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"Hoelder exponent must lie in (0, 1], got {nu}")
    return _width(k.family, k.dim, float(nu))


@lru_cache(maxsize=256)
def _width(family: str, dim: int, nu: float) -> float:
    if family == "gaussian":
        # E||Y||^nu for a chi variable with dim degrees of freedom
        return math.exp(
            0.5 * nu * math.log(2.0)
            + special.gammaln((dim + nu) / 2.0)
            - special.gammaln(dim / 2.0)
        )
    if dim == 1:
        if family == "box":
            return 0.5**nu / (nu + 1.0)
        return 3.0 / ((nu + 1.0) * (nu + 3.0))
    # product kernels in r >= 2: integrate over the positive orthant
    k = KernelSpec(family, dim)
    h = k.half_width

    def integrand(*y):
        y = np.asarray(y)
        return float(np.linalg.norm(y) ** nu * np.prod(k.profile(y)))

    val, err = integrate.nquad(integrand, [(0.0, h)] * dim, opts={"epsabs": 1e-10, "epsrel": 1e-10})
    if err > 1e-8:
        raise ArithmeticError(f"width characteristic quadrature error {err:.2e} exceeds 1e-8")
    return 2**dim * val


def tail_condition_holds(k: KernelSpec, radii=(10.0, 1e2, 1e3)) -> bool:
    """Numerical check of ||x||^r K(x) -> 0 along a coordinate ray."""
    if k.compact:
        return True
    vals = []
    for rad in radii:
        point = np.zeros(k.dim)
        point[0] = rad
        vals.append(rad**k.dim * float(k(point[None, :])[0]))
    return all(b <= a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-12
