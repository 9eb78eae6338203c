"""Ground-truth generators for density and regression tracking experiments.

Density scenarios expose the exact density ``g^t(x)``, an exact sampler driven
by an explicit :class:`~drift_kde.rng.RngState`, and certified constants:

``gbar``   supremum of the density over all x and t,
``holder`` (H, nu) with |g(x) - g(y)| <= H ||x - y||^nu,
``drift``  per-step bound on sup_x |g^{t+1}(x) - g^t(x)|.

Every sample consumes a fixed number of Philox blocks, so drawing ``n``
samples at once gives exactly the same values as ``n`` single draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import as_points
from .rng import WORDS_PER_BLOCK, RngState, box_muller, uniforms

SAFETY = 1.05
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_E_HALF = math.exp(-0.5)


def _words_per_sample(n_uniforms: int) -> int:
    return WORDS_PER_BLOCK * -(-n_uniforms // WORDS_PER_BLOCK)


def _normal_block(u: np.ndarray, dim: int) -> np.ndarray:
    """Standard normals of shape (n, dim) from the first 2*ceil(dim/2) uniform columns."""
    pairs = -(-dim // 2)
    cols = []
    for j in range(pairs):
        c, s = box_muller(u[:, 2 * j], u[:, 2 * j + 1])
        cols.extend([c, s])
    return np.stack(cols[:dim], axis=-1)


@dataclass(frozen=True)
class Shift:
    """Common location shift s(t) = velocity * t + amplitude * sin(omega t) * direction."""

    velocity: tuple = (0.0,)
    amplitude: float = 0.0
    omega: float = 0.0
    direction: tuple = (1.0,)

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        v = np.asarray(self.velocity, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        return t[..., None] * v + (self.amplitude * np.sin(self.omega * t))[..., None] * d

    @property
    def is_static(self) -> bool:
        return not any(self.velocity) and (self.amplitude == 0 or self.omega == 0)

    def step_bound(self, t=None) -> float:
        """Bound on ||s(t+1) - s(t)||; exact per step when t is given."""
        if t is not None:
            return float(np.linalg.norm(self.at(t + 1) - self.at(t)))
        d = float(np.linalg.norm(self.direction))
        return float(np.linalg.norm(self.velocity)) + abs(self.amplitude) * min(abs(self.omega), 2.0) * d


class DensityScenario:
    """Common interface; subclasses define ``pdf_static`` and sampling."""

    name = "density"
    dim = 1
    shift = Shift()

    # -- exact density -----------------------------------------------------
    def density(self, t, x) -> np.ndarray:
        """g^t(x), vectorised; ``t`` broadcasts against the point axes of ``x``."""
        x = as_points(x, self.dim)
        s = self.shift.at(np.asarray(t))
        return self.pdf_static(x - s)

    def density_at(self, t: int, x) -> float:
        return float(np.asarray(self.density(t, x)).reshape(-1)[0])

    def pdf_static(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- sampling ----------------------------------------------------------
    n_uniforms = 4

    @property
    def words_per_sample(self) -> int:
        return _words_per_sample(self.n_uniforms)

    def sample_block(self, t0: int, n: int, rng: RngState) -> tuple[np.ndarray, RngState]:
        """Draw x_t ~ g^t for t = t0 .. t0+n-1; returns shape (n, dim)."""
        return self.sample_times(np.arange(t0, t0 + n), rng)

    def sample_times(self, times, rng: RngState) -> tuple[np.ndarray, RngState]:
        """One draw from g^t for each entry of ``times``, in order."""
        times = np.asarray(times)
        n = times.size
        w = self.words_per_sample
        u, rng = uniforms(rng, n * w)
        u = u.reshape(n, w)
        base = self._sample_static(u)
        if not self.shift.is_static:
            base = base + self.shift.at(times)
        return base, rng

    def sample(self, t: int, rng: RngState) -> tuple[np.ndarray, RngState]:
        pts, rng = self.sample_block(t, 1, rng)
        return pts[0], rng

    def _sample_static(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- certificates ------------------------------------------------------
    gbar: float
    holder_constant: float
    holder_exponent: float = 1.0

    @property
    def drift_cap(self) -> float:
        """delta with sup_x |g^{t+1}(x) - g^t(x)| <= delta for every t."""
        return self.shift.step_bound() * self._lipschitz_for_drift()

    def _lipschitz_for_drift(self) -> float:
        if self.shift.is_static:
            return 0.0
        return self.holder_constant

    def effective_box(self) -> list[tuple[float, float]]:
        raise NotImplementedError

    def grid(self, t: int, n_per_axis: int) -> np.ndarray:
        lo_hi = self.effective_box()
        s = self.shift.at(np.asarray([t, t + 1]))
        axes = []
        for j, (lo, hi) in enumerate(lo_hi):
            lo_j = lo + min(s[0, j], s[1, j])
            hi_j = hi + max(s[0, j], s[1, j])
            axes.append(np.linspace(lo_j, hi_j, n_per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def certify_drift(self, t: int) -> float:
        """Validated bound on sup_x |g^{t+1}(x) - g^t(x)| at step t."""
        if self.shift.is_static:
            return 0.0
        n = 10_000 if self.dim == 1 else 200
        pts = self.grid(t, n)
        grid_max = float(np.max(np.abs(self.density(t + 1, pts) - self.density(t, pts))))
        analytic = self.shift.step_bound(t) * self._lipschitz_for_drift()
        if math.isfinite(analytic):
            if grid_max > analytic * (1 + 1e-9) + 1e-15:
                raise ArithmeticError(
                    f"analytic drift cap {analytic:.6g} below grid maximum {grid_max:.6g}"
                )
            return analytic
        return SAFETY * grid_max

    def certificates(self) -> dict:
        return {
            "gbar": self.gbar,
            "H": self.holder_constant,
            "nu": self.holder_exponent,
            "delta": self.drift_cap,
        }

    def describe(self) -> dict:
        raise NotImplementedError

    # hints for quadrature
    def support(self):
        """Per-axis (lo, hi) of the static support, or None when unbounded."""
        return None

    def kinks(self) -> tuple:
        """Static 1-D points where the density is not smooth."""
        return ()


class GaussianMixtureScenario(DensityScenario):
    """Isotropic gaussian mixture in R^r moved by a common shift."""

    name = "gaussian-mixture"

    def __init__(self, weights, means, stds, dim: int = 1, shift: Shift | None = None):
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to one")
        self.dim = int(dim)
        self.weights = w
        self.means = as_points(np.asarray(means, dtype=np.float64), self.dim).reshape(len(w), self.dim)
        self.stds = np.asarray(stds, dtype=np.float64).reshape(len(w))
        if np.any(self.stds <= 0):
            raise ValueError("component standard deviations must be positive")
        self.shift = shift if shift is not None else Shift(velocity=(0.0,) * self.dim, direction=(1.0,) + (0.0,) * (self.dim - 1))
        self._cum = np.cumsum(w)
        self._cum[-1] = 1.0
        peaks = (2 * math.pi * self.stds**2) ** (-self.dim / 2)
        self.gbar = float(np.sum(w * peaks))
        # sup ||grad phi_sigma|| = peak * e^{-1/2} / sigma
        self.holder_constant = float(np.sum(w * peaks * _E_HALF / self.stds))
        self.holder_exponent = 1.0
        self.n_uniforms = 2 + 2 * -(-self.dim // 2)

    def pdf_static(self, x):
        diff = x[..., None, :] - self.means
        sq = np.sum(diff * diff, axis=-1)
        dens = (2 * math.pi * self.stds**2) ** (-self.dim / 2) * np.exp(-0.5 * sq / self.stds**2)
        return dens @ self.weights

    def smoothed_density(self, t, x, theta) -> np.ndarray:
        """Mixture convolved with the gaussian kernel at width theta (closed form)."""
        x = as_points(x, self.dim)
        s = self.shift.at(np.asarray(t))
        theta = np.asarray(theta, dtype=np.float64)
        var = self.stds**2 + theta[..., None] ** 2
        diff = (x - s)[..., None, :] - self.means
        sq = np.sum(diff * diff, axis=-1)
        dens = (2 * math.pi * var) ** (-self.dim / 2) * np.exp(-0.5 * sq / var)
        return dens @ self.weights

    def _sample_static(self, u):
        comp = np.searchsorted(self._cum, u[:, 0], side="right")
        comp = np.minimum(comp, len(self.weights) - 1)
        z = _normal_block(u[:, 2:], self.dim)
        return self.means[comp] + self.stds[comp, None] * z

    def effective_box(self):
        lo = np.min(self.means - 8 * self.stds[:, None], axis=0)
        hi = np.max(self.means + 8 * self.stds[:, None], axis=0)
        return list(zip(lo.tolist(), hi.tolist()))

    def describe(self):
        return {
            "family": self.name,
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "shift_velocity": list(self.shift.velocity),
            "shift_amplitude": self.shift.amplitude,
            "shift_omega": self.shift.omega,
        }


class UniformScenario(DensityScenario):
    """Uniform density on [a, b] (r = 1, stationary, no finite Hoelder constant)."""

    name = "uniform"

    def __init__(self, a: float = 0.0, b: float = 1.0):
        if not b > a:
            raise ValueError("need b > a")
        self.a, self.b = float(a), float(b)
        self.dim = 1
        self.shift = Shift()
        self.gbar = 1.0 / (self.b - self.a)
        self.holder_constant = math.inf
        self.holder_exponent = 1.0
        self.n_uniforms = 1

    def pdf_static(self, x):
        x = x[..., 0]
        return np.where((x >= self.a) & (x <= self.b), self.gbar, 0.0)

    def _sample_static(self, u):
        return (self.a + (self.b - self.a) * u[:, 0])[:, None]

    def cdf(self, x):
        return np.clip((np.asarray(x) - self.a) / (self.b - self.a), 0.0, 1.0)

    def effective_box(self):
        return [(self.a, self.b)]

    def support(self):
        return [(self.a, self.b)]

    def kinks(self):
        return (self.a, self.b)

    def describe(self):
        return {"family": self.name, "a": self.a, "b": self.b}


class TriangularScenario(DensityScenario):
    """Triangular density on [a, b] with mode c (r = 1, stationary, Lipschitz)."""

    name = "triangular"

    def __init__(self, a: float = -1.0, c: float = 0.0, b: float = 1.0):
        if not a < c < b:
            raise ValueError("need a < c < b")
        self.a, self.c, self.b = float(a), float(c), float(b)
        self.dim = 1
        self.shift = Shift()
        self.gbar = 2.0 / (self.b - self.a)
        self.holder_constant = max(
            2.0 / ((self.b - self.a) * (self.c - self.a)),
            2.0 / ((self.b - self.a) * (self.b - self.c)),
        )
        self.holder_exponent = 1.0
        self.n_uniforms = 1

    def pdf_static(self, x):
        x = x[..., 0]
        a, b, c = self.a, self.b, self.c
        up = 2 * (x - a) / ((b - a) * (c - a))
        down = 2 * (b - x) / ((b - a) * (b - c))
        return np.where((x >= a) & (x <= b), np.where(x <= c, up, down), 0.0)

    def _sample_static(self, u):
        a, b, c = self.a, self.b, self.c
        v = u[:, 0]
        fc = (c - a) / (b - a)
        left = a + np.sqrt(v * (b - a) * (c - a))
        right = b - np.sqrt((1 - v) * (b - a) * (b - c))
        return np.where(v < fc, left, right)[:, None]

    def effective_box(self):
        return [(self.a, self.b)]

    def support(self):
        return [(self.a, self.b)]

    def kinks(self):
        return (self.a, self.c, self.b)

    def describe(self):
        return {"family": self.name, "a": self.a, "c": self.c, "b": self.b}


def drifting_normal(
    drift: float = 0.0,
    mode: str = "linear",
    amplitude: float = 1.0,
    mean: float = 0.0,
    std: float = 1.0,
) -> GaussianMixtureScenario:
    """N(mu_t, std^2) in one dimension.

    ``mode="linear"``: mu_t = mean + drift * t (``drift`` is the mean step).
    ``mode="oscillate"``: mu_t = mean + amplitude * sin(omega t), where omega is
    chosen so that the certified density drift cap equals ``drift``.
    """
    if mode == "linear":
        shift = Shift(velocity=(float(drift),), direction=(1.0,))
    elif mode == "oscillate":
        lip = 1.0 / (std * std * _SQRT_2PI) * _E_HALF
        omega = float(drift) / (amplitude * lip) if drift > 0 else 0.0
        if omega > 2.0:
            raise ValueError("drift too large for the requested oscillation amplitude")
        shift = Shift(velocity=(0.0,), amplitude=float(amplitude), omega=omega, direction=(1.0,))
    else:
        raise ValueError(f"unknown drift mode {mode!r}")
    return GaussianMixtureScenario([1.0], [[mean]], [std], dim=1, shift=shift)


def normal_mixture() -> GaussianMixtureScenario:
    return GaussianMixtureScenario([0.3, 0.7], [[-1.5], [1.0]], [0.5, 0.8], dim=1)


def normal_2d() -> GaussianMixtureScenario:
    return GaussianMixtureScenario([1.0], [[0.0, 0.0]], [1.0], dim=2)


# ---------------------------------------------------------------------------
# regression


def _tri_pdf(u):
    return np.maximum(0.0, 1.0 - np.abs(u))


def _tri_dpdf(u):
    return np.where(np.abs(u) < 1.0, -np.sign(u), 0.0)


@dataclass(frozen=True)
class RegressionCertificates:
    g1_lower: float
    g1_bar: float
    y_support_norm: float
    g3_bar: float
    B: float | None
    C: float | None
    nu: float
    delta: float


class RegressionScenario:
    """Joint density g^t(x, y) = g1(x) prod_k tri((y_k - a_tk f(x_1)) / s) / s.

    Inputs are N(mean, std^2 I_r); the regression is y^t(x) = a_t f(x_1) with
    ``f`` either ``sin(pi x)`` (family "sine") or ``x`` (family "linear");
    output noise is symmetric triangular on [-s, s], independent per
    component. Amplitudes oscillate as a_t = a (1 + eps sin(omega t)).
    """

    def __init__(
        self,
        family: str = "sine",
        amplitudes=(1.0,),
        noise: float = 0.5,
        input_mean: float = 0.0,
        input_std: float = 1.0,
        dim: int = 1,
        eps: float = 0.0,
        omega: float = 0.0,
    ):
        if family not in ("sine", "linear"):
            raise ValueError(f"unknown regression family {family!r}")
        if noise <= 0 or input_std <= 0:
            raise ValueError("noise half-width and input std must be positive")
        self.family = family
        self.amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=np.float64))
        self.m = len(self.amplitudes)
        self.noise = float(noise)
        self.input_mean = float(input_mean)
        self.input_std = float(input_std)
        self.dim = int(dim)
        self.eps = float(eps)
        self.omega = float(omega)
        self.n_uniforms = 2 * -(-self.dim // 2) + 2 * self.m

    @property
    def words_per_sample(self) -> int:
        return _words_per_sample(self.n_uniforms)

    @property
    def is_static(self) -> bool:
        return self.eps == 0 or self.omega == 0

    def _f(self, x1):
        return np.sin(np.pi * x1) if self.family == "sine" else x1

    def _df(self, x1):
        return np.pi * np.cos(np.pi * x1) if self.family == "sine" else np.ones_like(x1)

    def amplitude_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.amplitudes * (1.0 + self.eps * np.sin(self.omega * t))[..., None]

    def regression_truth(self, t, x) -> np.ndarray:
        """y^t(x), shape (..., m)."""
        x = as_points(x, self.dim)
        return self.amplitude_at(t) * self._f(x[..., 0])[..., None]

    def input_density(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        sq = np.sum((x - self.input_mean) ** 2, axis=-1)
        s2 = self.input_std**2
        return (2 * math.pi * s2) ** (-self.dim / 2) * np.exp(-0.5 * sq / s2)

    def conditional_variance(self) -> float:
        """Per-component variance of y given x."""
        return self.noise**2 / 6.0

    def joint_density(self, t, x, y) -> np.ndarray:
        x = as_points(x, self.dim)
        y = as_points(y, self.m)
        mean = self.regression_truth(t, x)
        noise_pdf = np.prod(_tri_pdf((y - mean) / self.noise) / self.noise, axis=-1)
        return self.input_density(x) * noise_pdf

    def sample_block(self, t0: int, n: int, rng: RngState):
        """Pairs for t = t0 .. t0+n-1 as arrays of shape (n, r) and (n, m)."""
        return self.sample_times(np.arange(t0, t0 + n), rng)

    def sample_times(self, times, rng: RngState):
        times = np.asarray(times)
        n = times.size
        w = self.words_per_sample
        u, rng = uniforms(rng, n * w)
        u = u.reshape(n, w)
        x = self.input_mean + self.input_std * _normal_block(u, self.dim)
        k0 = 2 * -(-self.dim // 2)
        noise = self.noise * (u[:, k0 : k0 + self.m] + u[:, k0 + self.m : k0 + 2 * self.m] - 1.0)
        y = self.regression_truth(times, x) + noise
        return x, y, rng

    def sample_pair(self, t: int, rng: RngState):
        x, y, rng = self.sample_block(t, 1, rng)
        return (x[0], y[0]), rng

    # -- certificates ------------------------------------------------------
    def drift_at(self, x) -> float:
        """Bound on ||y^{t+1}(x) - y^t(x)|| over all t."""
        if self.is_static:
            return 0.0
        x = as_points(x, self.dim)
        fx = float(np.abs(self._f(x[..., 0])).max())
        return float(np.linalg.norm(self.amplitudes)) * abs(self.eps) * min(abs(self.omega), 2.0) * fx

    def y_support_norm(self, x) -> float:
        x = as_points(x, self.dim)
        fx = float(np.abs(self._f(x[..., 0])).max())
        amp = float(np.linalg.norm(self.amplitudes)) * (1 + abs(self.eps))
        return amp * fx + self.noise * math.sqrt(self.m)

    def _x_grid(self, n=4001):
        return np.linspace(self.input_mean - 8 * self.input_std, self.input_mean + 8 * self.input_std, n)

    def g3_bar(self) -> float:
        """Covers both sup_x int ||y||^2 g(x,y) dy and the marginal second moment."""
        xs = self._x_grid()
        amp2 = float(np.sum(self.amplitudes**2)) * (1 + abs(self.eps)) ** 2
        pts = np.zeros((len(xs), self.dim))
        pts[:, 0] = xs
        pts[:, 1:] = self.input_mean
        g1 = self.input_density(pts)
        cond = amp2 * self._f(xs) ** 2 + self.m * self.conditional_variance()
        sup_cond = float(np.max(g1 * cond))
        # marginal: E||y||^2 over x ~ g1 along the first axis
        marg1 = g1 * (2 * math.pi * self.input_std**2) ** ((self.dim - 1) / 2)
        dx = xs[1] - xs[0]
        marginal = float(np.sum(marg1 * cond) * dx)
        return SAFETY * max(sup_cond, marginal)

    def lipschitz_moments(self, n_x: int = 2001, n_y: int = 1201) -> tuple[float, float]:
        """(B, C) = (int L(y) dy, int y^2 L(y) dy) with L(y) = sup_x |d g / d x|.

        Computed on dense grids for r = m = 1 and the static amplitudes at
        their extreme (1 + |eps|) scaling.
        """
        if self.dim != 1 or self.m != 1:
            raise NotImplementedError("Lipschitz moments are certified for r = m = 1 only")
        xs = self._x_grid(n_x)
        a_max = float(abs(self.amplitudes[0])) * (1 + abs(self.eps))
        y_hi = a_max * float(np.max(np.abs(self._f(xs)))) + self.noise
        ys = np.linspace(-y_hi, y_hi, n_y)
        L = np.zeros_like(ys)
        for a in {a_max, float(abs(self.amplitudes[0])) * (1 - abs(self.eps)), float(self.amplitudes[0])}:
            for sgn in (1.0, -1.0):
                mean = sgn * a * self._f(xs)
                dmean = sgn * a * self._df(xs)
                g1 = self.input_density(xs)
                dg1 = -g1 * (xs - self.input_mean) / self.input_std**2
                u = (ys[None, :] - mean[:, None]) / self.noise
                e = _tri_pdf(u) / self.noise
                de = _tri_dpdf(u) / self.noise**2
                deriv = np.abs(dg1[:, None] * e - g1[:, None] * de * dmean[:, None])
                L = np.maximum(L, deriv.max(axis=0))
        L *= SAFETY
        dy = ys[1] - ys[0]
        # grid spacing adds a one-cell margin to both integrals
        B = float(np.sum(L) * dy) + float(L.max()) * dy
        C = float(np.sum(ys**2 * L) * dy) + float(L.max()) * y_hi**2 * dy
        return B, C

    def certificates(self, x) -> RegressionCertificates:
        B = C = None
        if self.dim == 1 and self.m == 1:
            B, C = self.lipschitz_moments()
        return RegressionCertificates(
            g1_lower=float(self.input_density(x).reshape(-1)[0]),
            g1_bar=(2 * math.pi * self.input_std**2) ** (-self.dim / 2),
            y_support_norm=self.y_support_norm(x),
            g3_bar=self.g3_bar(),
            B=B,
            C=C,
            nu=1.0,
            delta=self.drift_at(x),
        )

    def describe(self) -> dict:
        return {
            "family": f"regression-{self.family}",
            "dim": self.dim,
            "amplitudes": self.amplitudes.tolist(),
            "noise": self.noise,
            "input_mean": self.input_mean,
            "input_std": self.input_std,
            "eps": self.eps,
            "omega": self.omega,
        }


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def validate_density_certificates(s: DensityScenario, rng: RngState, n_probes: int = 100) -> ValidationReport:
    """Probe drift and Hoelder certificates at random (t, x) and point pairs."""
    report = ValidationReport()
    u, rng = uniforms(rng, 4 * n_probes * s.dim + 2 * n_probes)
    u = u.reshape(n_probes, -1)
    box = np.array(s.effective_box())
    span = box[:, 1] - box[:, 0]
    x = box[:, 0] + span * u[:, : s.dim]
    y = box[:, 0] + span * u[:, s.dim : 2 * s.dim]
    ts = np.floor(u[:, 2 * s.dim] * 10_000).astype(int)
    gx = s.density(ts, x)
    gy = s.density(ts, y)
    if math.isfinite(s.holder_constant):
        dist = np.linalg.norm(x - y, axis=-1) ** s.holder_exponent
        report.checks["holder"] = bool(np.all(np.abs(gx - gy) <= s.holder_constant * dist + 1e-15))
    drift_ok = True
    for t, xi in zip(ts, x):
        cap = s.certify_drift(int(t)) if not s.shift.is_static else 0.0
        drift_ok &= abs(s.density(t + 1, xi) - s.density(t, xi)).item() <= cap + 1e-15
    report.checks["drift"] = bool(drift_ok)
    report.checks["gbar"] = bool(np.all(gx <= s.gbar + 1e-15))
    return report
