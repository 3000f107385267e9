"""
Covariance functions and the local-continuity functional ``c(delta)``.

Stationary families are isotropic functions of the lag ``h = x - y``::

    exponential          s2 * exp(-|h| / phi)
    matern25             s2 * (1 + sqrt(5)|h|/phi + 5|h|^2/(3 phi^2)) * exp(-sqrt(5)|h|/phi)
    squared_exponential  s2 * exp(-|h|^2 / phi)
    matern               s2 * 2^(1-nu)/Gamma(nu) * (sqrt(2 nu)|h|/phi)^nu * K_nu(sqrt(2 nu)|h|/phi)

and the non-stationary ``polynomial`` kernel is ``(offset + x'y)^degree``.

The squared exponential uses a negative exponent. A positive exponent grows
with distance and is not positive semidefinite, so it is never a covariance.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln, kv

FAMILIES = ("exponential", "matern25", "squared_exponential", "matern", "polynomial")
STATIONARY = frozenset(FAMILIES[:4])


@dataclass(frozen=True)
class KernelSpec:
    """Covariance function descriptor.

    Parameters
    ----------
    family : str
        One of ``FAMILIES``.
    range : float
        Range parameter ``phi`` (> 0). Ignored by ``polynomial``.
    variance : float
        Marginal variance ``sigma^2`` (> 0). Ignored by ``polynomial``.
    nu : float, optional
        Smoothness, required for the generic ``matern`` family.
    degree : int
        Polynomial degree (``polynomial`` only).
    offset : float
        Polynomial offset, >= 0 (``polynomial`` only).
    """

    family: str
    range: float = 1.0
    variance: float = 1.0
    nu: float | None = None
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.range) and self.range > 0):
            raise ValueError(f"range must be positive, got {self.range}")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.family == "matern":
            if self.nu is None or not (np.isfinite(self.nu) and self.nu > 0):
                raise ValueError("matern family needs a positive smoothness nu")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"polynomial degree must be a positive integer, got {self.degree}")
            if not (np.isfinite(self.offset) and self.offset >= 0):
                raise ValueError(f"polynomial offset must be >= 0, got {self.offset}")

    @property
    def stationary(self) -> bool:
        return self.family in STATIONARY

    @property
    def slug(self) -> str:
        """Short file-name friendly label."""
        if self.family == "polynomial":
            return f"polynomial_d{int(self.degree)}_c{self.offset:g}"
        if self.family == "matern":
            return f"matern_nu{self.nu:g}_r{self.range:g}"
        return f"{self.family}_r{self.range:g}"

    def to_text(self) -> str:
        """Flat ``key=value`` form, e.g. ``family=exponential range=0.25 variance=1``."""
        if self.family == "polynomial":
            return f"family=polynomial degree={int(self.degree)} offset={self.offset!r}"
        parts = [f"family={self.family}", f"range={self.range!r}", f"variance={self.variance!r}"]
        if self.family == "matern":
            parts.append(f"nu={self.nu!r}")
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "KernelSpec":
        fields = {}
        for token in text.split():
            key, sep, value = token.partition("=")
            if not sep or not value:
                raise ValueError(f"malformed kernel token {token!r} in {text!r}")
            fields[key.strip().lower()] = value.strip()
        if "family" not in fields:
            raise ValueError(f"kernel text {text!r} has no family")
        family = fields.pop("family").lower()
        kwargs = {"family": family}
        casts = {"range": float, "variance": float, "nu": float, "degree": int, "offset": float}
        for key, value in fields.items():
            if key not in casts:
                raise ValueError(f"unknown kernel field {key!r}")
            try:
                kwargs[key] = casts[key](value)
            except ValueError as err:
                raise ValueError(f"bad value for kernel field {key!r}: {value!r}") from err
        return cls(**kwargs)


# The four kernels of the numerical studies.
K1 = KernelSpec("exponential", range=0.25)
K2 = KernelSpec("matern25", range=0.25)
K3 = KernelSpec("squared_exponential", range=0.1)
K4 = KernelSpec("polynomial", degree=2, offset=1.0)


def _as_points(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"{name} must be a point or an array of points, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite coordinates")
    return x


def correlation(spec: KernelSpec, h):
    """Stationary kernel as a function of distance ``h`` (array), without the variance."""
    h = np.asarray(h, dtype=float)
    r = h / spec.range
    if spec.family == "exponential":
        return np.exp(-r)
    if spec.family == "matern25":
        a = np.sqrt(5.0) * r
        return (1.0 + a + a * a / 3.0) * np.exp(-a)
    if spec.family == "squared_exponential":
        return np.exp(-h * h / spec.range)
    if spec.family == "matern":
        nu = float(spec.nu)
        a = np.sqrt(2.0 * nu) * r
        out = np.ones_like(a)
        pos = a > 0
        ap = a[pos]
        with np.errstate(over="ignore", under="ignore"):
            logc = (1.0 - nu) * np.log(2.0) - gammaln(nu) + nu * np.log(ap)
            out[pos] = np.exp(logc) * kv(nu, ap)
        # kv underflows to 0 long before the product does; that is the right limit
        out[pos & ~np.isfinite(out)] = 0.0
        return out
    raise ValueError(f"{spec.family} is not stationary")


def kernel_matrix(spec: KernelSpec, X, Y=None):
    """Matrix ``(K(x_i, y_j))`` for point arrays ``X`` (n, d) and ``Y`` (m, d).

    With ``Y`` omitted the result is ``K(X, X)`` and is made exactly symmetric.
    """
    X = _as_points(X, "X")
    Y_ = X if Y is None else _as_points(Y, "Y")
    if X.shape[1] != Y_.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y_.shape[1]}")
    if spec.family == "polynomial":
        out = (spec.offset + X @ Y_.T) ** int(spec.degree)
    else:
        out = spec.variance * correlation(spec, cdist(X, Y_))
    if Y is None:
        upper = np.triu(out)
        out = upper + np.triu(out, 1).T
    return out


def evaluate(spec: KernelSpec, x, y) -> float:
    """``K(x, y)`` for two single points of equal dimension."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size == 0:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(kernel_matrix(spec, x, y)[0, 0])


def kernel_diagonal(spec: KernelSpec, X):
    """``K(x, x)`` for each row of ``X``."""
    X = _as_points(X, "X")
    if spec.family == "polynomial":
        return (spec.offset + np.einsum("ij,ij->i", X, X)) ** int(spec.degree)
    return np.full(X.shape[0], spec.variance)


def _directions(lower, upper):
    d = lower.size
    dirs = []
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=d):
        s = np.array(signs)
        if np.any(s):
            dirs.append(s / np.linalg.norm(s))
            # box diagonals, so that separations up to the box diameter are reachable
            b = s * (upper - lower)
            dirs.append(b / np.linalg.norm(b))
    return np.unique(np.round(np.array(dirs), 15), axis=0)


def c_delta(spec: KernelSpec, domain, delta: float, resolution: int = 21) -> float:
    """Estimate ``inf (K(x1, x2) / K(x2, x2))^2`` over pairs with ``|x1 - x2| <= delta``.

    ``x2`` runs over a ``resolution^d`` grid of the domain (corners included)
    and ``x1 = x2 + delta * e`` for axis and diagonal unit directions ``e``,
    clipped to the domain. For isotropic kernels that decrease with distance
    the infimum sits at separation ``delta``, which the corner-anchored box
    diagonals reach for every ``delta`` up to the domain diameter, so the
    estimate is exact there.
    """
    if int(resolution) < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    delta = float(delta)
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    lower = np.asarray(domain.lower, dtype=float)
    upper = np.asarray(domain.upper, dtype=float)
    if delta > domain.diameter * (1 + 1e-12):
        raise ValueError(f"delta {delta} exceeds the domain diameter {domain.diameter}")
    if delta == 0.0 and spec.stationary:
        return 1.0

    axes = [np.linspace(lo, hi, int(resolution)) for lo, hi in zip(lower, upper)]
    x2 = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lower.size)
    k22 = kernel_diagonal(spec, x2)
    ok = np.abs(k22) > 0
    x2, k22 = x2[ok], k22[ok]
    if x2.shape[0] == 0:
        raise ValueError("K(x, x) vanishes on the whole grid")

    # non-stationary ratios need not be monotone in the separation
    steps = [1.0] if spec.stationary else np.linspace(0.0, 1.0, 9)[1:]
    best = 1.0
    for e in _directions(lower, upper):
        for t in steps:
            x1 = np.clip(x2 + t * delta * e, lower, upper)
            if spec.family == "polynomial":
                k12 = (spec.offset + np.einsum("ij,ij->i", x1, x2)) ** int(spec.degree)
            else:
                k12 = spec.variance * correlation(spec, np.linalg.norm(x1 - x2, axis=1))
            best = min(best, float(np.min((k12 / k22) ** 2)))
    return float(np.clip(best, 0.0, 1.0))
