"""The compact branching space, its profile curve, metric and densities.

The space is the region under a convex profile f over [-1, 1], carrying the
sup metric and a reference measure whose fibers are truncated Gaussians.
The profile solves f'' = phi, f'(-1) = 0, f(-1) = eps for the fixed bump

    phi(x) = (3/4) (1 - (x/k)^2)   on [-k, k],   0 elsewhere,

which integrates to k, stays <= 3/4 and makes f an exactly evaluable
piecewise polynomial: constant eps left of -k, a quartic across the bump,
and the line eps + k x to the right.
"""

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import integrate

from .backend import kernels
from .errors import DomainError, ParameterError

__all__ = [
    "SpaceParams", "Profile", "Point", "PairClass", "SingularPart",
    "build_profile", "profile_eval", "dist_inf", "density", "classify_pair",
    "gaussian_mass", "c_constant",
]


@dataclass(frozen=True)
class SpaceParams:
    """The triple (k, K, eps) fixing one space of the family."""

    k: float
    K: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.k < 0.5:
            raise ParameterError(f"k must lie in (0, 1/2), got {self.k}")
        if not 0.0 <= self.epsilon < self.k:
            raise ParameterError(
                f"epsilon must lie in [0, k), got {self.epsilon}")
        if not self.K >= 1.0:
            raise ParameterError(f"K must be >= 1, got {self.K}")


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class PairClass:
    """Region tag of a point pair plus its orientation signs."""

    tag: str                 # one of "V", "D", "H0", "H1"
    sign_dx: int             # sign of x1 - x0
    sign_dy: int             # sign of y1 - y0


@dataclass(frozen=True)
class SingularPart:
    """Marker for the one-dimensional part of the limit measure."""

    line_density: float      # C_K


_BRANCH_TAGS = ("V", "D", "H0", "H1")
_BRANCH_CODES = {t: i for i, t in enumerate(_BRANCH_TAGS)}


def branch_tag(code: int) -> str:
    return _BRANCH_TAGS[code]


def branch_code(tag: str) -> int:
    return _BRANCH_CODES[tag]


def c_constant(K: float, upper: float = 1.0) -> float:
    """Adaptive quadrature of the fiber Gaussian mass up to ``upper``."""
    val, err = integrate.quad(lambda y: np.exp(-K * y * y), 0.0, upper,
                              epsabs=0.0, epsrel=1e-13)
    return val


def gaussian_mass(K: float, u0, u1):
    """Exact integral of exp(-K u^2) over [u0, u1] (erf closed form)."""
    from scipy.special import erf
    r = np.sqrt(K)
    return np.sqrt(np.pi) / (2.0 * r) * (erf(r * np.asarray(u1))
                                         - erf(r * np.asarray(u0)))


@dataclass(frozen=True)
class Profile:
    """Piecewise-polynomial profile with exact derivatives.

    ``breaks`` is [-1, -k, k, 1]; ``c0``/``c1``/``c2`` hold ascending-power
    coefficient rows for f, f', f'' on the three pieces, in global
    coordinates.
    """

    params: SpaceParams
    breaks: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def f(self, x):
        return profile_eval(self, x)[0]

    def f_batch(self, x: np.ndarray) -> np.ndarray:
        return kernels.eval_f(np.ascontiguousarray(x, dtype=np.float64),
                              self.breaks, self.c0)

    def as_dict(self) -> dict:
        """JSON-ready dump: breakpoints plus per-piece coefficients."""
        return {
            "k": self.params.k,
            "K": self.params.K,
            "epsilon": self.params.epsilon,
            "breakpoints": [float(b) for b in self.breaks],
            "pieces": [
                {
                    "interval": [float(self.breaks[i]),
                                 float(self.breaks[i + 1])],
                    "f": [float(c) for c in self.c0[i]],
                    "f1": [float(c) for c in self.c1[i]],
                    "f2": [float(c) for c in self.c2[i]],
                }
                for i in range(3)
            ],
            "coefficient_order": "ascending powers of x",
        }


def build_profile(params: SpaceParams) -> Profile:
    """Closed-form integration of f'' = phi with the stated initial data."""
    k = params.k
    eps = params.epsilon
    breaks = np.array([-1.0, -k, k, 1.0])
    c0 = np.zeros((3, 5))
    c1 = np.zeros((3, 5))
    c2 = np.zeros((3, 5))
    # flat piece [-1, -k]
    c0[0, 0] = eps
    # bump piece [-k, k]: f'' = 3/4 - 3 x^2 / (4 k^2)
    c2[1, 0] = 0.75
    c2[1, 2] = -0.75 / (k * k)
    c1[1, 0] = 0.5 * k
    c1[1, 1] = 0.75
    c1[1, 3] = -0.25 / (k * k)
    c0[1, 0] = eps + 0.1875 * k * k
    c0[1, 1] = 0.5 * k
    c0[1, 2] = 0.375
    c0[1, 4] = -1.0 / (16.0 * k * k)
    # linear piece [k, 1]
    c0[2, 0] = eps
    c0[2, 1] = k
    c1[2, 0] = k
    return Profile(params, breaks, c0, c1, c2)


def profile_eval(profile: Profile, x):
    """(f, f', f'') at x; scalar in, scalars out; array in, arrays out.

    Raises DomainError outside [-1, 1].
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(xs < -1.0) or np.any(xs > 1.0):
        raise DomainError("profile argument outside [-1, 1]")
    f, f1, f2 = kernels.eval_profile(np.ascontiguousarray(xs),
                                     profile.breaks, profile.c0,
                                     profile.c1, profile.c2)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(f[0]), float(f1[0]), float(f2[0])
    return f, f1, f2


def dist_inf(p: Point, q: Point) -> float:
    """Sup metric."""
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def dist_inf_batch(x0, y0, x1, y1):
    return np.maximum(np.abs(x1 - x0), np.abs(y1 - y0))


def in_space(profile: Profile, p: Point, slack: float = 0.0) -> bool:
    x, y = p
    if not -1.0 <= x <= 1.0:
        return False
    return -slack <= y <= profile.f(x) + slack


def density(params: SpaceParams, p: Point,
            profile: Profile = None) -> Union[float, SingularPart]:
    """Reference density at p; a SingularPart marker on the collapsed
    segment of the eps = 0 space."""
    if profile is None:
        profile = build_profile(params)
    x, y = p
    fx = profile.f(x)
    if y < 0.0 or y > fx or not -1.0 <= x <= 1.0:
        raise DomainError(f"point {p} outside the space")
    if fx == 0.0:
        if params.epsilon != 0.0:
            raise DomainError("zero profile with positive epsilon")
        return SingularPart(line_density=c_constant(params.K))
    return float(np.exp(-params.K * (y / fx) ** 2) / fx)


def classify_pair(p0: Point, p1: Point) -> PairClass:
    """Region tag of a pair: V (vertical), D (diagonal tie), H0 (gently
    sloped horizontal), H1 (steep horizontal)."""
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    adx, ady = abs(dx), abs(dy)
    if adx < ady:
        tag = "V"
    elif adx == ady:
        tag = "D"
    elif 2.0 * ady <= adx:
        tag = "H0"
    else:
        tag = "H1"
    sgn = lambda v: (v > 0) - (v < 0)
    return PairClass(tag=tag, sign_dx=sgn(dx), sign_dy=sgn(dy))
