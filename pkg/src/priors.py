"""Coefficient priors Pi = (1 - eps) * delta_0 + eps * Pi*.

Every nonzero component exposes the same small surface: a right-continuous
``cdf``, its ``atoms`` (jump locations and masses), the ``continuous_cdf``
left once the atoms are removed, quantile bounds for truncating integrals,
the second moment, and a sampler driven by a numpy Generator.
"""
import itertools
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Literal, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy import special

import config


@dataclass(frozen=True)
class PointMass:
    location: float

    def __post_init__(self):
        if not math.isfinite(self.location) or self.location == 0:
            raise ValueError(f"point mass location must be finite and nonzero, got {self.location}")

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.location, 1.0, 0.0)

    def continuous_cdf(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def atoms(self):
        return ((self.location, 1.0),)

    def quantile_bounds(self, tail):
        return self.location, self.location

    def second_moment(self):
        return self.location ** 2

    def sample(self, rng, size):
        return np.full(size, self.location, dtype=float)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    continuous_cdf = cdf

    def atoms(self):
        return ()

    def quantile_bounds(self, tail):
        return 0.0, -math.log(tail) / self.rate

    def second_moment(self):
        return 2.0 / self.rate ** 2

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class GammaMixture:
    """Mixture of unit-rate Gamma distributions."""

    shapes: Tuple[float, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        shapes = tuple(float(s) for s in self.shapes)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "weights", weights)
        if not shapes or len(shapes) != len(weights):
            raise ValueError("gamma mixture needs one weight per shape")
        if any(s <= 0 for s in shapes):
            raise ValueError(f"gamma shapes must be positive, got {shapes}")
        if any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError(f"gamma mixture weights must be nonnegative and sum to 1, got {weights}")

    def _active(self):
        return [(s, w) for s, w in zip(self.shapes, self.weights) if w > 0]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        total = np.zeros_like(xp)
        for s, w in self._active():
            total = total + w * special.gammainc(s, xp)
        return np.where(x > 0, total, 0.0)

    continuous_cdf = cdf

    def atoms(self):
        return ()

    def quantile_bounds(self, tail):
        active = self._active()
        lo = min(special.gammaincinv(s, tail) for s, _ in active)
        hi = max(special.gammaincinv(s, 1.0 - tail) for s, _ in active)
        return float(lo), float(hi)

    def second_moment(self):
        return math.fsum(w * s * (s + 1.0) for s, w in zip(self.shapes, self.weights))

    def sample(self, rng, size):
        component = rng.choice(len(self.shapes), size=size, p=np.asarray(self.weights))
        return rng.gamma(np.asarray(self.shapes)[component])


@dataclass(frozen=True)
class TabulatedCdf:
    """User-supplied CDF, linearly interpolated between grid points.

    ``values[0] > 0`` puts an atom of that mass at ``grid[0]``.
    """

    grid: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or grid.size != values.size:
            raise ValueError("tabulated CDF needs matching grid and values with at least two points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("tabulated CDF grid must be strictly increasing")
        if np.any(np.diff(values) < 0) or values[0] < 0 or abs(values[-1] - 1.0) > 1e-12:
            raise ValueError("tabulated CDF values must be nondecreasing from >= 0 up to 1")
        if values[0] > 0 and grid[0] == 0:
            raise ValueError("tabulated CDF places an atom at zero")
        object.__setattr__(self, "grid", tuple(grid.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))

    def cdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid, self.values, left=0.0, right=1.0)

    def continuous_cdf(self, x):
        v0 = self.values[0]
        shifted = np.asarray(self.values) - v0
        return np.interp(np.asarray(x, dtype=float), self.grid, shifted, left=0.0, right=1.0 - v0)

    def atoms(self):
        if self.values[0] > 0:
            return ((self.grid[0], self.values[0]),)
        return ()

    def quantile_bounds(self, tail):
        return self.grid[0], self.grid[-1]

    def second_moment(self):
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        a, b = g[:-1], g[1:]
        # uniform density on each segment
        segments = np.diff(v) * (a * a + a * b + b * b) / 3.0
        return float(v[0] * g[0] ** 2 + segments.sum())

    def sample(self, rng, size):
        return np.interp(rng.random(size), self.values, self.grid)


NonzeroDistribution = Union[PointMass, Exponential, GammaMixture, TabulatedCdf]


@dataclass(frozen=True)
class PriorSpec:
    epsilon: float
    star: NonzeroDistribution

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 - self.epsilon) * (x >= 0) + self.epsilon * self.star.cdf(x)

    def atoms(self):
        eps = self.epsilon
        return ((0.0, 1.0 - eps),) + tuple((loc, eps * mass) for loc, mass in self.star.atoms())

    def continuous_cdf(self, x):
        return self.epsilon * self.star.continuous_cdf(x)

    def second_moment(self):
        return self.epsilon * self.star.second_moment()

    def support_bounds(self, tail=config.QUAD_TAIL_PROB):
        lo, hi = self.star.quantile_bounds(tail)
        return min(lo, 0.0), max(hi, 0.0)

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)

    def sample(self, count, seed):
        if count < 0:
            raise ValueError(f"count must be nonnegative, got {count}")
        rng = np.random.default_rng(seed)
        nonzero = rng.random(count) < self.epsilon
        out = np.zeros(count)
        out[nonzero] = self.star.sample(rng, int(nonzero.sum()))
        return out


def cdf(prior: PriorSpec, x):
    return prior.cdf(x)


def sample(prior: PriorSpec, count: int, seed: int):
    return prior.sample(count, seed)


def second_moment(prior: PriorSpec) -> float:
    return prior.second_moment()


def support_bounds(prior: PriorSpec, tail: float = config.QUAD_TAIL_PROB):
    return prior.support_bounds(tail)


def enumerate_restricted_mixtures(shapes, levels) -> List[Tuple[float, ...]]:
    """Normalized weight vectors u / sum(u) with every u_i drawn from ``levels``.

    Proportional integer vectors describe the same mixture; they are merged by
    reducing each vector by its gcd, so the count is exact.
    """
    shapes = tuple(shapes)
    levels = sorted(set(int(u) for u in levels))
    if not shapes:
        raise ValueError("need at least one shape")
    if not levels or levels[-1] <= 0 or levels[0] < 0:
        raise ValueError(f"levels must be nonnegative with at least one positive value, got {levels}")

    members = {}
    for combo in itertools.product(levels, repeat=len(shapes)):
        if not any(combo):
            continue
        g = math.gcd(*combo)
        members.setdefault(tuple(u // g for u in combo), None)

    out = []
    for key in members:
        total = sum(key)
        out.append(tuple(u / total for u in key))
    return out


def parse_prior(token: str, epsilon: float) -> PriorSpec:
    """CLI shorthand: ``point:1.9``, ``exp:1``, ``gamma:2``,
    ``gamma-mix:0.1,0.8/0.5,0.5`` or ``tab:cdf.csv`` (two columns grid,value)."""
    family, _, arg = token.partition(":")
    family = family.strip().lower()
    if not arg:
        raise ValueError(f"prior '{token}' is missing its parameters")
    try:
        if family in ("point", "point_mass"):
            star = PointMass(float(arg))
        elif family in ("exp", "exponential"):
            star = Exponential(float(arg))
        elif family == "gamma":
            star = GammaMixture((float(arg),), (1.0,))
        elif family in ("gamma-mix", "gamma_mixture"):
            shapes, _, weights = arg.partition("/")
            star = GammaMixture(
                tuple(float(s) for s in shapes.split(",")),
                tuple(float(w) for w in weights.split(",")),
            )
        elif family in ("tab", "tabulated"):
            table = pd.read_csv(arg, header=None)
            star = TabulatedCdf(tuple(table.iloc[:, 0]), tuple(table.iloc[:, 1]))
        else:
            raise ValueError(f"unknown prior family '{family}'")
    except (TypeError, IndexError) as e:
        raise ValueError(f"cannot parse prior '{token}': {e}") from e
    return PriorSpec(epsilon, star)


class PriorConfig(BaseModel):
    """Prior block of a structured config file: ``{epsilon, family, params}``."""

    epsilon: float = Field(gt=0, lt=1)
    family: Literal["point_mass", "exponential", "gamma_mixture", "tabulated"]
    params: Dict[str, Any] = Field(default_factory=dict)

    def build(self) -> PriorSpec:
        p = self.params
        try:
            if self.family == "point_mass":
                star = PointMass(float(p["location"]))
            elif self.family == "exponential":
                star = Exponential(float(p.get("rate", 1.0)))
            elif self.family == "gamma_mixture":
                star = GammaMixture(tuple(p["shapes"]), tuple(p["weights"]))
            else:
                if "path" in p:
                    table = pd.read_csv(p["path"], header=None)
                    star = TabulatedCdf(tuple(table.iloc[:, 0]), tuple(table.iloc[:, 1]))
                else:
                    star = TabulatedCdf(tuple(p["grid"]), tuple(p["values"]))
        except KeyError as e:
            raise ValueError(f"prior family '{self.family}' is missing parameter {e}") from e
        return PriorSpec(self.epsilon, star)

    @classmethod
    def from_spec(cls, spec: PriorSpec) -> "PriorConfig":
        star = spec.star
        if isinstance(star, PointMass):
            return cls(epsilon=spec.epsilon, family="point_mass", params={"location": star.location})
        if isinstance(star, Exponential):
            return cls(epsilon=spec.epsilon, family="exponential", params={"rate": star.rate})
        if isinstance(star, GammaMixture):
            return cls(epsilon=spec.epsilon, family="gamma_mixture",
                       params={"shapes": list(star.shapes), "weights": list(star.weights)})
        return cls(epsilon=spec.epsilon, family="tabulated",
                   params={"grid": list(star.grid), "values": list(star.values)})
