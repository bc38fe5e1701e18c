"""Random breather and alloy-type potentials and the ball-set geometry.

A configuration assigns one random radius to every integer lattice site
whose unit cube lies inside the box.  The breather potential is the union
of characteristic functions of balls (or cubes) with those radii; the
alloy potential uses a fixed support scaled linearly by the radii.  Radii
are drawn from per-site counter-based streams keyed by (seed, site), so a
configuration is reproducible bit-for-bit and independent of enumeration
order and of the box size.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, GridError, PotentialField

BALL = "ball"
CUBE = "cube"
_SEED_MASK = (1 << 64) - 1

# stream tags keep radius draws and ball-placement draws independent
_TAG_RADII = 0
_TAG_PLACEMENT = 1


class PotentialError(ValueError):
    """Invalid potential/geometry parameters."""


class ResolutionError(PotentialError):
    """Grid too coarse to resolve the requested feature size."""


def _zigzag(k: int) -> int:
    """Map a signed integer to a non-negative one, injectively."""
    return 2 * k if k >= 0 else -2 * k - 1


def _site_rng(seed: int, tag: int, site: tuple[int, ...]) -> np.random.Generator:
    words = [seed & _SEED_MASK, tag] + [_zigzag(int(c)) for c in site]
    return np.random.default_rng(np.random.SeedSequence(words))


def site_lattice(L: int, d: int) -> np.ndarray:
    """Integer lattice points j with the unit cube j + (-1/2,1/2)^d inside the box.

    Returned as an (L^d, d) array in lexicographic order.
    """
    half = (L - 1) // 2
    ax = np.arange(-half, half + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class SiteDistribution:
    """Uniform distribution of site radii on [lo, hi], 0 <= lo < hi < 1/2."""

    lo: float
    hi: float
    kind: str = "uniform"

    def __post_init__(self):
        if self.kind != "uniform":
            raise PotentialError(f"unsupported distribution kind {self.kind!r}")
        if not (0.0 <= self.lo < self.hi < 0.5):
            raise PotentialError(
                f"radius support must satisfy 0 <= lo < hi < 1/2, got [{self.lo}, {self.hi}]"
            )

    @property
    def density_sup(self) -> float:
        """Sup norm of the density (1/(hi-lo) for uniform)."""
        return 1.0 / (self.hi - self.lo)


@dataclass(frozen=True)
class BreatherConfiguration:
    """One realization of per-site radii on the lattice of an odd-L box.

    radii is a flat array of length L^d in lexicographic site order.
    """

    d: int
    L: int
    radii: np.ndarray
    seed: int
    kind: str = BALL
    dist: SiteDistribution | None = None

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float).ravel()
        object.__setattr__(self, "radii", radii)
        if self.L < 1 or self.L % 2 == 0:
            raise PotentialError(f"box side must be odd, got L={self.L}")
        if self.kind not in (BALL, CUBE):
            raise PotentialError(f"single-site kind must be ball or cube, got {self.kind!r}")
        if radii.size != self.L**self.d:
            raise PotentialError(
                f"need {self.L ** self.d} radii for L={self.L}, d={self.d}, got {radii.size}"
            )
        if np.any(radii < 0.0) or np.any(radii > 0.5):
            raise PotentialError("site radii must lie in [0, 1/2]")

    @property
    def n_sites(self) -> int:
        return self.radii.size

    def sites(self) -> np.ndarray:
        return site_lattice(self.L, self.d)

    @property
    def max_radius(self) -> float:
        return float(np.max(self.radii)) if self.radii.size else 0.0

    @property
    def min_radius(self) -> float:
        return float(np.min(self.radii)) if self.radii.size else 0.0

    @property
    def radius_cap(self) -> float:
        """Upper endpoint of the admissible radius range (hi of the
        distribution when known, else the realized maximum)."""
        return self.dist.hi if self.dist is not None else self.max_radius

    def shifted(self, delta: float) -> "BreatherConfiguration":
        """Configuration with every radius increased by delta.

        Radii that would exceed 1/2 are a hard error, never clamped.
        """
        if delta < 0.0:
            raise PotentialError("radius shift must be nonnegative")
        if self.radius_cap + delta > 0.5 + 1e-15:
            raise PotentialError(
                f"shift {delta} pushes radii beyond 1/2 (cap {self.radius_cap}); "
                f"admissible shifts are <= {0.5 - self.radius_cap}"
            )
        return BreatherConfiguration(
            d=self.d, L=self.L, radii=self.radii + delta, seed=self.seed,
            kind=self.kind, dist=self.dist,
        )

    def to_json(self) -> str:
        doc = {
            "seed": int(self.seed),
            "dist": None if self.dist is None else
                {"kind": self.dist.kind, "lo": self.dist.lo, "hi": self.dist.hi},
            "L": self.L,
            "d": self.d,
            "kind": self.kind,
            "radii": self.radii.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BreatherConfiguration":
        doc = json.loads(text)
        dist = None
        if doc["dist"] is not None:
            dist = SiteDistribution(lo=doc["dist"]["lo"], hi=doc["dist"]["hi"],
                                    kind=doc["dist"]["kind"])
        return cls(d=doc["d"], L=doc["L"], radii=np.array(doc["radii"]),
                   seed=doc["seed"], kind=doc["kind"], dist=dist)


def sample_configuration(dist: SiteDistribution, L: int, d: int, seed: int,
                         kind: str = BALL) -> BreatherConfiguration:
    """Draw one radius per site from per-site streams keyed by (seed, site)."""
    sites = site_lattice(L, d)
    radii = np.empty(len(sites))
    for idx, j in enumerate(sites):
        rng = _site_rng(seed, _TAG_RADII, tuple(j))
        radii[idx] = rng.uniform(dist.lo, dist.hi)
    return BreatherConfiguration(d=d, L=L, radii=radii, seed=seed, kind=kind, dist=dist)


def _nearest_sites(x: np.ndarray, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest lattice site of each point and a mask of points whose site
    lies inside the box lattice."""
    j = np.rint(x)
    half = (L - 1) // 2
    ok = np.all(np.abs(j) <= half, axis=-1)
    return j, ok


def _site_flat_index(j: np.ndarray, L: int, d: int) -> np.ndarray:
    half = (L - 1) // 2
    idx = (j + half).astype(np.intp)
    return np.ravel_multi_index(tuple(idx[..., a] for a in range(d)), (L,) * d)


def _site_distance(x: np.ndarray, j: np.ndarray, kind: str) -> np.ndarray:
    diff = x - j
    if kind == BALL:
        return np.sqrt(np.sum(diff * diff, axis=-1))
    return np.max(np.abs(diff), axis=-1)


def evaluate_breather(config: BreatherConfiguration, x: np.ndarray) -> np.ndarray:
    """Breather potential at points x: 1 inside the bump of the nearest site.

    Membership is strict (open balls/cubes); supports of distinct sites are
    disjoint since radii are <= 1/2.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    j, ok = _nearest_sites(pts, config.L)
    vals = np.zeros(len(pts))
    if ok.any():
        flat = _site_flat_index(j[ok], config.L, config.d)
        r = _site_distance(pts[ok], j[ok], config.kind)
        vals[ok] = (r < config.radii[flat]).astype(float)
    return float(vals[0]) if single else vals


def evaluate_alloy(config: BreatherConfiguration, x: np.ndarray, r: float) -> np.ndarray:
    """Alloy-type potential: radius r ball at each site, scaled by the site value.

    Linear in the per-site values; the comparison baseline for the breather's
    non-linear dependence.
    """
    if not 0.0 < r < 0.5:
        raise PotentialError(f"single-site radius must be in (0, 1/2), got {r}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    j, ok = _nearest_sites(pts, config.L)
    vals = np.zeros(len(pts))
    if ok.any():
        flat = _site_flat_index(j[ok], config.L, config.d)
        dist = _site_distance(pts[ok], j[ok], BALL)
        vals[ok] = np.where(dist < r, config.radii[flat], 0.0)
    return float(vals[0]) if single else vals


def increment_support(config: BreatherConfiguration, delta: float,
                      grid: Grid) -> np.ndarray:
    """Node indicator of supp(V_{shifted} - V): the union of width-delta annuli.

    Requires delta in (0, 1/2 - radius_cap] and h <= delta/4 so annuli are
    never lost between nodes.
    """
    _check_shift(config, delta)
    if grid.h > delta / 4.0:
        raise ResolutionError(
            f"grid h={grid.h} too coarse for annulus width {delta} (need h <= delta/4)"
        )
    pts = grid.node_coordinates()
    j, ok = _nearest_sites(pts, config.L)
    mask = np.zeros(len(pts), dtype=bool)
    if ok.any():
        flat = _site_flat_index(j[ok], config.L, config.d)
        r = _site_distance(pts[ok], j[ok], config.kind)
        w = config.radii[flat]
        mask[ok] = (r >= w) & (r < w + delta)
    return mask


def _check_shift(config: BreatherConfiguration, delta: float) -> None:
    if delta <= 0.0:
        raise PotentialError(f"annulus width must be positive, got {delta}")
    if delta > 0.5 - config.radius_cap + 1e-15:
        raise PotentialError(
            f"width {delta} exceeds admissible maximum {0.5 - config.radius_cap} "
            f"(radius cap {config.radius_cap})"
        )


@dataclass(frozen=True)
class BallSet:
    """Union of equal-radius balls, one per lattice site, each inside its unit cube.

    centers has one row per site in lexicographic site order.  h_max is the
    coarsest admissible mesh spacing for resolving this set on a grid.
    """

    centers: np.ndarray
    radius: float
    L: int
    d: int
    h_max: float
    label: str = ""

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "centers", centers)
        if self.radius <= 0.0:
            raise PotentialError(f"ball radius must be positive, got {self.radius}")
        if centers.shape != (self.L**self.d, self.d):
            raise PotentialError("need one center per lattice site")
        sites = site_lattice(self.L, self.d)
        off = np.max(np.abs(centers - sites), axis=-1)
        if np.any(off + self.radius > 0.5 + 1e-12):
            raise PotentialError("some ball leaves its unit cube")

    def indicator(self, grid: Grid) -> np.ndarray:
        """Boolean node mask: |x - z_j| < radius for the nearest site j."""
        if grid.d != self.d or grid.L != self.L:
            raise GridError("ball set and grid disagree on (d, L)")
        pts = grid.node_coordinates()
        j, ok = _nearest_sites(pts, self.L)
        mask = np.zeros(len(pts), dtype=bool)
        if ok.any():
            flat = _site_flat_index(j[ok], self.L, self.d)
            dist = np.sqrt(np.sum((pts[ok] - self.centers[flat]) ** 2, axis=-1))
            mask[ok] = dist < self.radius
        return mask


def annulus_ball_set(config: BreatherConfiguration, delta: float) -> BallSet:
    """Balls of radius delta/2 placed inside the width-delta increment annuli.

    Centers sit at j + (radius_j + delta/2) along the first axis; any
    placement inside the annuli would do, this one is deterministic.
    """
    _check_shift(config, delta)
    sites = site_lattice(config.L, config.d).astype(float)
    centers = sites.copy()
    centers[:, 0] += config.radii + delta / 2.0
    return BallSet(centers=centers, radius=delta / 2.0, L=config.L, d=config.d,
                   h_max=delta / 4.0, label=f"annulus:delta={delta!r}")


PLACEMENTS = ("centered", "seeded", "corner")


def standard_ball_set(L: int, d: int, delta: float, placement: str = "centered",
                      seed: int = 0) -> BallSet:
    """Observability set geometry: one delta-ball per unit cube.

    centered puts each ball at its site, corner pushes it maximally towards
    the (+1,...,+1) cube corner, seeded draws the center uniformly over the
    admissible positions from a per-site stream keyed by (seed, site).
    """
    if not 0.0 < delta < 0.5:
        raise PotentialError(f"ball radius must be in (0, 1/2), got {delta}")
    if placement not in PLACEMENTS:
        raise PotentialError(f"unknown placement {placement!r}")
    sites = site_lattice(L, d).astype(float)
    slack = 0.5 - delta
    if placement == "centered":
        centers = sites
    elif placement == "corner":
        centers = sites + slack
    else:
        centers = sites.copy()
        lattice = site_lattice(L, d)
        for idx, j in enumerate(lattice):
            rng = _site_rng(seed, _TAG_PLACEMENT, tuple(j))
            centers[idx] += rng.uniform(-slack, slack, size=d)
    label = f"{placement}:delta={delta!r}"
    if placement == "seeded":
        label += f":seed={seed}"
    return BallSet(centers=centers, radius=delta, L=L, d=d,
                   h_max=delta / 4.0, label=label)


@dataclass(frozen=True)
class PotentialRecipe:
    """Declarative description of a potential, replicable across box sizes.

    kinds: "zero"; "cosine" (amplitude * prod_a cos^2(pi x_a), 1-periodic);
    "breather" (frozen sample keyed by seed); "alloy" (breather radii as
    linear couplings on fixed balls of coupling_radius).
    """

    kind: str = "zero"
    amplitude: float = 1.0
    dist: SiteDistribution | None = None
    site_kind: str = BALL
    coupling_radius: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "cosine", "breather", "alloy"):
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("breather", "alloy") and self.dist is None:
            raise PotentialError(f"{self.kind} potential needs a site distribution")

    def configuration(self, L: int, d: int) -> BreatherConfiguration:
        if self.kind not in ("breather", "alloy"):
            raise PotentialError(f"{self.kind} potential has no configuration")
        return sample_configuration(self.dist, L, d, self.seed, kind=self.site_kind)


def breather_field(config: BreatherConfiguration, grid: Grid) -> PotentialField:
    """Nodal sample of the breather potential, with a resolution guard."""
    _check_grid_box(config, grid)
    if config.min_radius > 0.0 and grid.h > config.min_radius / 2.0 + 1e-15:
        raise ResolutionError(
            f"grid h={grid.h} too coarse for smallest bump radius "
            f"{config.min_radius} (need h <= radius/2)"
        )
    return PotentialField(evaluate_breather(config, grid.node_coordinates()))


def alloy_field(config: BreatherConfiguration, grid: Grid, r: float) -> PotentialField:
    """Nodal sample of the alloy potential with single-site radius r."""
    _check_grid_box(config, grid)
    if grid.h > r / 2.0 + 1e-15:
        raise ResolutionError(
            f"grid h={grid.h} too coarse for single-site radius {r} (need h <= r/2)"
        )
    return PotentialField(evaluate_alloy(config, grid.node_coordinates(), r))


def _check_grid_box(config: BreatherConfiguration, grid: Grid) -> None:
    if grid.d != config.d or grid.L != config.L:
        raise GridError("configuration and grid disagree on (d, L)")


def sample_field_on_grid(recipe: PotentialRecipe, grid: Grid) -> PotentialField:
    """Realize a potential recipe as nodal values on the grid."""
    if recipe.kind == "zero":
        return PotentialField.zeros(grid)
    if recipe.kind == "cosine":
        pts = grid.node_coordinates()
        vals = recipe.amplitude * np.prod(np.cos(np.pi * pts) ** 2, axis=-1)
        return PotentialField(vals)
    config = recipe.configuration(grid.L, grid.d)
    if recipe.kind == "breather":
        return breather_field(config, grid)
    return alloy_field(config, grid, recipe.coupling_radius)
