"""Target densities: Gaussian mixtures, diagnostic Gaussians, and a binary
image posterior with single-pixel flip support.

Continuous targets expose unnormalized ``log_density`` (vectorized in
``log_density_many``).  The binary lattice target additionally exposes exact
integer pair-count accounting so that single-flip log-density differences are
bit-for-bit consistent with full re-evaluation: every log density is derived
from integer counts through the one canonical expression in
``log_from_counts``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import expit

_CANONICAL_MEANS_FILE = "mixture_means_20.txt"

# Unordered neighbor offsets: horizontal, vertical and both diagonals.
_NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1),
                     (0, 1), (1, -1), (1, 0), (1, 1)]


class ContinuousTarget:
    """Base for targets on R^d with unnormalized log density."""

    dim: int
    init_box: tuple[float, float]

    def log_density(self, x: np.ndarray) -> float:
        return float(self.log_density_many(np.asarray(x, float)[None])[0])

    def log_density_many(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class IsotropicGaussian(ContinuousTarget):
    """Centered isotropic Gaussian, the diagnostic and oracle workhorse."""

    dim: int = 1
    variance: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.variance <= 0:
            raise ValueError("dim must be >= 1 and variance positive")
        sigma = float(np.sqrt(self.variance))
        self.init_box = (-5.0 * sigma, 5.0 * sigma)

    def log_density_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, float))
        return -0.5 * (points * points).sum(axis=1) / self.variance

    def sample_tempered(self, u: float, size: int, rng: np.random.Generator) -> np.ndarray:
        """Exact draws from the density proportional to exp(u * log_density)."""
        if u <= 0:
            raise ValueError("tempering exponent must be positive")
        return rng.standard_normal((size, self.dim)) * np.sqrt(self.variance / u)


@dataclass
class GaussianMixture(ContinuousTarget):
    """Mixture of isotropic Gaussians with a common component variance."""

    means: np.ndarray
    variance: float
    weights: np.ndarray | None = None
    init_box: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, float))
        k = self.means.shape[0]
        if self.weights is None:
            self.weights = np.full(k, 1.0 / k)
        else:
            self.weights = np.asarray(self.weights, float)
            if self.weights.shape != (k,):
                raise ValueError("weights length must match number of means")
            if (self.weights <= 0).any():
                raise ValueError("weights must be positive")
            self.weights = self.weights / self.weights.sum()
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        self._log_weights = np.log(self.weights)
        self._log_norm = 0.5 * self.dim * np.log(2.0 * np.pi * self.variance)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_density_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, float))
        diff = points[:, None, :] - self.means[None, :, :]
        sq = np.einsum("nkd,nkd->nk", diff, diff)
        a = self._log_weights[None, :] - sq / (2.0 * self.variance)
        amax = a.max(axis=1)
        return amax + np.log(np.exp(a - amax[:, None]).sum(axis=1)) - self._log_norm

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        return self.means[comp] + rng.standard_normal((size, self.dim)) * np.sqrt(self.variance)

    def coordinate_means(self) -> np.ndarray:
        """Exact E[X_i] per coordinate."""
        return self.weights @ self.means

    def coordinate_second_moments(self) -> np.ndarray:
        """Exact E[X_i^2] per coordinate."""
        return self.weights @ (self.means ** 2) + self.variance


def load_mixture_spec(path_or_file, variance: float | None = None) -> GaussianMixture:
    """Read a mixture spec: 'mean v1 .. vd' rows, optional 'weights' and
    'variance' lines, '#' comments.  ``variance`` overrides the file's value."""
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    means: list[list[float]] = []
    weights = None
    file_variance = None
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *rest = line.split()
        try:
            if word == "mean":
                means.append([float(v) for v in rest])
            elif word == "weights":
                weights = np.array([float(v) for v in rest])
            elif word == "variance":
                (file_variance,) = (float(v) for v in rest)
            else:
                raise ValueError(f"unknown mixture spec key {word!r}")
        except ValueError as exc:
            raise ValueError(f"mixture spec line {ln}: {exc}") from exc
    if not means:
        raise ValueError("mixture spec contains no 'mean' rows")
    widths = {len(m) for m in means}
    if len(widths) != 1:
        raise ValueError("mixture spec 'mean' rows have inconsistent lengths")
    if variance is None:
        variance = file_variance
    if variance is None:
        raise ValueError("mixture spec missing 'variance'")
    return GaussianMixture(np.array(means), variance=variance, weights=weights)


def save_mixture_spec(path, mixture: GaussianMixture) -> None:
    """Write a mixture spec readable by ``load_mixture_spec``."""
    buf = io.StringIO()
    # plain-float repr: numpy scalar reprs would not parse back
    buf.write(f"variance {float(mixture.variance)!r}\n")
    buf.write("weights " + " ".join(repr(float(w)) for w in mixture.weights) + "\n")
    for m in mixture.means:
        buf.write("mean " + " ".join(repr(float(v)) for v in m) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def canonical_mixture(dim: int = 2, variance: float | None = None) -> GaussianMixture:
    """The bundled 20-component benchmark mixture on [0, 10]^2.

    ``dim > 2`` zero-pads the means (the added coordinates peak at zero),
    which is how the hard high-dimensional variant is built.
    """
    if dim < 2:
        raise ValueError("canonical mixture needs dim >= 2")
    ref = resources.files("aptmc.data").joinpath(_CANONICAL_MEANS_FILE)
    with ref.open("r", encoding="utf-8") as fh:
        mix = load_mixture_spec(fh, variance=variance)
    if dim > 2:
        padded = np.zeros((mix.means.shape[0], dim))
        padded[:, :2] = mix.means
        mix = GaussianMixture(padded, variance=mix.variance, weights=mix.weights)
    return mix


class IsingPosterior:
    """Binary image posterior: a data term rewarding agreement with the
    observed image plus a smoothing term rewarding equal neighbor pairs
    over the 8-neighborhood (each unordered pair counted once).

    log density = match_weight * #{x == observed} + smooth_weight * #{equal pairs}

    All log densities flow through ``log_from_counts`` on integer counts, so
    differences computed from count deltas equal differences of full
    evaluations bit-for-bit.
    """

    def __init__(self, observed: np.ndarray, match_weight: float = 1.0,
                 smooth_weight: float = 0.7):
        observed = np.asarray(observed)
        if observed.ndim != 2:
            raise ValueError("observed image must be 2-D")
        if not np.isin(observed, (0, 1)).all():
            raise ValueError("observed image must be 0/1 valued")
        self.observed = observed.astype(np.uint8)
        self.shape = self.observed.shape
        self.match_weight = float(match_weight)
        self.smooth_weight = float(smooth_weight)
        r, c = self.shape
        self.n_sites = r * c
        # Neighbor table in flat indexing; out-of-bounds slots point at a
        # sentinel cell that never equals a 0/1 pixel.
        grid = np.full((r + 2, c + 2), self.n_sites, dtype=np.int64)
        grid[1:-1, 1:-1] = np.arange(self.n_sites).reshape(r, c)
        self._nbr = np.empty((self.n_sites, 8), dtype=np.int64)
        for k, (di, dj) in enumerate(_NEIGHBOR_OFFSETS):
            self._nbr[:, k] = grid[1 + di:1 + di + r, 1 + dj:1 + dj + c].ravel()
        self._nbr_count = (self._nbr < self.n_sites).sum(axis=1).astype(np.int64)
        self._observed_flat = self.observed.ravel()

    @property
    def pair_count(self) -> int:
        """Number of unordered neighbor pairs on the lattice."""
        r, c = self.shape
        return (r - 1) * c + r * (c - 1) + 2 * (r - 1) * (c - 1)

    def extended(self, x: np.ndarray) -> np.ndarray:
        """Flat copy of ``x`` with the sentinel cell appended; the layout the
        per-flip fast path operates on."""
        x = self._check_state(x)
        ext = np.empty(self.n_sites + 1, dtype=np.uint8)
        ext[:-1] = x.ravel()
        ext[-1] = 255
        return ext

    def image_of(self, ext: np.ndarray) -> np.ndarray:
        return ext[:-1].reshape(self.shape).copy()

    def counts(self, x: np.ndarray) -> tuple[int, int]:
        """(match, agree) integer counts for a full state."""
        x = self._check_state(x)
        match = int((x == self.observed).sum())
        agree = int((x[:, :-1] == x[:, 1:]).sum()
                    + (x[:-1, :] == x[1:, :]).sum()
                    + (x[:-1, :-1] == x[1:, 1:]).sum()
                    + (x[:-1, 1:] == x[1:, :-1]).sum())
        return match, agree

    def log_from_counts(self, match: int, agree: int) -> float:
        """The one canonical count-to-log-density expression."""
        return self.match_weight * match + self.smooth_weight * agree

    def log_density(self, x: np.ndarray) -> float:
        return self.log_from_counts(*self.counts(x))

    def flip_count_delta(self, ext: np.ndarray, site: int) -> tuple[int, int]:
        """(dmatch, dagree) from flipping ``site``, touching only the site and
        its neighbors.  ``ext`` is the extended flat layout."""
        value = ext[site]
        dmatch = 1 - 2 * int(value == self._observed_flat[site])
        same = int((ext[self._nbr[site]] == value).sum())
        dagree = int(self._nbr_count[site]) - 2 * same
        return dmatch, dagree

    def log_density_delta(self, x: np.ndarray, site: int,
                          counts: tuple[int, int] | None = None) -> float:
        """log density of ``x`` with ``site`` flipped minus that of ``x``,
        exactly equal to the difference of two ``log_density`` calls.

        Exactness forces evaluating both sides through ``log_from_counts``,
        which needs the global counts; pass ``counts(x)`` to keep the call
        O(neighborhood) instead of O(sites).
        """
        if not 0 <= site < self.n_sites:
            raise ValueError(f"site {site} outside [0, {self.n_sites})")
        x = self._check_state(x)
        if counts is None:
            counts = self.counts(x)
        match, agree = counts
        dmatch, dagree = self.flip_count_delta(self.extended(x), site)
        return (self.log_from_counts(match + dmatch, agree + dagree)
                - self.log_from_counts(match, agree))

    def conditional_one_prob(self, x: np.ndarray, beta: float = 1.0) -> np.ndarray:
        """P(pixel = 1 | rest of image) per site, under the density tempered
        by ``beta``.  The Rao-Blackwellized per-pixel posterior mean."""
        x = self._check_state(x)
        r, c = self.shape
        pad = np.zeros((r + 2, c + 2), dtype=np.int64)
        pad[1:-1, 1:-1] = x
        ones = np.zeros((r, c), dtype=np.int64)
        for di, dj in _NEIGHBOR_OFFSETS:
            ones += pad[1 + di:1 + di + r, 1 + dj:1 + dj + c]
        logit = (self.match_weight * (2.0 * self.observed - 1.0)
                 + self.smooth_weight * (2.0 * ones - self._nbr_count.reshape(r, c)))
        return expit(beta * logit)

    def _check_state(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != self.shape:
            raise ValueError(f"state shape {x.shape} != lattice {self.shape}")
        return x


def synthetic_floe_image(size: int = 40) -> np.ndarray:
    """A clean test image: an ice ring with a central clump, exactly invariant
    under every axis flip, diagonal flip and quarter turn of the square."""
    if size < 8:
        raise ValueError("size must be >= 8")
    center = (size - 1) / 2.0
    i, j = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    rsq = (i - center) ** 2 + (j - center) ** 2
    outer = (0.34 * size) ** 2
    inner = (0.18 * size) ** 2
    core = (0.07 * size) ** 2
    image = ((rsq <= outer) & (rsq >= inner)) | (rsq <= core)
    return image.astype(np.uint8)


def read_binary_image(path) -> np.ndarray:
    """Read a 0/1 image: either a plain-text grid of 0/1 rows or an ASCII
    portable bitmap (P1, where 1 is rendered black)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    tokens = _pnm_tokens(text)
    if tokens and tokens[0] == "P1":
        width, height = int(tokens[1]), int(tokens[2])
        bits = np.array([int(t) for t in tokens[3:3 + width * height]])
        if bits.size != width * height:
            raise ValueError("truncated P1 bitmap")
        image = bits.reshape(height, width)
    else:
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append([int(ch) for ch in line.replace(" ", "")])
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("malformed 0/1 grid")
        image = np.array(rows)
    if not np.isin(image, (0, 1)).all():
        raise ValueError("image values must be 0/1")
    return image.astype(np.uint8)


def write_pbm(path, image: np.ndarray) -> None:
    """Write a 0/1 image as ASCII portable bitmap (P1)."""
    image = np.asarray(image)
    lines = [f"P1\n{image.shape[1]} {image.shape[0]}\n"]
    lines += [" ".join(str(int(v)) for v in row) + "\n" for row in image]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def write_pgm(path, values: np.ndarray) -> None:
    """Write values in [0, 1] as an ASCII portable graymap (P2, maxval 255)."""
    values = np.asarray(values, float)
    if values.min() < 0 or values.max() > 1:
        raise ValueError("graymap values must lie in [0, 1]")
    gray = np.rint(values * 255).astype(int)
    lines = [f"P2\n{values.shape[1]} {values.shape[0]}\n255\n"]
    lines += [" ".join(str(v) for v in row) + "\n" for row in gray]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def read_pgm(path) -> np.ndarray:
    """Read an ASCII portable graymap back to floats in [0, 1]."""
    with open(path, encoding="utf-8") as fh:
        tokens = _pnm_tokens(fh.read())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not an ASCII portable graymap")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.array([int(t) for t in tokens[4:4 + width * height]], float)
    if pixels.size != width * height:
        raise ValueError("truncated graymap")
    return pixels.reshape(height, width) / maxval


def _pnm_tokens(text: str) -> list[str]:
    tokens = []
    for raw in text.splitlines():
        tokens.extend(raw.split("#", 1)[0].split())
    return tokens
