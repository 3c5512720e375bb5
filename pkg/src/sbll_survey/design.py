"""Sampling designs, inclusion probabilities and SRS draws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidDesignError(ValueError):
    """Raised for inconsistent design parameters or inclusion probabilities."""


class MissingResponseError(ValueError):
    """Raised when a sample is requested from a frame without responses."""


def rng_for(*keys) -> np.random.Generator:
    """Return a PCG64 generator seeded from a tuple of non-negative integers.

    Streams are split by key: ``rng_for(master, cell, rep)`` gives an
    independent stream for every replication of every cell.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in keys])))


class SamplingDesign:
    """Base class for fixed-size designs.

    Subclasses supply vectorised first- and second-order inclusion
    probabilities over (0-based) population indices.
    """

    population_size: int
    sample_size: int

    def first_order(self, i) -> np.ndarray:
        raise NotImplementedError

    def second_order(self, i, j) -> np.ndarray:
        raise NotImplementedError

    def joint_matrix(self, indices) -> np.ndarray:
        """Matrix of pi_ij over ``indices`` with pi_i on the diagonal."""
        idx = np.asarray(indices)
        return self.second_order(idx[:, None], idx[None, :])

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_srs(self) -> bool:
        return False


@dataclass(frozen=True)
class SRSDesign(SamplingDesign):
    """Simple random sampling without replacement of n out of N units."""

    population_size: int
    sample_size: int

    def __post_init__(self):
        N, n = self.population_size, self.sample_size
        if N < 1 or n < 1 or n > N:
            raise InvalidDesignError(f"invalid SRS design: n={n}, N={N}")

    @property
    def is_srs(self) -> bool:
        return True

    @property
    def fraction(self) -> float:
        return self.sample_size / self.population_size

    @property
    def pi(self) -> float:
        return self.sample_size / self.population_size

    @property
    def pi_pair(self) -> float:
        N, n = self.population_size, self.sample_size
        if N == 1:
            return 1.0
        return n * (n - 1) / (N * (N - 1))

    def first_order(self, i) -> np.ndarray:
        return np.full(np.shape(i), self.pi, dtype=float)

    def second_order(self, i, j) -> np.ndarray:
        i, j = np.broadcast_arrays(np.asarray(i), np.asarray(j))
        return np.where(i == j, self.pi, self.pi_pair).astype(float)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        # partial Fisher-Yates: the first n slots become a uniform n-subset
        N, n = self.population_size, self.sample_size
        pool = np.arange(N)
        u = rng.random(n)
        for k in range(n):
            j = k + int(u[k] * (N - k))
            pool[k], pool[j] = pool[j], pool[k]
        return np.sort(pool[:n])


def make_srs(N: int, n: int) -> SRSDesign:
    """SRS design with 0 < n < N."""
    if not 0 < n < N:
        raise InvalidDesignError(f"SRS requires 0 < n < N, got n={n}, N={N}")
    return SRSDesign(N, n)


def census_design(N: int) -> SRSDesign:
    """Degenerate design that takes every unit with probability one."""
    return SRSDesign(N, N)


def delta(design: SamplingDesign, i, j) -> np.ndarray | float:
    """pi_ij - pi_i * pi_j."""
    out = design.second_order(i, j) - design.first_order(i) * design.first_order(j)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class SampleData:
    """A realised sample: population row indices, responses and the design.

    Indices are 0-based rows of the population frame.
    """

    indices: np.ndarray
    responses: np.ndarray
    design: SamplingDesign
    pi: np.ndarray = field(default=None)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        self.responses = np.asarray(self.responses, dtype=float)
        if self.indices.shape != self.responses.shape:
            raise ValueError("indices and responses must have the same length")
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("sample indices must be distinct")
        N = self.design.population_size
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= N):
            raise ValueError("sample index outside the population")
        if self.pi is None:
            self.pi = self.design.first_order(self.indices)
        self.pi = np.asarray(self.pi, dtype=float)
        if np.any(self.pi <= 0) or np.any(self.pi > 1):
            raise InvalidDesignError("inclusion probabilities must lie in (0, 1]")

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def N(self) -> int:
        return self.design.population_size

    @property
    def weights(self) -> np.ndarray:
        """Design weights 1/pi_i."""
        return 1.0 / self.pi

    def indicator(self) -> np.ndarray:
        """Length-N membership indicator I_i."""
        out = np.zeros(self.N, dtype=bool)
        out[self.indices] = True
        return out

    def joint_pi(self) -> np.ndarray:
        return self.design.joint_matrix(self.indices)


def draw_srs(design: SamplingDesign, frame, seed) -> SampleData:
    """Draw a sample from ``frame`` under ``design``.

    ``seed`` is an integer, a tuple of integers (stream keys) or a Generator.
    """
    if frame.responses is None:
        raise MissingResponseError("population frame has no responses")
    if frame.size != design.population_size:
        raise InvalidDesignError("frame size does not match the design")
    if isinstance(seed, np.random.Generator):
        rng = seed
    elif isinstance(seed, tuple):
        rng = rng_for(*seed)
    else:
        rng = rng_for(seed)
    idx = design.draw(rng)
    return SampleData(idx, frame.responses[idx], design)
