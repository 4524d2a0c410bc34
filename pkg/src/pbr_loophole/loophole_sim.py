"""Monte Carlo of an adversarial detector model exploiting post-selection.

Click patterns are integers over n bits, detector ``q`` at bit ``n-1-q``
(same MSB convention as the statevector), so the all-click pattern is
``2**n - 1``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError
from .overlap_models import EpistemicModel, overlap_p
from .pbr_circuit import DEFAULT_TOL, CircuitParams, ForbiddenMatching, probability_matrix

FEASIBILITY_GUARD = 1e-12
CHUNK_RUNS = 1 << 16


def pattern_law(n: int, eta: float) -> np.ndarray:
    """Product-Bernoulli law of click patterns for independent detectors."""
    clicks = np.array([bin(c).count("1") for c in range(1 << n)])
    return eta**clicks * (1.0 - eta) ** (n - clicks)


@dataclass(frozen=True)
class AdversaryCoupling:
    """Click-pattern laws conditioned on whether the run landed in the all-overlap region.

    ``q_overlap`` never produces the all-click pattern, and the mixture
    ``p**n * q_overlap + (1 - p**n) * q_other`` equals the product law.
    """

    n: int
    eta: float
    p: float
    q_overlap: np.ndarray = field(repr=False)
    q_other: np.ndarray = field(repr=False)

    @property
    def overlap_prob(self) -> float:
        return self.p**self.n

    def mixture(self) -> np.ndarray:
        w = self.overlap_prob
        return w * self.q_overlap + (1.0 - w) * self.q_other


def build_adversary(n: int, p: float, eta: float) -> AdversaryCoupling:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not (0.0 <= p <= 1.0 and 0.0 <= eta <= 1.0):
        raise ValueError("p and eta must lie in [0, 1]")
    w = p**n
    law = pattern_law(n, eta)
    all_click = (1 << n) - 1
    hidden = law.copy()
    hidden[all_click] = 0.0
    # 1 - eta**n summed term by term; the direct form cancels badly as eta -> 1
    budget = float(hidden.sum())
    margin = w - budget
    if margin > FEASIBILITY_GUARD:
        raise InfeasibleError(
            f"overlap probability {w:.6g} exceeds no-click budget {budget:.6g}", residual=margin
        )
    if budget > 0:
        q_overlap = hidden / budget
    else:
        # eta == 1 forces w == 0, so q_overlap carries no weight; any no-click law will do
        q_overlap = np.full(1 << n, 1.0 / all_click)
        q_overlap[all_click] = 0.0
    if w < 1.0:
        q_other = np.clip((law - w * q_overlap) / (1.0 - w), 0.0, None)
        q_other /= q_other.sum()
    else:
        q_other = law.copy()
    return AdversaryCoupling(n=n, eta=eta, p=p, q_overlap=q_overlap, q_other=q_other)


@dataclass
class ExperimentStats:
    n: int
    total_runs: int = 0
    click_counts: np.ndarray | None = None
    all_click_count: int = 0
    histogram: np.ndarray | None = None
    forbidden_count: int = 0

    def __post_init__(self) -> None:
        dim = 1 << self.n
        if self.click_counts is None:
            self.click_counts = np.zeros(self.n, dtype=np.int64)
        if self.histogram is None:
            self.histogram = np.zeros((dim, dim), dtype=np.int64)

    def merge(self, other: ExperimentStats) -> ExperimentStats:
        return ExperimentStats(
            n=self.n,
            total_runs=self.total_runs + other.total_runs,
            click_counts=self.click_counts + other.click_counts,
            all_click_count=self.all_click_count + other.all_click_count,
            histogram=self.histogram + other.histogram,
            forbidden_count=self.forbidden_count + other.forbidden_count,
        )

    @property
    def click_rates(self) -> np.ndarray:
        if self.total_runs == 0:
            return np.zeros(self.n)
        return self.click_counts / self.total_runs

    @property
    def all_click_rate(self) -> float:
        return self.all_click_count / self.total_runs if self.total_runs else 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExperimentStats):
            return NotImplemented
        return (
            self.n == other.n
            and self.total_runs == other.total_runs
            and self.all_click_count == other.all_click_count
            and self.forbidden_count == other.forbidden_count
            and np.array_equal(self.click_counts, other.click_counts)
            and np.array_equal(self.histogram, other.histogram)
        )


def cleaned_rows(entries: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Zero every probability at or below ``tol`` and renormalize rows."""
    rows = np.where(entries <= tol, 0.0, entries)
    return rows / rows.sum(axis=1, keepdims=True)


def _cdf(probs: np.ndarray) -> np.ndarray:
    # dividing by the last entry makes it exactly 1, so zero-probability
    # categories (forbidden outcomes included) can never be drawn
    cdf = np.cumsum(probs, axis=-1)
    return cdf / cdf[..., -1:]


def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Categorical draws by inverse CDF; ``cdf`` broadcasts against ``u[:, None]``."""
    return (u[:, None] >= cdf).sum(axis=1)


def _simulate_chunk(
    runs: int,
    rng: np.random.Generator,
    n: int,
    p: float,
    coupling: AdversaryCoupling,
    rows_cdf: np.ndarray,
    forbidden: np.ndarray,
) -> ExperimentStats:
    dim = 1 << n
    all_click = dim - 1
    x = rng.integers(0, dim, size=runs)
    in_overlap = (rng.random((runs, n)) < p).all(axis=1)
    u_pattern = rng.random(runs)
    pattern = np.where(
        in_overlap,
        _draw(_cdf(coupling.q_overlap)[None], u_pattern),
        _draw(_cdf(coupling.q_other)[None], u_pattern),
    )
    # full outcome drawn every run; bits of silent detectors are simply never recorded
    z = _draw(rows_cdf[x], rng.random(runs))

    shifts = n - 1 - np.arange(n)
    clicks = (pattern[:, None] >> shifts) & 1
    kept = pattern == all_click
    histogram = np.zeros((dim, dim), dtype=np.int64)
    np.add.at(histogram, (x[kept], z[kept]), 1)
    return ExperimentStats(
        n=n,
        total_runs=runs,
        click_counts=clicks.sum(axis=0).astype(np.int64),
        all_click_count=int(kept.sum()),
        histogram=histogram,
        forbidden_count=int((z[kept] == forbidden[x[kept]]).sum()),
    )


def run_experiment(
    n: int,
    theta: float,
    model: EpistemicModel,
    eta: float,
    params: CircuitParams,
    matching: ForbiddenMatching,
    runs: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
    chunk_runs: int = CHUNK_RUNS,
) -> ExperimentStats:
    """Simulate ``runs`` uniformly chosen preparations through the lossy detectors.

    Chunk ``k`` draws from a generator seeded with ``(seed, k)``; chunk
    boundaries depend only on ``runs`` and ``chunk_runs``, so the result is
    the same for any ``threads``.
    """
    if runs < 0:
        raise ValueError(f"runs must be nonnegative, got {runs}")
    p = overlap_p(model, theta)
    coupling = build_adversary(n, p, eta)
    matrix = probability_matrix(n, theta, params)
    if len(matching.permutation) != 1 << n:
        raise ValueError("matching size does not match the circuit")
    rows_cdf = _cdf(cleaned_rows(matrix.entries, tol))
    forbidden = np.asarray(matching.permutation)

    sizes = [min(chunk_runs, runs - start) for start in range(0, runs, chunk_runs)]

    def work(k: int) -> ExperimentStats:
        rng = np.random.default_rng([seed, k])
        return _simulate_chunk(sizes[k], rng, n, p, coupling, rows_cdf, forbidden)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]
    total = ExperimentStats(n=n)
    for part in parts:
        total = total.merge(part)
    return total


def binomial_sigma(rate: float, runs: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / runs)
