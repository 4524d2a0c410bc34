"""PBR preparations, the measurement circuit, and the search for its parameters.

The circuit is ``U = H^{(x)n} . R_xi . P_phi^{(x)n}``: a phase gate on every
qubit, a phase ``exp(i xi)`` on ``|0...0>`` only, then Hadamards, then a
computational-basis measurement.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import InfeasibleError
from .statevector import (
    StateVector,
    apply_gate_array,
    hadamard_all_array,
    phase_gate,
    tensor_product,
)

TWO_PI = 2.0 * math.pi
DEFAULT_TOL = 1e-9
ROW_SUM_TOL = 1e-10


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"theta must lie in (0, pi/2), got {theta}")


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"the PBR circuit needs n >= 2 qubits, got {n}")


@dataclass(frozen=True)
class Preparation:
    """Product preparation; bit 0 selects |psi_1>, bit 1 selects |psi_2>."""

    bits: tuple[int, ...]
    theta: float

    def __post_init__(self) -> None:
        bits = self.bits
        if isinstance(bits, str):
            bits = tuple(int(b) for b in bits)
        bits = tuple(int(b) for b in bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise ValueError(f"preparation must be a nonempty bit string, got {self.bits!r}")
        _check_theta(self.theta)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return int("".join(map(str, self.bits)), 2)

    @classmethod
    def from_index(cls, x: int, n: int, theta: float) -> Preparation:
        return cls(tuple((x >> (n - 1 - q)) & 1 for q in range(n)), theta)


@dataclass(frozen=True)
class CircuitParams:
    phi: float
    xi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "xi", float(self.xi) % TWO_PI)


@dataclass(frozen=True)
class ProbabilityMatrix:
    """Row ``x`` is the outcome distribution P(z|x) for preparation ``x``."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        p = np.array(self.entries, dtype=float)
        dim = p.shape[0] if p.ndim == 2 else 0
        if p.ndim != 2 or p.shape != (dim, dim) or dim < 2 or dim & (dim - 1):
            raise ValueError(f"expected a 2**n x 2**n matrix, got shape {p.shape}")
        if np.any(p < -ROW_SUM_TOL) or np.any(p > 1 + ROW_SUM_TOL):
            raise ValueError("entries must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("rows must sum to 1")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "entries", p)

    @property
    def n(self) -> int:
        return self.entries.shape[0].bit_length() - 1


@dataclass(frozen=True)
class ForbiddenMatching:
    """Permutation sending each preparation to its (near-)impossible outcome."""

    permutation: tuple[int, ...]
    achieved_max: float

    def __post_init__(self) -> None:
        perm = tuple(int(z) for z in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("matching is not a bijection")
        object.__setattr__(self, "permutation", perm)


def single_qubit_state(bit: int, theta: float) -> StateVector:
    half = theta / 2.0
    sign = -1.0 if bit else 1.0
    return StateVector(np.array([math.cos(half), sign * math.sin(half)], dtype=complex))


def prepare_state(prep: Preparation) -> StateVector:
    return reduce(tensor_product, (single_qubit_state(b, prep.theta) for b in prep.bits))


def prepared_amplitudes(n: int, theta: float) -> np.ndarray:
    """All ``2**n`` preparations stacked as rows, indexed by ``x``."""
    _check_n(n)
    _check_theta(theta)
    return np.stack(
        [prepare_state(Preparation.from_index(x, n, theta)).amplitudes for x in range(1 << n)]
    )


def _phase_layer(states: np.ndarray, n: int, phi: float) -> np.ndarray:
    gate = phase_gate(phi)
    for q in range(n):
        states = apply_gate_array(states, n, q, gate)
    return states


def output_amplitudes(states: np.ndarray, n: int, params: CircuitParams) -> np.ndarray:
    out = _phase_layer(states, n, params.phi)
    out = out.copy()
    out[..., 0] *= np.exp(1j * params.xi)
    return hadamard_all_array(out, n)


def probability_matrix(n: int, theta: float, params: CircuitParams) -> ProbabilityMatrix:
    amps = output_amplitudes(prepared_amplitudes(n, theta), n, params)
    return ProbabilityMatrix(np.abs(amps) ** 2)


def _perfect_matching(allowed: np.ndarray) -> np.ndarray | None:
    match = maximum_bipartite_matching(csr_matrix(allowed.astype(np.int8)), perm_type="column")
    if np.any(match < 0):
        return None
    return match


def bottleneck_matching(entries: np.ndarray) -> tuple[np.ndarray, float]:
    """Permutation minimizing the largest selected entry.

    Each row must be matched, so the best value is at least the largest row
    minimum (and likewise for columns); that bound is tried first and is exact
    for the circuit's matrices. Otherwise fall back to bisection over the
    sorted distinct entries.
    """
    entries = np.asarray(entries, dtype=float)
    lower = max(entries.min(axis=1).max(), entries.min(axis=0).max())
    # roundoff slack so entries equal in exact arithmetic are all admitted
    match = _perfect_matching(entries <= lower * (1 + 1e-9) + 1e-15)
    if match is None:
        values = np.unique(entries[entries > lower])
        lo, hi = 0, len(values) - 1
        match = _perfect_matching(entries <= values[hi])
        while lo < hi:
            mid = (lo + hi) // 2
            candidate = _perfect_matching(entries <= values[mid])
            if candidate is None:
                lo = mid + 1
            else:
                hi, match = mid, candidate
    achieved = float(entries[np.arange(len(match)), match].max())
    return match, achieved


def forbidden_matching(P: ProbabilityMatrix, tol: float = DEFAULT_TOL) -> ForbiddenMatching | None:
    """A bijection with every selected probability <= ``tol``, or ``None``."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    match, achieved = bottleneck_matching(P.entries)
    if achieved > tol:
        return None
    return ForbiddenMatching(tuple(match), achieved)


def default_grid(n: int) -> int:
    return 720 if n <= 4 else 180


def _coarse_scores(
    states: np.ndarray, n: int, phis: np.ndarray, xis: np.ndarray, xi_chunk: int
) -> np.ndarray:
    """Matching lower bound for every (phi, xi) pair, shape (len(phis), len(xis)).

    R_xi = I + (exp(i xi) - 1)|0><0|, so the output amplitudes are affine in
    exp(i xi) and each phi needs a single pass through the circuit.
    """
    e0 = np.zeros(1 << n, dtype=complex)
    e0[0] = 1.0
    h_col = hadamard_all_array(e0, n)
    kicks = np.exp(1j * xis) - 1.0
    scores = np.empty((len(phis), len(xis)))
    for i, phi in enumerate(phis):
        shifted = _phase_layer(states, n, phi)
        base = hadamard_all_array(shifted, n)
        rank1 = np.outer(shifted[:, 0], h_col)
        for start in range(0, len(xis), xi_chunk):
            k = kicks[start : start + xi_chunk, None, None]
            probs = np.abs(base[None] + k * rank1[None]) ** 2
            scores[i, start : start + xi_chunk] = np.maximum(
                probs.min(axis=2).max(axis=1), probs.min(axis=1).max(axis=1)
            )
    return scores


def _objective(states: np.ndarray, n: int, phi: float, xi: float) -> float:
    amps = output_amplitudes(states, n, CircuitParams(phi, xi))
    return bottleneck_matching(np.abs(amps) ** 2)[1]


def _compass_refine(
    states: np.ndarray,
    n: int,
    phi: float,
    xi: float,
    step: float,
    floor: float,
    min_step: float = 1e-13,
    max_evals: int = 20000,
) -> tuple[float, float, float]:
    """Coordinate pattern search; grows the step after a success, halves it after a miss."""
    best = _objective(states, n, phi, xi)
    point = [phi, xi]
    evals = 1
    while step > min_step and best > floor and evals < max_evals:
        improved = False
        for axis in (0, 1):
            for direction in (1.0, -1.0):
                trial = list(point)
                trial[axis] += direction * step
                value = _objective(states, n, *trial)
                evals += 1
                if value < best:
                    best, point, improved = value, trial, True
                    break
        step = step * 2.0 if improved else step / 2.0
    return point[0], point[1], best


def find_forbidden_parameters(
    n: int,
    theta: float,
    tol: float = DEFAULT_TOL,
    grid: int | None = None,
    candidates: int = 4,
    threads: int = 1,
) -> tuple[CircuitParams, ForbiddenMatching]:
    """Search (phi, xi) so that every preparation has its own forbidden outcome.

    Coarse scan of a ``grid x grid`` lattice on [0, 2pi)^2 followed by compass
    refinement of the best ``candidates`` lattice points, in score order,
    stopping at the first one that reaches ``tol``. The scan is split
    across ``threads`` workers by phi rows; results do not depend on the split.

    Raises InfeasibleError carrying the best residual when no parameters get
    every forbidden probability below ``tol``.
    """
    _check_n(n)
    _check_theta(theta)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    grid = grid or default_grid(n)
    states = prepared_amplitudes(n, theta)
    lattice = np.arange(grid) * (TWO_PI / grid)
    xi_chunk = max(1, (1 << 22) >> (2 * n))

    row_blocks = np.array_split(np.arange(grid), max(1, threads))
    row_blocks = [b for b in row_blocks if len(b)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda b: _coarse_scores(states, n, lattice[b], lattice, xi_chunk), row_blocks)
            )
    else:
        parts = [_coarse_scores(states, n, lattice[b], lattice, xi_chunk) for b in row_blocks]
    scores = np.concatenate(parts, axis=0).ravel()

    # stable sort: equal scores keep lexicographic (phi, xi) order
    order = np.argsort(scores, kind="stable")[:candidates]
    best: tuple[float, float, float] | None = None
    for flat in order:
        i, j = divmod(int(flat), grid)
        refined = _compass_refine(states, n, lattice[i], lattice[j], TWO_PI / grid, floor=tol * 1e-3)
        if best is None or refined[2] < best[2]:
            best = refined
        if best[2] <= tol:
            break
    assert best is not None
    params = CircuitParams(best[0], best[1])
    matrix = probability_matrix(n, theta, params)
    match, achieved = bottleneck_matching(matrix.entries)
    if achieved > tol:
        raise InfeasibleError(
            f"no circuit parameters forbid one outcome per preparation for n={n}, theta={theta}",
            residual=achieved,
            best=params,
        )
    return params, ForbiddenMatching(tuple(match), achieved)

