"""Exact finite-volume Gibbs computations for the disordered mean-field model.

Given a quenched disorder sequence ``eta`` of length ``n`` the finite-volume
Gibbs measure weights a spin configuration ``sigma`` by
``exp(-n F(L_n(sigma))) prod_i alpha[eta_i](sigma_i)``, where ``L_n`` is the
empirical spin distribution.  The weight depends on ``sigma`` only through
its per-type counts, so all laws here are computed exactly over count
vectors with log-domain multinomial coefficients instead of over ``|E|^n``
configurations.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import BudgetExceeded, ValidationError
from .model import as_probability_vector

DEFAULT_BUDGET = 10**7
DEFAULT_WORK_BUDGET = 10**9


@dataclass(frozen=True, eq=False)
class DisorderSample:
    """A frozen disorder sequence with its type counts and empirical law."""

    eta: np.ndarray
    counts: np.ndarray
    pi_hat: np.ndarray

    @property
    def n(self):
        return len(self.eta)

    @classmethod
    def from_sequence(cls, eta, n_types):
        eta = np.asarray(eta, dtype=int)
        if eta.ndim != 1 or len(eta) == 0:
            raise ValidationError("eta must be a non-empty sequence")
        if eta.min() < 0 or eta.max() >= n_types:
            raise ValidationError(f"eta entries must lie in [0, {n_types})")
        counts = np.bincount(eta, minlength=n_types)
        return cls(eta, counts, counts / len(eta))


def sample_disorder(pi, n, seed=None):
    """Draw ``n`` i.i.d. disorder symbols (as indices) from ``pi``."""
    pi = as_probability_vector(pi, name="pi")
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    rng = np.random.default_rng(seed)
    eta = rng.choice(len(pi), size=int(n), p=pi)
    return DisorderSample.from_sequence(eta, len(pi))


def compositions(total, parts):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]])
    rows = []
    # stars and bars over bar positions
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + bars + (total + parts - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(parts)])
    return np.array(rows, dtype=int)


def log_multinomial(counts, log_p):
    """``log( n! / prod c_a! * prod p_a^c_a )`` along the last axis."""
    counts = np.asarray(counts)
    n = counts.sum(axis=-1)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=-1) + (counts * log_p).sum(axis=-1)


def enumeration_size(type_counts, n_spins):
    return math.prod(math.comb(int(c) + n_spins - 1, n_spins - 1) for c in type_counts)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Exact law of the per-type count profile.

    ``counts[k, b, a]`` is the number of type-``b`` sites with spin ``a`` in
    atom ``k``; ``probabilities[k]`` its Gibbs probability.
    """

    counts: np.ndarray
    log_probabilities: np.ndarray
    type_counts: np.ndarray

    @property
    def probabilities(self):
        return np.exp(self.log_probabilities)

    @property
    def n(self):
        return int(self.type_counts.sum())

    @property
    def total_counts(self):
        return self.counts.sum(axis=1)

    @property
    def total_measures(self):
        return self.total_counts / self.n

    @property
    def profiles(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.counts / self.type_counts[None, :, None]

    def as_dict(self):
        return {tuple(map(tuple, c)): float(p) for c, p in zip(self.counts, self.probabilities)}


@dataclass(frozen=True, eq=False)
class TotalCountDistribution:
    """Exact law of the total spin counts ``N = sum_b counts[b]``."""

    total_counts: np.ndarray
    log_probabilities: np.ndarray
    n: int

    @property
    def probabilities(self):
        return np.exp(self.log_probabilities)

    @property
    def total_measures(self):
        return self.total_counts / self.n


def _check_sample(model, sample):
    if not isinstance(sample, DisorderSample):
        sample = DisorderSample.from_sequence(sample, model.n_types)
    if len(sample.counts) != model.n_types:
        raise ValidationError("disorder sample and model have different type alphabets")
    return sample


def _neg_n_energy(model, totals, n):
    return -n * np.asarray(model.F.value(totals / n), dtype=float)


def exact_empirical_distribution(model, sample, budget=DEFAULT_BUDGET):
    """Exact Gibbs law of the count profile for a fixed disorder sample.

    The unnormalised log weight of a profile ``c`` is
    ``-n F(N/n) + sum_b log Mult(c_b; n_b, alpha[b])`` with ``N`` the total
    counts; ``BudgetExceeded`` is raised when the number of profiles exceeds
    ``budget``.
    """
    sample = _check_sample(model, sample)
    n, q = sample.n, model.n_spins
    size = enumeration_size(sample.counts, q)
    if size > budget:
        raise BudgetExceeded(f"{size} count profiles exceed the budget {budget}",
                             size=size, budget=budget)
    per_type = [compositions(int(c), q) for c in sample.counts]
    per_type_logw = [log_multinomial(c, model.log_alpha[b]) for b, c in enumerate(per_type)]
    grids = np.meshgrid(*[np.arange(len(c)) for c in per_type], indexing="ij")
    idx = [g.ravel() for g in grids]
    counts = np.stack([per_type[b][idx[b]] for b in range(model.n_types)], axis=1)
    logw = sum(per_type_logw[b][idx[b]] for b in range(model.n_types))
    logw = logw + _neg_n_energy(model, counts.sum(axis=1), n)
    return EmpiricalDistribution(counts, logw - logsumexp(logw), sample.counts.copy())


def _log_product_law(model, type_counts, n_max):
    """Log law of total counts under the independent (F = 0) product measure.

    Returned on a dense grid indexed by the first ``|E|-1`` counts, each in
    ``0..n_max``; cells off the simplex are ``-inf``.
    """
    q = model.n_spins
    shape = (n_max + 1,) * (q - 1)
    acc = np.full(shape, -np.inf)
    acc[(0,) * (q - 1)] = 0.0
    for b, nb in enumerate(type_counts):
        nb = int(nb)
        if nb == 0:
            continue
        comps = compositions(nb, q)
        logw = log_multinomial(comps, model.log_alpha[b])
        out = np.full(shape, -np.inf)
        for c, lw in zip(comps[:, :-1], logw):
            dst = tuple(slice(int(k), None) for k in c)
            src = tuple(slice(0, n_max + 1 - int(k)) for k in c)
            np.logaddexp(out[dst], acc[src] + lw, out=out[dst])
        acc = out
    return acc


def _grid_totals(n_max, q, n_sites):
    heads = np.stack(np.meshgrid(*[np.arange(n_max + 1)] * (q - 1), indexing="ij"), axis=-1)
    heads = heads.reshape(-1, q - 1)
    last = n_sites - heads.sum(axis=1)
    return np.hstack([heads, last[:, None]])


def convolution_work(type_counts, n_spins):
    """Cell updates needed by the total-count convolution."""
    n = int(np.sum(type_counts))
    grid = (n + 1) ** (n_spins - 1)
    return grid * sum(math.comb(int(c) + n_spins - 1, n_spins - 1) for c in type_counts)


def exact_total_distribution(model, sample, budget=DEFAULT_WORK_BUDGET):
    """Exact Gibbs law of the total spin counts, by log-domain convolution over types.

    Polynomial in ``n`` (grid of size ``(n+1)^(|E|-1)``); this is all that
    ball masses need.  ``budget`` caps the number of cell updates.
    """
    sample = _check_sample(model, sample)
    n, q = sample.n, model.n_spins
    work = convolution_work(sample.counts, q)
    if work > budget:
        raise BudgetExceeded(f"total-count convolution needs {work} updates, budget {budget}",
                             size=work, budget=budget)
    logp0 = _log_product_law(model, sample.counts, n).ravel()
    totals = _grid_totals(n, q, n)
    keep = np.isfinite(logp0)
    totals, logp0 = totals[keep], logp0[keep]
    logw = logp0 + _neg_n_energy(model, totals, n)
    return TotalCountDistribution(totals, logw - logsumexp(logw), n)


def exact_k_marginal(model, sample, k):
    """Exact joint law of the first ``k`` spins; array of shape ``(|E|,) * k``.

    The remaining ``n - k`` sites are summed out through the law of their
    total counts, so the cost is ``|E|^k`` times a polynomial grid.
    """
    sample = _check_sample(model, sample)
    n, q = sample.n, model.n_spins
    if int(k) != k or not 1 <= k <= n:
        raise ValidationError(f"k must satisfy 1 <= k <= n, got {k!r}")
    k = int(k)
    rest = np.bincount(sample.eta[k:], minlength=model.n_types)
    m = n - k
    logp0 = _log_product_law(model, rest, m).ravel()
    totals = _grid_totals(m, q, m)
    keep = np.isfinite(logp0)
    totals, logp0 = totals[keep], logp0[keep]

    head_types = sample.eta[:k]
    out = np.empty((q,) * k)
    for sigma in itertools.product(range(q), repeat=k):
        fixed = np.bincount(sigma, minlength=q)
        site = sum(model.log_alpha[b, s] for b, s in zip(head_types, sigma))
        out[sigma] = site + logsumexp(logp0 + _neg_n_energy(model, totals + fixed, n))
    return np.exp(out - logsumexp(out))


def product_marginal(kernels, eta, k):
    """Law of the first ``k`` spins under ``prod_i kernels[eta_i]``."""
    law = np.ones(())
    for b in np.asarray(eta)[:k]:
        law = np.multiply.outer(law, np.asarray(kernels)[b])
    return law


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def marginal_distance(p, q, k=None):
    """Truncated metric ``sum_{i<=k} 2^-i TV(p_i, q_i)`` over prefix marginals.

    ``p`` and ``q`` are joint laws of shape ``(|E|,) * k``; ``p_i`` is the law
    of the first ``i`` coordinates.
    """
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError("laws must live on the same sites")
    k = p.ndim if k is None else int(k)
    if not 1 <= k <= p.ndim:
        raise ValidationError(f"k must lie in [1, {p.ndim}]")
    total = 0.0
    for i in range(1, k + 1):
        axes = tuple(range(i, p.ndim))
        total += 2.0 ** -i * total_variation(p.sum(axis=axes), q.sum(axis=axes))
    return total


@dataclass(frozen=True, eq=False)
class BallMass:
    masses: np.ndarray
    remainder: float


def _centers(minimizers):
    return np.array([np.asarray(getattr(m, "total_measure", m), dtype=float) for m in minimizers])


def min_center_distance(minimizers):
    C = _centers(minimizers)
    if len(C) < 2:
        return math.inf
    return min(total_variation(C[i], C[j]) for i in range(len(C)) for j in range(i + 1, len(C)))


def default_epsilon(minimizers):
    """One third of the smallest pairwise distance between centres (0.1 for one centre)."""
    d = min_center_distance(minimizers)
    return 0.1 if math.isinf(d) else d / 3.0


def ball_mass(distribution, minimizers, epsilon):
    """Mass of ``{d(total measure, pi . nu_j) <= epsilon}`` per minimizer, in total variation."""
    C = _centers(minimizers)
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    if epsilon >= 0.5 * min_center_distance(minimizers):
        raise ValidationError(f"epsilon={epsilon} makes the balls overlap")
    x = distribution.total_measures
    p = distribution.probabilities
    d = 0.5 * np.abs(x[:, None, :] - C[None, :, :]).sum(axis=-1)
    masses = np.array([p[d[:, j] <= epsilon].sum() for j in range(len(C))])
    return BallMass(masses, float(max(0.0, 1.0 - masses.sum())))


@dataclass(frozen=True, eq=False)
class DrawRecord:
    index: int
    seed: str
    pi_hat: np.ndarray
    masses: np.ndarray
    attribution: int  # -1 when unresolved


@dataclass(frozen=True, eq=False)
class EmpiricalWeightEstimate:
    frequencies: np.ndarray
    unresolved: float
    stderr: np.ndarray
    n: int
    n_samples: int
    epsilon: float
    records: list


def _one_draw(model, centers, n, epsilon, threshold, seed, index, budget):
    sample = sample_disorder(model.pi, n, seed=(seed, index))
    dist = exact_total_distribution(model, sample, budget)
    bm = ball_mass(dist, centers, epsilon)
    j = int(np.argmax(bm.masses))
    attribution = j if bm.masses[j] > threshold else -1
    return DrawRecord(index, f"{seed}:{index}", sample.pi_hat, bm.masses, attribution)


def empirical_weights(model, minimizers, n, n_samples, epsilon=None, dominance_threshold=0.5,
                      seed=0, workers=1, budget=DEFAULT_WORK_BUDGET):
    """Frequencies with which disorder draws put most Gibbs mass near each minimizer.

    Draw ``i`` uses the seed ``(seed, i)``; it is attributed to ``j`` when the
    ball around ``pi . nu_j`` carries more than ``dominance_threshold`` of the
    exact finite-volume mass, and counted as unresolved otherwise.
    """
    centers = _centers(minimizers)
    if epsilon is None:
        epsilon = default_epsilon(centers)
    if not 0 < dominance_threshold < 1:
        raise ValidationError("dominance_threshold must lie in (0, 1)")
    if dominance_threshold < 0.5:
        raise ValidationError("dominance_threshold below 1/2 can attribute a draw twice")
    args = [(model, centers, n, epsilon, dominance_threshold, seed, i, budget)
            for i in range(n_samples)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda a: _one_draw(*a), args))
    else:
        records = [_one_draw(*a) for a in args]
    att = np.array([r.attribution for r in records])
    counts = np.bincount(att[att >= 0], minlength=len(centers))
    freq = counts / n_samples
    unresolved = float(np.mean(att < 0))
    return EmpiricalWeightEstimate(
        freq, unresolved, np.sqrt(freq * (1.0 - freq) / n_samples), int(n), int(n_samples),
        float(epsilon), records,
    )


__all__ = [
    "BallMass",
    "DisorderSample",
    "DrawRecord",
    "EmpiricalDistribution",
    "EmpiricalWeightEstimate",
    "TotalCountDistribution",
    "ball_mass",
    "compositions",
    "default_epsilon",
    "empirical_weights",
    "exact_empirical_distribution",
    "exact_k_marginal",
    "exact_total_distribution",
    "marginal_distance",
    "product_marginal",
    "sample_disorder",
    "total_variation",
]
