"""Stability vectors, visibility, and metastate weights as Gaussian cone probabilities.

For each global minimizer ``j`` the stability vector ``B_j`` lives in the
tangent space of the disorder simplex (entries sum to zero).  Minimizer ``j``
is visible iff ``B_j`` is an extreme point of the convex hull of all stability
vectors, and its weight is the probability that a centred Gaussian ``G`` with
covariance ``diag(pi) - pi pi^T`` has ``<G, B_j>`` strictly largest.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import MetastateError, NonDegeneracy2Violation, TieFractionExceeded, ValidationError
from .free_energy import SolverOptions, solve, total_measure
from .model import as_probability_vector, gamma_kernels, log_partition, relative_entropy_rows

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
TIE_MARGIN = 1e-14
MAX_TIE_FRACTION = 1e-3


def _center(v):
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def stability_vector_direct(model, minimizer):
    """``B[b] = -(<dF_nu, profile[b]> + S(profile[b] | alpha[b]))``, centred over ``b``.

    ``minimizer`` may be a ``Minimizer`` or a bare profile array; ``nu`` is the
    total measure ``pi . profile``.
    """
    profile = np.asarray(getattr(minimizer, "profile", minimizer), dtype=float)
    nu = total_measure(model.pi, profile)
    grad = model.F.gradient(nu)
    raw = -(profile @ grad + relative_entropy_rows(profile, model.alpha))
    return _center(raw)


def stability_vector_partition(model, nu):
    """Centred log little-partition-functions ``log sum_a exp(-dF_nu(a)) alpha[b](a)``."""
    nu = as_probability_vector(nu, name="nu")
    return _center(log_partition(model, nu))


def free_energy_identity(model, nu):
    """``F(nu) - <dF_nu, nu> - <B_nu, pi> - C`` with ``C`` the mean log partition.

    At every total measure ``nu`` of a stationary profile this equals
    ``phi[pi](Gamma(nu))``.
    """
    nu = as_probability_vector(nu, name="nu")
    logz = log_partition(model, nu)
    C = logz.mean()
    B = logz - C
    grad = model.F.gradient(nu)
    return float(model.F.value(nu) - grad @ nu - B @ model.pi - C)


@dataclass(frozen=True)
class NonDegeneracy2Diagnostics:
    min_distance: float
    closest_pair: tuple
    pair_tolerance: float

    @property
    def passed(self):
        return self.min_distance > self.pair_tolerance


def check_nondegeneracy2(stability_vectors, pair_tolerance=1e-8, raise_on_failure=True):
    """All pairwise sup-distances between stability vectors must exceed ``pair_tolerance``."""
    B = np.atleast_2d(np.asarray(stability_vectors, dtype=float))
    if B.shape[0] < 1:
        raise ValidationError("need at least one stability vector")
    best, pair = math.inf, ()
    for i in range(len(B)):
        for j in range(i + 1, len(B)):
            d = float(np.max(np.abs(B[i] - B[j])))
            if d < best:
                best, pair = d, (i, j)
    diag = NonDegeneracy2Diagnostics(best, pair, pair_tolerance)
    if raise_on_failure and not diag.passed:
        raise NonDegeneracy2Violation(
            f"stability vectors {pair[0]} and {pair[1]} coincide (distance {best:.3e})",
            pair=pair,
            distance=best,
        )
    return diag


@dataclass(frozen=True, eq=False)
class VisibilityEntry:
    """LP outcome for one stability vector, with a re-checkable certificate."""

    visible: bool
    margin: float
    witness: np.ndarray
    combination: np.ndarray = None

    def verify(self, stability_vectors, index, lp_tolerance=1e-9):
        B = np.asarray(stability_vectors, dtype=float)
        others = [i for i in range(len(B)) if i != index]
        if self.visible:
            if not others:
                return True
            scores = B @ self.witness
            gap = scores[index] - scores[others].max()
            return bool(gap >= self.margin - 1e-12 and gap > lp_tolerance)
        lam = self.combination
        return bool(
            np.all(lam >= -1e-12)
            and abs(lam.sum() - 1.0) <= 1e-9
            and lam[index] == 0.0
            and np.max(np.abs(lam @ B - B[index])) <= lp_tolerance
        )


@dataclass(frozen=True, eq=False)
class VisibilityReport:
    entries: list
    min_pair_distance: float

    @property
    def visible(self):
        return np.array([e.visible for e in self.entries])


def _combination_from_lp(B, index, duals):
    lam = np.zeros(len(B))
    others = [i for i in range(len(B)) if i != index]
    w = np.clip(np.asarray(duals, dtype=float), 0.0, None)
    if w.sum() > 0:
        lam[others] = w / w.sum()
    return lam


def _combination_direct(B, index):
    # min ||sum_i lam_i B_i - B_j||_1 over the simplex, as an LP with slacks
    others = [i for i in range(len(B)) if i != index]
    k, d = len(others), B.shape[1]
    A = B[others].T
    c = np.concatenate([np.zeros(k), np.ones(d)])
    A_ub = np.block([[A, -np.eye(d)], [-A, -np.eye(d)]])
    b_ub = np.concatenate([B[index], -B[index]])
    A_eq = np.concatenate([np.ones(k), np.zeros(d)])[None, :]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (k + d), method="highs")
    if res.status != 0:
        raise MetastateError(f"convex-combination LP failed: {res.message}")
    lam = np.zeros(len(B))
    lam[others] = np.clip(res.x[:k], 0.0, None)
    return lam / lam.sum()


def visibility(stability_vectors, lp_tolerance=1e-9):
    """Classify each stability vector as extreme (visible) or not via a small LP.

    For each ``j`` maximise ``t`` subject to ``<x, B_j - B_i> >= t`` for all
    ``i != j`` and ``|x|_inf <= 1``.  A positive optimum yields a witness
    direction ``x`` inside the stability region; otherwise the LP duals give
    convex weights reproducing ``B_j`` from the others.
    """
    B = np.atleast_2d(np.asarray(stability_vectors, dtype=float))
    k, d = B.shape
    diag = check_nondegeneracy2(B, raise_on_failure=False) if k > 1 else None
    entries = []
    for j in range(k):
        if k == 1:
            entries.append(VisibilityEntry(True, math.inf, np.zeros(d)))
            continue
        others = [i for i in range(k) if i != j]
        D = B[j] - B[others]
        # variables (x, t); minimise -t;  t - <x, D_i> <= 0
        c = np.zeros(d + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-D, np.ones((len(others), 1))])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(others)),
                      bounds=[(-1.0, 1.0)] * d + [(None, None)], method="highs")
        if res.status != 0:
            raise MetastateError(f"visibility LP failed for vector {j}: {res.message}")
        t = float(-res.fun)
        x = np.asarray(res.x[:d])
        if t > lp_tolerance:
            scores = B @ x
            margin = float(scores[j] - scores[others].max())
            entries.append(VisibilityEntry(True, margin, x))
            continue
        lam = _combination_from_lp(B, j, -res.ineqlin.marginals)
        entry = VisibilityEntry(False, t, x, lam)
        if not entry.verify(B, j, lp_tolerance):
            entry = VisibilityEntry(False, t, x, _combination_direct(B, j))
        entries.append(entry)
    return VisibilityReport(entries, diag.min_distance if diag else math.inf)


class GaussianSampler:
    """Centred Gaussian on the tangent space with covariance ``diag(pi) - pi pi^T``.

    Samples are ``D^(1/2) Y - pi (s . Y)`` with ``Y`` standard normal and
    ``s = sqrt(pi)``; each sample sums to zero up to rounding.
    """

    def __init__(self, pi, seed=None):
        pi = as_probability_vector(pi, name="pi")
        if np.any(pi <= 0):
            raise ValidationError("pi must be strictly positive")
        self.pi = pi
        self.sqrt_pi = np.sqrt(pi)
        self.rng = np.random.default_rng(seed)

    def sample(self, size):
        Y = self.rng.standard_normal((size, len(self.pi)))
        return Y * self.sqrt_pi - np.outer(Y @ self.sqrt_pi, self.pi)

    def __iter__(self):
        while True:
            yield from self.sample(4096)


def gaussian_sampler(pi, seed=None):
    return GaussianSampler(pi, seed)


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    counts: np.ndarray
    n_samples: int
    n_ties: int
    stderr: np.ndarray

    @property
    def n_accepted(self):
        return int(self.counts.sum())


def _classify_block(B, pi, seed, size):
    G = GaussianSampler(pi, seed).sample(size)
    scores = G @ B.T
    if B.shape[0] == 1:
        return np.array([size]), 0
    top2 = np.partition(scores, -2, axis=1)[:, -2:]
    tie = (top2[:, 1] - top2[:, 0]) < TIE_MARGIN
    winners = np.argmax(scores[~tie], axis=1)
    return np.bincount(winners, minlength=B.shape[0]), int(tie.sum())


def classify(stability_vectors, samples):
    """Index of the stability vector with the largest projection, per sample."""
    B = np.asarray(stability_vectors, dtype=float)
    return np.argmax(np.asarray(samples) @ B.T, axis=1)


def weights_mc(stability_vectors, pi, samples=1_000_000, seed=0, block_size=1 << 16, workers=1):
    """Monte Carlo estimate of ``w_j = P(<G, B_j> > max_{k != j} <G, B_k>)``.

    Blocks carry seeds spawned from ``seed`` so the counts do not depend on
    ``workers``.  Samples whose top two projections are within ``1e-14`` are
    discarded and counted as ties.
    """
    B = np.atleast_2d(np.asarray(stability_vectors, dtype=float))
    pi = as_probability_vector(pi, name="pi")
    if B.shape[1] != len(pi):
        raise ValidationError("stability vectors and pi live on different alphabets")
    if samples < 10_000:
        raise ValidationError("weights_mc needs at least 10^4 samples")
    if B.shape[0] > 1:
        check_nondegeneracy2(B)
    sizes = [block_size] * (samples // block_size)
    if samples % block_size:
        sizes.append(samples % block_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _classify_block(B, pi, *a), zip(seeds, sizes)))
    else:
        parts = [_classify_block(B, pi, s, n) for s, n in zip(seeds, sizes)]
    counts = np.sum([p[0] for p in parts], axis=0)
    ties = sum(p[1] for p in parts)
    if ties > MAX_TIE_FRACTION * samples:
        raise TieFractionExceeded(
            f"{ties} of {samples} samples are ties; stability vectors are nearly degenerate",
            distance=check_nondegeneracy2(B, raise_on_failure=False).min_distance,
        )
    accepted = int(counts.sum())
    w = counts / accepted
    return WeightVector(w, counts, samples, ties, np.sqrt(w * (1.0 - w) / accepted))


def weights_two_types(stability_vectors):
    """Exact weights when the disorder alphabet has two symbols.

    Projections are ``2 g B_j[0]`` for a one-dimensional Gaussian ``g``, so the
    largest and the smallest first coordinate each win with probability 1/2.
    """
    B = np.atleast_2d(np.asarray(stability_vectors, dtype=float))
    if B.shape[1] != 2:
        raise ValidationError("closed form applies only to two disorder symbols")
    w = np.zeros(len(B))
    if len(B) == 1:
        w[0] = 1.0
        return w
    w[np.argmax(B[:, 0])] += 0.5
    w[np.argmin(B[:, 0])] += 0.5
    return w


@dataclass(eq=False)
class MetastateReport:
    """Global minimizers with stability vectors, visibility, weights and kernels.

    ``kernels[j]`` has shape ``(|E'|, |E|)``: row ``b`` is ``gamma[b](.|pi . nu_j)``,
    the single-site factor of the product state ``mu_j`` at a type-``b`` site.
    """

    model: object
    minimizers: list
    stability_vectors: np.ndarray
    visibility: VisibilityReport
    weights: WeightVector
    kernels: np.ndarray
    nondegeneracy2: NonDegeneracy2Diagnostics
    formula_gap: float
    exact_weights: np.ndarray = None
    near_ties: list = field(default_factory=list)
    n_local_minimizers: int = 0

    def to_dict(self):
        model = self.model
        states = []
        for j, m in enumerate(self.minimizers):
            vis = self.visibility.entries[j]
            cert = {"margin": _num(vis.margin), "witness": _arr(vis.witness)}
            if not vis.visible:
                cert["combination"] = _arr(vis.combination)
            states.append({
                "index": j,
                "total_measure": _arr(m.total_measure),
                "profile": _arr(m.profile),
                "phi": _num(m.phi_value),
                "hessian_eigenvalues": _arr(m.hessian_eigenvalues),
                "fixed_point_residual": _num(m.fixed_point_residual),
                "stability_vector": _arr(self.stability_vectors[j]),
                "visible": bool(vis.visible),
                "certificate": cert,
                "weight": _num(self.weights.weights[j]),
                "weight_stderr": _num(self.weights.stderr[j]),
                "count": int(self.weights.counts[j]),
                "kernels": _arr(self.kernels[j]),
            })
        out = {
            "schema_version": SCHEMA_VERSION,
            "model": {
                "interaction": model.F.name,
                "spin_alphabet": [str(s) for s in model.spin_alphabet],
                "disorder_alphabet": [str(b) for b in model.disorder_alphabet],
                "alpha": _arr(model.alpha),
                "pi": _arr(model.pi),
            },
            "states": states,
            "monte_carlo": {
                "samples": self.weights.n_samples,
                "accepted": self.weights.n_accepted,
                "ties": self.weights.n_ties,
            },
            "diagnostics": {
                "nondegeneracy2_min_distance": _num(self.nondegeneracy2.min_distance),
                "nondegeneracy2_pair": list(self.nondegeneracy2.closest_pair),
                "stability_formula_gap": _num(self.formula_gap),
                "local_minimizers": self.n_local_minimizers,
                "near_ties": self.near_ties,
                "enumeration": "heuristic multi-start; completeness not certified",
            },
        }
        if self.exact_weights is not None:
            out["exact_weights"] = _arr(self.exact_weights)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self):
        lines = [
            f"interaction: {self.model.F.name}",
            f"disorder law pi: {_fmt(self.model.pi)}",
            f"global minimizers: {len(self.minimizers)}",
            "",
        ]
        for j, m in enumerate(self.minimizers):
            w, se = self.weights.weights[j], self.weights.stderr[j]
            tag = "visible" if self.visibility.entries[j].visible else "invisible"
            lines.append(f"state {j}: nu={_fmt(m.total_measure)} phi={m.phi_value:.12g}")
            lines.append(f"  B={_fmt(self.stability_vectors[j])} {tag}")
            lines.append(f"  weight={w:.6f} +/- {se:.6f}")
        lines.append("")
        lines.append(f"min pairwise |B_i - B_j|: {self.nondegeneracy2.min_distance:.3e}")
        lines.append(f"Monte Carlo samples: {self.weights.n_samples} (ties: {self.weights.n_ties})")
        if self.near_ties:
            lines.append(f"near-tie local minimizers: {self.near_ties}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    return "(" + ", ".join(f"{x:.6g}" for x in np.ravel(v)) + ")"


def _num(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def build_metastate_report(model, minimizers, samples=1_000_000, seed=0, lp_tolerance=1e-9,
                           pair_tolerance=1e-8, workers=1, near_tie_gap=1e-4):
    """Assemble the metastate over the global minimizers in ``minimizers``.

    Non-global entries are only used to flag near ties.  Raises
    ``NonDegeneracy2Violation`` when two stability vectors coincide.
    """
    minimizers = list(minimizers)
    states = [m for m in minimizers if getattr(m, "is_global", True)]
    if not states:
        raise ValidationError("no global minimizers given")
    lowest = min(m.phi_value for m in states)
    near = [_arr(m.total_measure) for m in minimizers
            if not getattr(m, "is_global", True) and m.phi_value - lowest <= near_tie_gap]
    if near:
        logger.warning("%d local minimizers lie within %g of the global free energy",
                       len(near), near_tie_gap)

    B = np.array([stability_vector_direct(model, m) for m in states])
    B_hat = np.array([stability_vector_partition(model, m.total_measure) for m in states])
    gap = float(np.max(np.abs(B - B_hat)))
    if len(states) > 1:
        diag = check_nondegeneracy2(B, pair_tolerance)
    else:
        diag = NonDegeneracy2Diagnostics(math.inf, (), pair_tolerance)
    vis = visibility(B, lp_tolerance)
    weights = weights_mc(B, model.pi, samples=samples, seed=seed, workers=workers)
    kernels = np.array([gamma_kernels(model, m.total_measure) for m in states])
    exact = weights_two_types(B) if model.n_types == 2 else None
    return MetastateReport(model, states, B, vis, weights, kernels, diag, gap, exact, near,
                           n_local_minimizers=len(minimizers))


def metastate(model, solver_options=None, **kwargs):
    """Solve for ``M*`` and build its report in one call."""
    result = solve(model, solver_options or SolverOptions())
    return build_metastate_report(model, result.minimizers, **kwargs)


__all__ = [
    "GaussianSampler",
    "MetastateReport",
    "NonDegeneracy2Diagnostics",
    "VisibilityEntry",
    "VisibilityReport",
    "WeightVector",
    "build_metastate_report",
    "check_nondegeneracy2",
    "classify",
    "free_energy_identity",
    "gaussian_sampler",
    "metastate",
    "stability_vector_direct",
    "stability_vector_partition",
    "visibility",
    "weights_mc",
    "weights_two_types",
]
