"""Free energy of a profile, the mean-field map and the multi-start minimizer search.

A profile is an array of shape ``(|E'|, |E|)`` whose row ``b`` is the spin
distribution on sites of disorder type ``b``.  Reduced coordinates drop the
last spin entry of every row, giving ``(|E|-1) * |E'|`` free variables.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonDegeneracy1Violation, SolverDidNotConverge, ValidationError
from .model import SIMPLEX_ATOL, as_probability_vector, gamma_kernels, relative_entropy_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of ``find_minimizers``; defaults follow the documented solver design."""

    random_starts: int = 64
    damping: float = 0.5
    max_iterations: int = 10_000
    newton_steps: int = 50
    residual_tolerance: float = 1e-10
    switch_tolerance: float = 1e-9
    dedup_tolerance: float = 1e-6
    global_gap_tolerance: float = 1e-8
    eigenvalue_threshold: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.random_starts < 0:
            raise ValidationError("random_starts must be >= 0")
        if not 0 < self.damping <= 1:
            raise ValidationError("damping must lie in (0, 1]")
        if self.max_iterations < 0 or self.newton_steps < 0:
            raise ValidationError("iteration budgets must be >= 0")
        for name in ("residual_tolerance", "switch_tolerance", "dedup_tolerance",
                     "global_gap_tolerance", "eigenvalue_threshold"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class Minimizer:
    """A converged stationary point of the free energy with a non-negative spectrum."""

    profile: np.ndarray
    total_measure: np.ndarray
    phi_value: float
    hessian_eigenvalues: np.ndarray
    fixed_point_residual: float
    is_global: bool = False

    @property
    def hessian_min_eigenvalue(self):
        return float(self.hessian_eigenvalues[0])


@dataclass(eq=False)
class SolverResult:
    """Everything ``solve`` found: local minima, saddles and failed starts."""

    minimizers: list
    saddles: list = field(default_factory=list)
    n_starts: int = 0
    n_failed: int = 0

    @property
    def global_minimizers(self):
        return [m for m in self.minimizers if m.is_global]


def check_profile(model, profile, name="profile"):
    arr = np.array(profile, dtype=float)
    if arr.shape != (model.n_types, model.n_spins):
        raise ValidationError(
            f"{name} must have shape {(model.n_types, model.n_spins)}, got {arr.shape}"
        )
    rows = [as_probability_vector(row, name=f"{name}[{b}]") for b, row in enumerate(arr)]
    return np.vstack(rows)


def _pi_hat(model, pi_hat):
    if pi_hat is None:
        return np.asarray(model.pi)
    pi_hat = as_probability_vector(pi_hat, name="pi_hat")
    if pi_hat.shape != (model.n_types,):
        raise ValidationError(f"pi_hat must have {model.n_types} entries")
    return pi_hat


def total_measure(pi, profile):
    """``pi . profile``: the spin distribution averaged over disorder types."""
    return np.einsum("b,...ba->...a", pi, profile)


def _phi_batch(model, pi_hat, profiles):
    nu = total_measure(pi_hat, profiles)
    entropy = relative_entropy_rows(profiles, model.alpha)
    return model.F.value(nu) + entropy @ pi_hat


def phi(model, pi_hat, profile):
    """Free energy ``F(pi_hat . profile) + sum_b pi_hat(b) S(profile[b] | alpha[b])``.

    Rows of ``profile`` with ``pi_hat(b) = 0`` contribute nothing.
    """
    pi_hat = _pi_hat(model, pi_hat)
    profile = check_profile(model, profile)
    return float(_phi_batch(model, pi_hat, profile))


def _full_gradient(model, pi, profile):
    nu = total_measure(pi, profile)
    grad_f = model.F.gradient(nu)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(profile) - model.log_alpha
    return pi[:, None] * (grad_f[None, :] + log_ratio + 1.0)


def to_reduced(profile):
    return np.asarray(profile)[..., :-1].reshape(np.shape(profile)[:-2] + (-1,))


def from_reduced(x, n_types, n_spins):
    head = np.asarray(x, dtype=float).reshape(n_types, n_spins - 1)
    return np.hstack([head, 1.0 - head.sum(axis=1, keepdims=True)])


def phi_gradient(model, pi_hat, profile, reduced=True):
    """Gradient of ``phi``; in drop-last coordinates per block when ``reduced``."""
    pi_hat = _pi_hat(model, pi_hat)
    profile = check_profile(model, profile)
    g = _full_gradient(model, pi_hat, profile)
    if not reduced:
        return g
    return (g[:, :-1] - g[:, -1:]).ravel()


def _reduced_hessian(model, pi, profile):
    n_types, n_spins = profile.shape
    nu = total_measure(pi, profile)
    hess_f = model.F.hessian(nu)
    full = np.einsum("b,c,ae->bace", pi, pi, hess_f)
    for b in range(n_types):
        full[b, :, b, :] += pi[b] * np.diag(1.0 / profile[b])
    # nu_b = P x_b + e_last with P = [I; -1]
    P = np.vstack([np.eye(n_spins - 1), -np.ones((1, n_spins - 1))])
    red = np.einsum("ai,bace,ej->bicj", P, full, P)
    dim = n_types * (n_spins - 1)
    red = red.reshape(dim, dim)
    return 0.5 * (red + red.T)


def phi_hessian(model, pi_hat, profile):
    """Hessian of ``phi`` in reduced coordinates; requires a strictly interior profile."""
    pi_hat = _pi_hat(model, pi_hat)
    profile = check_profile(model, profile)
    if np.any(profile <= 0):
        raise ValidationError("the Hessian needs a strictly interior profile")
    return _reduced_hessian(model, pi_hat, profile)


def mean_field_map(model, nu):
    """The profile ``(gamma[b](.|nu))_b`` induced by a total spin distribution ``nu``."""
    nu = as_probability_vector(nu, name="nu")
    if nu.shape != (model.n_spins,):
        raise ValidationError(f"nu must have {model.n_spins} entries")
    return gamma_kernels(model, nu)


def total_mean_field_residual(model, nu):
    """Sup-norm of ``nu - sum_b pi(b) gamma[b](.|nu)``."""
    profile = mean_field_map(model, nu)
    return float(np.max(np.abs(nu - total_measure(model.pi, profile))))


def fixed_point_residual(model, profile):
    """Sup-norm of ``profile - Gamma(pi . profile)``."""
    profile = np.asarray(profile, dtype=float)
    return float(np.max(np.abs(profile - gamma_kernels(model, total_measure(model.pi, profile)))))


def _starts(model, opts):
    n_types, n_spins = model.n_types, model.n_spins
    uniform = np.full(n_spins, 1.0 / n_spins)
    starts = [np.array(model.alpha)]
    for a in range(n_spins):
        for w in (0.9, 0.5):
            row = w * np.eye(n_spins)[a] + (1.0 - w) * uniform
            starts.append(np.tile(row, (n_types, 1)))
    if opts.random_starts:
        rng = np.random.default_rng(opts.seed)
        starts.extend(rng.dirichlet(np.ones(n_spins), size=(opts.random_starts, n_types)))
    return np.stack(starts)


def _fixed_point_sweep(model, starts, opts):
    pi = model.pi
    P = starts.copy()
    lam = opts.damping
    for _ in range(opts.max_iterations):
        G = gamma_kernels(model, total_measure(pi, P))
        res = np.max(np.abs(P - G), axis=(1, 2))
        if np.all(res < opts.switch_tolerance):
            break
        P = (1.0 - lam) * P + lam * G
    return P


def _newton_polish(model, profile, opts):
    pi = model.pi
    n_types, n_spins = profile.shape
    best = profile
    best_res = fixed_point_residual(model, profile)
    x = to_reduced(profile)
    for _ in range(opts.newton_steps):
        current = from_reduced(x, n_types, n_spins)
        g = _full_gradient(model, pi, current)
        g = (g[:, :-1] - g[:, -1:]).ravel()
        H = _reduced_hessian(model, pi, current)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -g, rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            trial = from_reduced(x + t * step, n_types, n_spins)
            if np.all(trial > 0):
                break
            t *= 0.5
        else:
            break
        x = x + t * step
        trial = from_reduced(x, n_types, n_spins)
        res = fixed_point_residual(model, trial)
        if res < best_res:
            best, best_res = trial, res
        if res < 1e-14 or np.max(np.abs(t * step)) < 1e-16:
            break
    return best, best_res


def _sort_key(item):
    return (round(item.phi_value, 9),) + tuple(item.total_measure)


def solve(model, opts=None):
    """Multi-start search for stationary points of ``phi[pi]``.

    Damped fixed-point sweeps ``profile <- (1-l) profile + l Gamma(pi . profile)``
    run on all starts at once, then each end point is Newton-polished in
    reduced coordinates.  Converged points are deduplicated, split into
    local minima and saddles by the reduced Hessian spectrum, and the minima
    within ``global_gap_tolerance`` of the lowest free energy are flagged as
    global.
    """
    opts = opts or SolverOptions()
    starts = _starts(model, opts)
    ends = _fixed_point_sweep(model, starts, opts)

    found = []
    n_failed = 0
    for end in ends:
        profile, res = _newton_polish(model, end, opts)
        if not res <= opts.residual_tolerance:
            n_failed += 1
            continue
        found.append((profile, res))
    if not found:
        raise SolverDidNotConverge(
            f"none of {len(starts)} starts reached residual {opts.residual_tolerance:g}",
            failures=n_failed,
        )
    if n_failed:
        logger.warning("%d of %d starts did not converge", n_failed, len(starts))

    candidates = []
    for profile, res in found:
        spectrum = np.linalg.eigvalsh(_reduced_hessian(model, model.pi, profile))
        candidates.append(
            Minimizer(
                profile=profile,
                total_measure=total_measure(model.pi, profile),
                phi_value=float(_phi_batch(model, model.pi, profile)),
                hessian_eigenvalues=spectrum,
                fixed_point_residual=res,
            )
        )
    candidates.sort(key=_sort_key)
    distinct = []
    for c in candidates:
        if all(np.max(np.abs(c.profile - d.profile)) > opts.dedup_tolerance for d in distinct):
            distinct.append(c)

    thr = opts.eigenvalue_threshold
    saddles = [c for c in distinct if c.hessian_min_eigenvalue < -thr]
    minima = [c for c in distinct if c.hessian_min_eigenvalue >= -thr]
    if not minima:
        raise SolverDidNotConverge("only saddle points were found", failures=n_failed)
    lowest = min(m.phi_value for m in minima)
    flagged = []
    for m in minima:
        is_global = m.phi_value <= lowest + opts.global_gap_tolerance
        if is_global and m.hessian_min_eigenvalue <= thr:
            raise NonDegeneracy1Violation(
                f"global minimizer at nu={m.total_measure} has Hessian eigenvalue "
                f"{m.hessian_min_eigenvalue:.3e} <= {thr:g}",
                eigenvalue=m.hessian_min_eigenvalue,
                minimizer=m,
            )
        flagged.append(_replace_global(m, is_global))
    return SolverResult(flagged, saddles, n_starts=len(starts), n_failed=n_failed)


def _replace_global(m, is_global):
    return Minimizer(m.profile, m.total_measure, m.phi_value, m.hessian_eigenvalues,
                     m.fixed_point_residual, is_global)


def find_minimizers(model, opts=None):
    """All distinct local minimizers, sorted by free energy; global ones flagged."""
    return solve(model, opts).minimizers


def global_minimizers(model, opts=None):
    """The set ``M*`` of global minimizers."""
    return solve(model, opts).global_minimizers


__all__ = [
    "Minimizer",
    "SIMPLEX_ATOL",
    "SolverOptions",
    "SolverResult",
    "find_minimizers",
    "fixed_point_residual",
    "from_reduced",
    "global_minimizers",
    "mean_field_map",
    "phi",
    "phi_gradient",
    "phi_hessian",
    "solve",
    "to_reduced",
    "total_mean_field_residual",
    "total_measure",
]
