"""Alphabets, simplex points, the model triple and its built-in families.

A model is the triple ``(F, alpha, pi)``: an interaction functional ``F`` on
the simplex over the spin alphabet ``E``, one a-priori kernel ``alpha[b]`` per
disorder symbol ``b`` in ``E'``, and the disorder law ``pi`` on ``E'``.

All probability vectors are plain float arrays in a fixed alphabet order.
Interaction functionals are vectorised over leading axes: ``value`` maps
``(..., |E|) -> (...)``, ``gradient`` maps ``(..., |E|) -> (..., |E|)`` and
``hessian`` maps ``(..., |E|) -> (..., |E|, |E|)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp, rel_entr

from .exceptions import ValidationError

SIMPLEX_ATOL = 1e-9


def as_probability_vector(p, name="p", atol=SIMPLEX_ATOL):
    """Validate ``p`` as a point of the simplex and return a normalised copy.

    The sum is allowed to be off by ``atol``; the returned array is rescaled so
    that it sums to one to rounding.
    """
    arr = np.array(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(arr < -atol):
        raise ValidationError(f"{name} has negative entries: {arr}")
    total = arr.sum()
    if abs(total - 1.0) > atol:
        raise ValidationError(f"{name} sums to {total!r}, not 1")
    arr = np.clip(arr, 0.0, None)
    return arr / arr.sum()


def as_tangent_vector(x, name="x", atol=1e-12):
    """Validate ``x`` as an element of the tangent space (entries sum to 0)."""
    arr = np.array(x, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-d vector")
    if abs(arr.sum()) > atol * max(1.0, np.abs(arr).max(initial=0.0)):
        raise ValidationError(f"{name} does not sum to zero: {arr.sum()!r}")
    return arr


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InteractionFunctional:
    """Twice differentiable energy per site ``F`` on the simplex over ``E``.

    ``gradient`` returns the differential ``dF_nu(a)`` as a full-length vector;
    it is only defined up to an additive constant and every consumer is
    shift-invariant.
    """

    dimension: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __post_init__(self):
        if self.dimension < 2:
            raise ValidationError("spin alphabet must have at least two symbols")


def zero_interaction(dimension):
    """``F == 0``: independent spins."""

    def value(nu):
        return np.zeros(np.shape(nu)[:-1])

    def gradient(nu):
        return np.zeros(np.shape(nu))

    def hessian(nu):
        shape = np.shape(nu)
        return np.zeros(shape + shape[-1:])

    return InteractionFunctional(dimension, value, gradient, hessian, name="zero")


def _quadratic(dimension, coupling, name):
    # F(nu) = -coupling * sum_a nu(a)^2
    def value(nu):
        nu = np.asarray(nu, dtype=float)
        return -coupling * np.sum(nu * nu, axis=-1)

    def gradient(nu):
        return -2.0 * coupling * np.asarray(nu, dtype=float)

    def hessian(nu):
        shape = np.shape(nu)
        return np.broadcast_to(-2.0 * coupling * np.eye(dimension), shape + shape[-1:]).copy()

    return InteractionFunctional(dimension, value, gradient, hessian, name=name)


def make_quadratic_ising(beta):
    """Ising interaction ``F(nu) = -beta (nu(+)^2 + nu(-)^2)`` on ``E = (+, -)``."""
    if not beta > 0:
        raise ValidationError(f"beta must be positive, got {beta!r}")
    return _quadratic(2, float(beta), f"quadratic-ising(beta={beta!r})")


def make_quadratic_potts(q, beta):
    """Potts interaction ``F(nu) = -(beta/2) sum_a nu(a)^2`` on ``q`` colours."""
    if int(q) != q or q < 2:
        raise ValidationError(f"q must be an integer >= 2, got {q!r}")
    if not beta > 0:
        raise ValidationError(f"beta must be positive, got {beta!r}")
    return _quadratic(int(q), 0.5 * float(beta), f"quadratic-potts(q={q}, beta={beta!r})")


def make_general_ising(g, dg, d2g, name="general-ising"):
    """Ising interaction ``F(nu) = G(nu(+) - nu(-))``.

    ``g``, ``dg`` and ``d2g`` are ``G``, ``G'`` and ``G''``; they must accept
    numpy arrays of magnetisations.
    """
    signs = np.array([1.0, -1.0])
    outer = np.outer(signs, signs)

    def magnetisation(nu):
        nu = np.asarray(nu, dtype=float)
        return nu[..., 0] - nu[..., 1]

    def value(nu):
        return np.asarray(g(magnetisation(nu)), dtype=float)

    def gradient(nu):
        gp = np.asarray(dg(magnetisation(nu)), dtype=float)
        return gp[..., None] * signs

    def hessian(nu):
        gpp = np.asarray(d2g(magnetisation(nu)), dtype=float)
        return gpp[..., None, None] * outer

    return InteractionFunctional(2, value, gradient, hessian, name=name)


def make_polynomial_ising(coefficients):
    """``make_general_ising`` with ``G(m) = sum_k c_k m^k`` (ascending order)."""
    poly = np.polynomial.Polynomial(np.asarray(coefficients, dtype=float))
    d1, d2 = poly.deriv(1), poly.deriv(2)
    return make_general_ising(poly, d1, d2, name=f"polynomial-ising({list(poly.coef)})")


def make_ising_field_kernels(fields):
    """Kernels ``alpha[h](s) = exp(h s) / (2 cosh h)`` for ``s`` in ``(+1, -1)``.

    Returns an array of shape ``(len(fields), 2)``.
    """
    h = np.atleast_1d(np.asarray(fields, dtype=float))
    if not np.all(np.isfinite(h)):
        raise ValidationError("fields must be finite")
    # alpha(+) = 1 / (1 + exp(-2h)); logistic form is overflow-safe
    return np.stack([expit(2.0 * h), expit(-2.0 * h)], axis=-1)


def make_potts_field_kernels(q, B):
    """Kernels ``alpha[b](a) = exp(B 1{a=b}) / (exp(B) + q - 1)`` with ``E' = E``."""
    if int(q) != q or q < 2:
        raise ValidationError(f"q must be an integer >= 2, got {q!r}")
    q = int(q)
    logits = float(B) * np.eye(q)
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """The triple ``(F, alpha, pi)`` over finite spin and disorder alphabets.

    ``alpha`` has shape ``(|E'|, |E|)``; row ``b`` is the a-priori kernel of a
    site with disorder symbol ``b``.  Every kernel entry and every disorder
    weight must be strictly positive.
    """

    spin_alphabet: tuple
    disorder_alphabet: tuple
    F: InteractionFunctional
    alpha: np.ndarray
    pi: np.ndarray
    log_alpha: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        spins = tuple(self.spin_alphabet)
        types = tuple(self.disorder_alphabet)
        if len(spins) < 2:
            raise ValidationError("spin alphabet needs at least two symbols")
        if len(types) < 1:
            raise ValidationError("disorder alphabet needs at least one symbol")
        if len(set(spins)) != len(spins) or len(set(types)) != len(types):
            raise ValidationError("alphabet symbols must be distinct")
        if self.F.dimension != len(spins):
            raise ValidationError(
                f"F acts on {self.F.dimension} spins but the alphabet has {len(spins)}"
            )
        alpha = np.array(self.alpha, dtype=float)
        if alpha.shape != (len(types), len(spins)):
            raise ValidationError(
                f"alpha must have shape {(len(types), len(spins))}, got {alpha.shape}"
            )
        rows = [as_probability_vector(row, name=f"alpha[{b!r}]") for b, row in zip(types, alpha)]
        alpha = np.vstack(rows)
        if np.any(alpha <= 0):
            raise ValidationError("every alpha[b](a) must be strictly positive")
        pi = as_probability_vector(self.pi, name="pi")
        if pi.shape != (len(types),):
            raise ValidationError(f"pi must have {len(types)} entries, got {pi.shape}")
        if np.any(pi <= 0):
            raise ValidationError("pi(b) must be strictly positive for every b")
        object.__setattr__(self, "spin_alphabet", spins)
        object.__setattr__(self, "disorder_alphabet", types)
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "pi", _frozen(pi))
        object.__setattr__(self, "log_alpha", _frozen(np.log(alpha)))

    @property
    def n_spins(self):
        return len(self.spin_alphabet)

    @property
    def n_types(self):
        return len(self.disorder_alphabet)

    def with_pi(self, pi):
        return ModelSpec(self.spin_alphabet, self.disorder_alphabet, self.F, self.alpha, pi)


def ising_model(beta, fields, pi=None):
    """Quadratic random-field Ising model with one disorder type per field value."""
    fields = [float(h) for h in np.atleast_1d(fields)]
    if pi is None:
        pi = np.full(len(fields), 1.0 / len(fields))
    return ModelSpec(
        ("+", "-"),
        tuple(f"h={h!r}" for h in fields),
        make_quadratic_ising(beta),
        make_ising_field_kernels(fields),
        pi,
    )


def general_ising_model(F, fields, pi=None):
    """Ising model with an arbitrary interaction built by ``make_general_ising``."""
    fields = [float(h) for h in np.atleast_1d(fields)]
    if pi is None:
        pi = np.full(len(fields), 1.0 / len(fields))
    return ModelSpec(
        ("+", "-"), tuple(f"h={h!r}" for h in fields), F, make_ising_field_kernels(fields), pi
    )


def potts_model(q, beta, B, pi=None):
    """Quadratic Potts model with homogeneous-intensity random field, ``E' = E``."""
    q = int(q)
    if pi is None:
        pi = np.full(q, 1.0 / q)
    return ModelSpec(
        tuple(range(1, q + 1)),
        tuple(range(1, q + 1)),
        make_quadratic_potts(q, beta),
        make_potts_field_kernels(q, B),
        pi,
    )


def free_model(alpha, pi):
    """``F == 0`` with the given kernels; spins are independent."""
    alpha = np.asarray(alpha, dtype=float)
    n_types, n_spins = alpha.shape
    return ModelSpec(
        tuple(range(n_spins)), tuple(range(n_types)), zero_interaction(n_spins), alpha, pi
    )


def permute_spins(model, perm):
    """Relabel spins: new symbol ``i`` is old symbol ``perm[i]``.

    The interaction is composed with the relabelling and every kernel row is
    permuted the same way.
    """
    perm = np.asarray(perm)
    inv = np.argsort(perm)
    old = model.F

    def value(nu):
        return old.value(np.asarray(nu)[..., inv])

    def gradient(nu):
        return old.gradient(np.asarray(nu)[..., inv])[..., perm]

    def hessian(nu):
        return old.hessian(np.asarray(nu)[..., inv])[..., perm, :][..., :, perm]

    F = InteractionFunctional(old.dimension, value, gradient, hessian, name=f"{old.name}[perm]")
    spins = tuple(model.spin_alphabet[i] for i in perm)
    return ModelSpec(spins, model.disorder_alphabet, F, model.alpha[:, perm], model.pi)


def log_partition(model, nu):
    """``log sum_a exp(-dF_nu(a)) alpha[b](a)`` for every ``b``; shape ``(..., |E'|)``."""
    grad = np.asarray(model.F.gradient(nu), dtype=float)
    # (..., 1, |E|) + (|E'|, |E|)
    return logsumexp(model.log_alpha - grad[..., None, :], axis=-1)


def _type_index(model, b):
    if isinstance(b, (int, np.integer)) and 0 <= b < model.n_types:
        return int(b)
    raise ValidationError(f"disorder index must be in [0, {model.n_types}), got {b!r}")


def gamma_kernel(model, b, nu):
    """Local kernel ``gamma[b](.|nu)`` at disorder index ``b``.

    ``gamma[b](a|nu)`` is proportional to ``exp(-dF_nu(a)) alpha[b](a)``.
    """
    nu = as_probability_vector(nu, name="nu")
    if nu.shape != (model.n_spins,):
        raise ValidationError(f"nu must have {model.n_spins} entries")
    return gamma_kernels(model, nu)[_type_index(model, b)]


def gamma_kernels(model, nu):
    """All kernels ``gamma[b](.|nu)`` stacked; shape ``(..., |E'|, |E|)``.

    No validation; ``nu`` may carry leading batch axes.
    """
    grad = np.asarray(model.F.gradient(nu), dtype=float)
    logits = model.log_alpha - grad[..., None, :]
    # shift-invariant by construction: a constant in grad cancels here
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=-1, keepdims=True)


def relative_entropy(p, q):
    """``S(p|q) = sum_a p(a) log(p(a)/q(a))`` with ``0 log 0 = 0``."""
    p = as_probability_vector(p, name="p")
    q = as_probability_vector(q, name="q")
    if p.shape != q.shape:
        raise ValidationError("p and q must live on the same alphabet")
    if np.any(q <= 0):
        raise ValidationError("q must be strictly positive")
    return float(max(rel_entr(p, q).sum(), 0.0))


def relative_entropy_rows(p, q):
    """Row-wise relative entropy without validation; ``q > 0`` assumed."""
    return rel_entr(p, q).sum(axis=-1)


def simplex_points(rng, size, dim):
    """Uniform (Dirichlet(1,...,1)) draws on the simplex."""
    return rng.dirichlet(np.ones(dim), size=size)


__all__: Sequence[str] = [
    "InteractionFunctional",
    "ModelSpec",
    "as_probability_vector",
    "as_tangent_vector",
    "free_model",
    "gamma_kernel",
    "gamma_kernels",
    "general_ising_model",
    "ising_model",
    "log_partition",
    "make_general_ising",
    "make_ising_field_kernels",
    "make_polynomial_ising",
    "make_potts_field_kernels",
    "make_quadratic_ising",
    "make_quadratic_potts",
    "permute_spins",
    "potts_model",
    "relative_entropy",
    "zero_interaction",
]
