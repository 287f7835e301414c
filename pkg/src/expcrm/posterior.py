"""Closed-form posterior updates for conjugate trait-measure models.

Observing N count measures against a conjugate prior returns another
model of the same shape: every touched location becomes (or updates) a
fixed atom whose hyperparameters absorb the sufficient statistics, and
the ordinary component keeps its own kernel with shifted parameters.
The update is exchangeable, so feeding observations one at a time or
all at once lands on the same posterior; ``iterated_equals_batch``
checks that identity on concrete data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidObservationError
from .exp_family import (
    ExpCrmLikelihood,
    ExpCrmPrior,
    FixedAtomParams,
    fixed_atom_density,
    xi_plus,
)
from .measures import Location, ObservationMeasure

__all__ = [
    "PosteriorCrm",
    "posterior_update",
    "posterior_fixed_atom_density",
    "iterated_equals_batch",
]


@dataclass(frozen=True)
class PosteriorCrm:
    """A posterior trait-measure model: prior shape plus the data count.

    ``fixed_atoms`` lists the prior's atoms first (updated in place),
    then the locations the data introduced, in ascending location order.
    """

    likelihood: ExpCrmLikelihood
    mass: float
    xi: tuple[float, ...]
    lam: float
    fixed_atoms: tuple[FixedAtomParams, ...]
    n_obs: int

    def __post_init__(self):
        if isinstance(self.n_obs, bool) or not isinstance(self.n_obs, int) or self.n_obs < 0:
            raise DomainError(f"n_obs must be an integer >= 0, got {self.n_obs!r}")
        # reuse the prior validation for everything else
        self.as_prior()

    def as_prior(self) -> ExpCrmPrior:
        """The same model viewed as a prior for further observations."""
        return ExpCrmPrior(self.likelihood, self.mass, self.xi, self.lam, self.fixed_atoms)

    def atom_at(self, location: Location) -> FixedAtomParams:
        if not isinstance(location, Location):
            location = Location(location)
        for atom in self.fixed_atoms:
            if atom.location.value == location.value:
                return atom
        raise DomainError(f"no fixed atom at location {location.value}")


def _check_counts(likelihood: ExpCrmLikelihood, observations) -> None:
    for n, obs in enumerate(observations):
        if not isinstance(obs, ObservationMeasure):
            raise DomainError(
                f"observation {n} must be an ObservationMeasure, got {type(obs).__name__}"
            )
        for atom in obs.atoms:
            if not likelihood.in_support(atom.count):
                raise InvalidObservationError(
                    f"observation {n} has count {atom.count} at location "
                    f"{atom.location.value}, outside the support of "
                    f"{likelihood.family} (bound {likelihood.support_bound})"
                )


def _shifted(
    likelihood: ExpCrmLikelihood,
    xi: tuple[float, ...],
    lam: float,
    counts: list[int],
) -> tuple[tuple[float, ...], float]:
    """(xi + sum of phi(x_n), lam + N), each component summed with fsum."""
    phis = [likelihood.phi(c) for c in counts]
    xi_new = tuple(
        math.fsum([xi[j]] + [float(p[j]) for p in phis]) for j in range(likelihood.dim)
    )
    return xi_new, lam + float(len(counts))


def posterior_update(model, observations) -> PosteriorCrm:
    """Condition a model on a batch of observation measures.

    ``model`` may be an ``ExpCrmPrior`` or an earlier ``PosteriorCrm``;
    in the latter case the observation counter keeps accumulating.
    Every location some observation touches gets a fixed atom; a count
    of zero at a touched-elsewhere location still contributes phi(0)
    and one unit of lam, exactly like an explicit zero observation.
    """
    if isinstance(model, PosteriorCrm):
        base, n_seen = model.as_prior(), model.n_obs
    elif isinstance(model, ExpCrmPrior):
        base, n_seen = model, 0
    else:
        raise DomainError(f"model must be a prior or posterior, got {type(model).__name__}")
    observations = tuple(observations)
    like = base.likelihood
    _check_counts(like, observations)
    n = len(observations)

    atoms: list[FixedAtomParams] = []
    for atom in base.fixed_atoms:
        counts = [obs.count_at(atom.location) for obs in observations]
        xi_new, lam_new = _shifted(like, atom.xi, atom.lam, counts)
        atoms.append(FixedAtomParams(atom.location, xi_new, lam_new))

    known = {atom.location.value for atom in base.fixed_atoms}
    fresh = sorted(
        {a.location.value for obs in observations for a in obs.atoms} - known
    )
    for value in fresh:
        loc = Location(value)
        counts = [obs.count_at(loc) for obs in observations]
        xi_new, lam_new = _shifted(like, base.xi, base.lam, counts)
        atoms.append(FixedAtomParams(loc, xi_new, lam_new))

    # ordinary component: N zero-count observations everywhere else
    mass_new = base.mass * math.exp(n * like.log_h(0))
    xi_ord, lam_ord = _shifted(like, base.xi, base.lam, [0] * n)
    return PosteriorCrm(like, mass_new, xi_ord, lam_ord, tuple(atoms), n_seen + n)


def posterior_fixed_atom_density(posterior: PosteriorCrm, location, theta):
    """Posterior weight density at one of the posterior's fixed atoms."""
    atom = posterior.atom_at(location)
    return fixed_atom_density(posterior.likelihood, atom.xi, atom.lam, theta)


def _close(a: float, b: float, rel_tol: float) -> bool:
    return a == b or abs(a - b) <= rel_tol * max(abs(a), abs(b))


def iterated_equals_batch(prior: ExpCrmPrior, observations, rel_tol: float = 1e-12) -> bool:
    """Whether one-at-a-time conditioning matches the single batch update.

    Atom order may legitimately differ between the two routes (fresh
    locations are appended per update), so atoms are compared as maps
    from location to hyperparameters. Numbers are compared exactly or
    to ``rel_tol`` relative error: the two routes sum the same terms in
    different orders.
    """
    observations = tuple(observations)
    batch = posterior_update(prior, observations)
    step = posterior_update(prior, observations[:1]) if observations else posterior_update(prior, ())
    for obs in observations[1:]:
        step = posterior_update(step, [obs])

    if batch.n_obs != step.n_obs:
        return False
    if not _close(batch.mass, step.mass, rel_tol) or not _close(batch.lam, step.lam, rel_tol):
        return False
    if len(batch.xi) != len(step.xi):
        return False
    if not all(_close(a, b, rel_tol) for a, b in zip(batch.xi, step.xi)):
        return False
    lhs = {a.location.value: a for a in batch.fixed_atoms}
    rhs = {a.location.value: a for a in step.fixed_atoms}
    if set(lhs) != set(rhs):
        return False
    for value, a in lhs.items():
        b = rhs[value]
        if not _close(a.lam, b.lam, rel_tol):
            return False
        if not all(_close(x, y, rel_tol) for x, y in zip(a.xi, b.xi)):
            return False
    return True
