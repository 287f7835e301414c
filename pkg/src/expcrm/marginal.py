"""Marginal generation of observation sequences.

Integrating the trait measure out of the model leaves a sequential process
over the observations alone.  Step n sees two kinds of emission:

* every atom already on the books (the model's fixed atoms, plus every
  trait born at an earlier step) emits a count from its exact predictive
  pmf, the ratio of conjugate normalizers at its accumulated parameters;
* brand-new traits arrive as a Poisson process whose count-x rate equals
  the size-biased rate of round n, because a trait first seen at step n is
  precisely a round-n trait.  New-atom counts above the configured cap are
  truncated, with the same certified tail accounting as the size-biased
  sampler; counts at existing atoms are never truncated.

Emitted counts feed straight back into each atom's parameters, so a run of
this sampler is its own conjugate filter: after n steps an atom's
parameters match what :func:`expcrm.posterior.posterior_update` would
compute from the emitted observations.

The per-step rate rows only depend on the step index, so they are cached
on the sampler and shared across streams; the neglected-rate budget is
tracked per stream, since each stream is one realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import islice

import numpy as np

from .catalog import entry_for, hyperparam_valid
from .errors import DomainError, InvalidModelError, QuadratureError, TailBoundError
from .exp_family import ExpCrmLikelihood, ExpCrmPrior, as_xi, log_partition_B, xi_plus
from .measures import Location, ObservationAtom, ObservationMeasure
from .rng import as_generator
from .size_biased import (
    _check_round_count,
    _fresh_locations,
    rate_M,
    round_total,
    weight_dist_params,
)

__all__ = [
    "MarginalConfig",
    "MarginalSampler",
    "new_atom_rate",
    "predictive_logpmf",
    "sample_marginal",
]


def predictive_logpmf(likelihood: ExpCrmLikelihood, xi_eff, lam_eff: float, x) -> np.ndarray:
    """log pmf of the next count at an atom with accumulated parameters.

    ``h(x) * exp(B(xi_eff + phi(x), lam_eff + 1) - B(xi_eff, lam_eff))``;
    proper ``(xi_eff, lam_eff)`` make this a normalized pmf over the
    count support (zero included).
    """
    xi_eff = as_xi(xi_eff)
    xs = np.asarray(x, dtype=np.int64)
    entry = entry_for(likelihood)
    if entry is not None:
        return entry.predictive_logpmf(xi_eff[0], float(lam_eff), xs)
    base = log_partition_B(likelihood, xi_eff, lam_eff)
    out = []
    for xv in xs.reshape(-1):
        xv = int(xv)
        if not likelihood.in_support(xv):
            out.append(-math.inf)
            continue
        shifted = xi_plus(xi_eff, likelihood.phi(xv))
        out.append(
            likelihood.log_h(xv)
            + log_partition_B(likelihood, shifted, float(lam_eff) + 1.0)
            - base
        )
    return np.array(out).reshape(xs.shape)


def new_atom_rate(prior: ExpCrmPrior, step, x) -> float:
    """Rate of brand-new traits with count x at observation ``step``.

    This *is* the size-biased rate of round ``step``: a trait first seen
    at step n went unseen for n - 1 steps, which is the round-n size
    biasing.  Kept as a forwarding definition so the identity is
    structural rather than something tests have to re-prove.
    """
    return rate_M(prior, step, x)


@dataclass(frozen=True, slots=True)
class MarginalConfig:
    """Truncation levels for marginal generation.

    New-atom counts above ``x_max`` are dropped from each step's rate row
    (clipped to the support bound when that is smaller); ``eps_tail`` caps
    the neglected rate accumulated over one stream.  Existing atoms are
    exact and need no knobs.
    """

    x_max: int = 50
    eps_tail: float = 1e-6

    def __post_init__(self):
        v = self.x_max
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise DomainError(f"x_max must be an integer, got {v!r}")
        if v < 1:
            raise DomainError(f"x_max must be >= 1, got {v}")
        object.__setattr__(self, "x_max", int(v))
        e = self.eps_tail
        if isinstance(e, bool) or not isinstance(e, (int, float, np.integer, np.floating)):
            raise DomainError(f"eps_tail must be a number, got {e!r}")
        e = float(e)
        if not (math.isfinite(e) and e > 0.0):
            raise DomainError(f"eps_tail must be positive and finite, got {e}")
        object.__setattr__(self, "eps_tail", e)


@dataclass(frozen=True, slots=True)
class _AtomState:
    """One tracked atom: location plus accumulated weight parameters."""

    location: Location
    xi: tuple[float, ...]
    lam: float
    born_at: int  # 0 for the model's fixed atoms

    def bump(self, likelihood: ExpCrmLikelihood, x: int) -> "_AtomState":
        return _AtomState(
            self.location,
            xi_plus(self.xi, likelihood.phi(x)),
            self.lam + 1.0,
            self.born_at,
        )


class MarginalSampler:
    """Generates observation sequences with the trait measure integrated out.

    One stream = one realization; :meth:`stream` yields one
    :class:`~expcrm.measures.ObservationMeasure` per step (positive counts
    only, atoms sorted by location).  The rng can be fixed at construction
    or passed per stream, and a stream's output is a deterministic
    function of the rng state, with the first n steps independent of how
    many more are consumed.
    """

    def __init__(self, prior: ExpCrmPrior, config: MarginalConfig | None = None, rng=None):
        if not isinstance(prior, ExpCrmPrior):
            raise DomainError(f"prior must be an ExpCrmPrior, got {type(prior).__name__}")
        if config is None:
            config = MarginalConfig()
        elif not isinstance(config, MarginalConfig):
            raise DomainError(f"config must be a MarginalConfig, got {type(config).__name__}")
        self.prior = prior
        self.config = config
        self._gen = None if rng is None else as_generator(rng)

        res = hyperparam_valid(prior)
        if not res.ok:
            raise InvalidModelError(f"invalid hyperparameters: {res.reason}")
        self.validity_warnings = res.warnings

        like = prior.likelihood
        bound = like.support_bound
        self.count_cap = config.x_max if bound is None else min(config.x_max, bound)
        self._entry = entry_for(like)
        self._xs = np.arange(1, self.count_cap + 1)
        self._tables: dict[int, tuple[np.ndarray, float]] = {}

    # -- per-step new-atom intensities ------------------------------------

    def _step_table(self, n: int) -> tuple[np.ndarray, float]:
        """(cumulative rate row, neglected gap) for new atoms at step n."""
        cached = self._tables.get(n)
        if cached is None:
            p = self.prior
            if self._entry is not None:
                row = self._entry.rate_table(p.mass, p.xi, p.lam, np.array([n]), self._xs)[0]
                total = self._entry.round_total(p.mass, p.xi, p.lam, n)
            else:
                row = np.array([rate_M(p, n, int(x)) for x in self._xs], dtype=float)
                total = round_total(p, n)
            cdf = np.cumsum(row)
            gap = max(total - float(cdf[-1]), 0.0)
            cached = (cdf, gap)
            self._tables[n] = cached
        return cached

    def tail_certificate(self, n_steps: int) -> dict:
        """JSON-ready record of what an n-step stream's truncation neglects."""
        n_steps, _ = _check_round_count(n_steps, 1)
        gaps = [self._step_table(n)[1] for n in range(1, n_steps + 1)]
        worst = int(np.argmax(gaps))
        return {
            "steps": n_steps,
            "count_cap": int(self.count_cap),
            "eps_tail": float(self.config.eps_tail),
            "neglected_rate": float(sum(gaps)),
            "worst_step": worst + 1,
            "worst_step_rate": float(gaps[worst]),
        }

    # -- drawing ----------------------------------------------------------

    def _generator(self, rng) -> np.random.Generator:
        if rng is not None:
            return as_generator(rng)
        if self._gen is None:
            raise DomainError("no rng available: pass one to this call or at construction")
        return self._gen

    def _predictive_walk(self, gen, xi_eff, lam_eff: float) -> int:
        """One exact draw from the predictive pmf by inverse-cdf walk."""
        u = float(gen.uniform())
        like = self.prior.likelihood
        bound = like.support_bound
        chunk = 64 if self._entry is not None else 8
        acc = 0.0
        start = 0
        while True:
            stop = start + chunk if bound is None else min(start + chunk, bound + 1)
            xs = np.arange(start, stop)
            cum = acc + np.cumsum(np.exp(predictive_logpmf(like, xi_eff, lam_eff, xs)))
            idx = int(np.searchsorted(cum, u, side="right"))
            if idx < xs.size:
                return int(xs[idx])
            acc = float(cum[-1])
            if bound is not None and stop > bound:
                return int(bound)  # u fell in the last float ulp of the cdf
            start = stop
            if start > 10**6:
                raise QuadratureError("predictive walk failed to accumulate to 1")

    def stream(self, rng=None):
        """Yield one ObservationMeasure per step, forever.

        Per step, the rng is consumed in a fixed order: fixed atoms in
        prior order, then earlier-born atoms in birth order, then the
        new-atom count (Poisson), counts, and locations.  The stream
        raises :class:`~expcrm.errors.TailBoundError` at the step where
        the cumulative neglected new-atom rate would pass ``eps_tail``.
        """
        gen = self._generator(rng)
        like = self.prior.likelihood
        atoms = [
            _AtomState(fa.location, fa.xi, fa.lam, 0) for fa in self.prior.fixed_atoms
        ]
        neglected = 0.0
        n = 0
        while True:
            n += 1
            cdf, gap = self._step_table(n)
            neglected += gap
            if neglected > self.config.eps_tail:
                raise TailBoundError(
                    f"marginal stream reached step {n} with cumulative neglected "
                    f"new-atom rate {neglected:.3e} > eps_tail = "
                    f"{self.config.eps_tail:.3e}; raise x_max or loosen eps_tail",
                    certificate=self.tail_certificate(n),
                )
            emissions = []
            next_atoms = []
            for atom in atoms:
                x = self._predictive_walk(gen, atom.xi, atom.lam)
                if x > 0:
                    emissions.append((atom.location.value, x))
                next_atoms.append(atom.bump(like, x))
            total = float(cdf[-1])
            k = int(gen.poisson(total))
            if k > 0:
                u = gen.uniform(0.0, total, size=k)
                counts = self._xs[np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)]
                counts.sort()
                taken = {a.location.value for a in next_atoms}
                locations = _fresh_locations(gen, k, taken)
                for c, v in zip(counts, locations):
                    loc = Location(float(v))
                    emissions.append((loc.value, int(c)))
                    xi_new, lam_new = weight_dist_params(self.prior, n, int(c))
                    next_atoms.append(_AtomState(loc, xi_new, lam_new, n))
            atoms = next_atoms
            yield ObservationMeasure(
                tuple(
                    ObservationAtom(c, Location(v))
                    for v, c in sorted(emissions)
                )
            )

    def sample(self, n_steps: int, rng=None) -> list[ObservationMeasure]:
        """The first ``n_steps`` observations of one stream."""
        n_steps, _ = _check_round_count(n_steps, 1)
        return list(islice(self.stream(rng), n_steps))


def sample_marginal(
    prior: ExpCrmPrior, n_steps: int, rng, config: MarginalConfig | None = None
) -> list[ObservationMeasure]:
    """Build a sampler and generate one n-step observation sequence."""
    return MarginalSampler(prior, config=config).sample(n_steps, rng)
