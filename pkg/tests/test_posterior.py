import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from expcrm.catalog import BERNOULLI_BETA, POISSON_GAMMA, get_entry
from expcrm.errors import DomainError, InvalidObservationError
from expcrm.exp_family import ExpCrmPrior, FixedAtomParams
from expcrm.measures import Location, ObservationAtom, ObservationMeasure
from expcrm.posterior import (
    PosteriorCrm,
    iterated_equals_batch,
    posterior_fixed_atom_density,
    posterior_update,
)

NB = get_entry("negative_binomial", r=2.5)


def obs(pairs):
    return ObservationMeasure(tuple(ObservationAtom(c, Location(v)) for v, c in pairs))


def gamma_prior(mass=2.0, xi=-1.5, lam=1.0, atoms=()):
    return ExpCrmPrior(POISSON_GAMMA.make_likelihood(), mass, (xi,), lam, atoms)


class TestUpdateAlgebra:
    def test_fresh_locations(self):
        post = posterior_update(gamma_prior(), [obs([(0.7, 1), (0.3, 2)]), obs([(0.3, 1)])])
        assert post.n_obs == 2
        assert post.mass == 2.0
        assert post.xi == (-1.5,)
        assert post.lam == 3.0
        locs = [a.location.value for a in post.fixed_atoms]
        assert locs == [0.3, 0.7]
        a03, a07 = post.fixed_atoms
        assert a03.xi == (1.5,) and a03.lam == 3.0
        # untouched by the second observation: phi(0) = 0 but lam still moves
        assert a07.xi == (-0.5,) and a07.lam == 3.0

    def test_prior_atoms_updated_in_place(self):
        prior = gamma_prior(
            atoms=(
                FixedAtomParams(Location(0.9), (0.5,), 2.0),
                FixedAtomParams(Location(0.1), (0.0,), 1.0),
            )
        )
        post = posterior_update(prior, [obs([(0.9, 3), (0.5, 1)])])
        locs = [a.location.value for a in post.fixed_atoms]
        # prior order first, then fresh locations ascending
        assert locs == [0.9, 0.1, 0.5]
        assert post.fixed_atoms[0].xi == (3.5,)
        assert post.fixed_atoms[0].lam == 3.0
        assert post.fixed_atoms[1].xi == (0.0,)
        assert post.fixed_atoms[1].lam == 2.0
        assert post.fixed_atoms[2].xi == (-0.5,)
        assert post.fixed_atoms[2].lam == 2.0

    def test_empty_batch_is_identity(self):
        prior = gamma_prior(atoms=(FixedAtomParams(Location(0.4), (0.5,), 2.0),))
        post = posterior_update(prior, [])
        assert post.n_obs == 0
        assert post.mass == prior.mass
        assert post.xi == prior.xi and post.lam == prior.lam
        assert post.fixed_atoms == prior.fixed_atoms

    def test_observation_count_accumulates(self):
        post1 = posterior_update(gamma_prior(), [obs([(0.3, 1)])])
        post2 = posterior_update(post1, [obs([(0.3, 2)]), obs([])])
        assert post2.n_obs == 3
        assert post2.lam == 4.0
        assert post2.atom_at(Location(0.3)).xi == (1.5,)
        assert post2.atom_at(Location(0.3)).lam == 4.0

    def test_empty_observation_still_counts(self):
        post = posterior_update(gamma_prior(), [obs([]), obs([])])
        assert post.n_obs == 2
        assert post.lam == 3.0
        assert post.fixed_atoms == ()

    def test_as_prior_round_trip(self):
        post = posterior_update(gamma_prior(), [obs([(0.3, 1)])])
        again = posterior_update(post.as_prior(), [obs([(0.3, 2)])])
        assert again.n_obs == 1
        assert again.atom_at(Location(0.3)).xi == (post.atom_at(Location(0.3)).xi[0] + 2.0,)

    def test_binary_counts(self):
        prior = ExpCrmPrior(BERNOULLI_BETA.make_likelihood(), 1.0, (-1.0,), -1.0)
        post = posterior_update(prior, [obs([(0.2, 1)]), obs([]), obs([(0.2, 1)])])
        atom = post.atom_at(Location(0.2))
        assert atom.xi == (1.0,)
        assert atom.lam == 2.0
        assert post.lam == 2.0

    def test_input_validation(self):
        with pytest.raises(DomainError):
            posterior_update("prior", [])
        with pytest.raises(DomainError):
            posterior_update(gamma_prior(), [ObservationAtom(1, Location(0.3))])
        with pytest.raises(DomainError):
            PosteriorCrm(POISSON_GAMMA.make_likelihood(), 1.0, (-1.5,), 1.0, (), -1)
        with pytest.raises(DomainError):
            PosteriorCrm(POISSON_GAMMA.make_likelihood(), 1.0, (-1.5,), 1.0, (), True)

    def test_support_bound_enforced(self):
        prior = ExpCrmPrior(BERNOULLI_BETA.make_likelihood(), 1.0, (-1.0,), -1.0)
        with pytest.raises(InvalidObservationError, match="count 2"):
            posterior_update(prior, [obs([(0.2, 2)])])
        # unbounded supports take any count
        posterior_update(gamma_prior(), [obs([(0.2, 40)])])

    def test_atom_lookup(self):
        post = posterior_update(gamma_prior(), [obs([(0.3, 1)])])
        assert post.atom_at(0.3).lam == 2.0
        with pytest.raises(DomainError, match="no fixed atom"):
            post.atom_at(Location(0.5))


class TestPosteriorDensity:
    def test_gamma_atom_is_gamma_law(self):
        post = posterior_update(gamma_prior(), [obs([(0.3, 2)]), obs([(0.3, 1)])])
        atom = post.atom_at(Location(0.3))
        th = np.array([0.2, 0.7, 1.9])
        got = posterior_fixed_atom_density(post, Location(0.3), th)
        want = stats.gamma(a=atom.xi[0] + 1.0, scale=1.0 / atom.lam).pdf(th)
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_binary_atom_is_beta_law(self):
        prior = ExpCrmPrior(BERNOULLI_BETA.make_likelihood(), 1.0, (-1.0,), -1.0)
        post = posterior_update(prior, [obs([(0.2, 1)]), obs([(0.2, 1)]), obs([])])
        atom = post.atom_at(Location(0.2))
        th = np.array([0.1, 0.5, 0.9])
        got = posterior_fixed_atom_density(post, Location(0.2), th)
        # two successes, one failure on (xi, lam) = (-1, -1): Beta(2, 2)
        np.testing.assert_allclose(got, stats.beta(2.0, 2.0).pdf(th), rtol=1e-12)


def random_model_and_data(seed):
    rng = np.random.default_rng(seed)
    kind = rng.choice(["poisson", "bernoulli", "odds_bernoulli", "negative_binomial"])
    entry = get_entry(kind, r=float(rng.uniform(0.3, 3.0))) if kind == "negative_binomial" else get_entry(kind)
    xi0 = float(rng.uniform(-1.9, -1.05))
    if kind == "poisson":
        lam = float(rng.uniform(0.2, 3.0))
    elif kind == "bernoulli":
        lam = float(xi0 - 1.0 + rng.uniform(0.15, 3.0))
    elif kind == "odds_bernoulli":
        lam = float(xi0 + 1.0 + rng.uniform(0.15, 3.0))
    else:
        lam = float((-1.0 + rng.uniform(0.15, 3.0)) / entry.r)
    n_fixed = int(rng.integers(0, 3))
    atoms = []
    for loc in rng.uniform(0.0, 1.0, size=n_fixed):
        fxi = float(rng.uniform(-0.9, 2.0))
        if kind == "poisson":
            flam = float(rng.uniform(0.2, 3.0))
        elif kind == "bernoulli":
            flam = float(fxi - 1.0 + rng.uniform(0.15, 3.0))
        elif kind == "odds_bernoulli":
            flam = float(fxi + 1.0 + rng.uniform(0.15, 3.0))
        else:
            flam = float((-1.0 + rng.uniform(0.15, 3.0)) / entry.r)
        atoms.append(FixedAtomParams(Location(float(loc)), (fxi,), flam))
    prior = ExpCrmPrior(
        entry.make_likelihood(), float(rng.uniform(0.5, 3.0)), (xi0,), lam, tuple(atoms)
    )
    cap = 1 if entry.make_likelihood().support_bound == 1 else 6
    observations = []
    for _ in range(int(rng.integers(1, 5))):
        n_atoms = int(rng.integers(0, 4))
        locs = list({float(v) for v in rng.uniform(0.0, 1.0, size=n_atoms)})
        observations.append(
            obs([(v, int(rng.integers(1, cap + 1))) for v in locs])
        )
    return prior, observations


@pytest.mark.parametrize("seed", range(25))
def test_iterated_equals_batch_random_models(seed):
    prior, observations = random_model_and_data(seed)
    assert iterated_equals_batch(prior, observations)


@settings(max_examples=60, deadline=None)
@given(
    counts=st.lists(
        st.lists(st.tuples(st.sampled_from([0.1, 0.3, 0.5, 0.7]), st.integers(1, 5)), max_size=3),
        min_size=1,
        max_size=4,
    ),
    perm_seed=st.integers(0, 2**16),
)
def test_batch_update_is_exchangeable(counts, perm_seed):
    observations = []
    for pairs in counts:
        dedup = {}
        for v, c in pairs:
            dedup[v] = c
        observations.append(obs(sorted(dedup.items())))
    prior = gamma_prior()
    batch = posterior_update(prior, observations)
    shuffled = list(observations)
    np.random.default_rng(perm_seed).shuffle(shuffled)
    other = posterior_update(prior, shuffled)
    # fsum makes each component sum exact, so any order gives identical floats
    assert batch.mass == other.mass
    assert batch.xi == other.xi and batch.lam == other.lam
    assert {a.location.value: (a.xi, a.lam) for a in batch.fixed_atoms} == {
        a.location.value: (a.xi, a.lam) for a in other.fixed_atoms
    }
