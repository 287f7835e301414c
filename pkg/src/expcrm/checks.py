"""Numeric verification of models and samplers.

Three kinds of evidence, each reported as a :class:`CheckReport`:

* **Assumption checks** interrogate the model by quadrature rather than by
  region algebra: A0 (every fixed atom's weight law normalizes), A1 (the
  ordinary component carries infinite mass, confirmed by divergence
  evidence, not by failing to converge), and A2 (the expected number of
  traits seen at one step is finite).

* **Oracle checks** recompute quantities the package produces through its
  fastest path (closed forms, cached tables, catalog samplers) from their
  literal integral definitions, sharing as little code as possible with
  the primary path: partition values, atom rates, round totals, predictive
  pmfs, and the weight laws behind the rng draws.

* **Equivalence checks** compare the two generative processes, which must
  agree in law: per round n, the joint distribution of (number of new
  atoms, their count sum) under the size-biased sampler against the same
  statistic read off the marginal stream's first appearances.

Nothing here is proof; everything here is loud.  A failed report carries
the statistic, the threshold it broke, and enough detail to reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .catalog import entry_for
from .errors import DivergenceSuspected, DomainError, QuadratureError
from .exp_family import (
    ExpCrmPrior,
    as_xi,
    log_conjugate_kernel,
    log_partition_B,
)
from .marginal import MarginalConfig, MarginalSampler, predictive_logpmf
from .quadrature import IntegrandSpec, integrate, probed_orders
from .rng import RngState
from .size_biased import (
    SizeBiasedConfig,
    SizeBiasedSampler,
    _NumericWeightSampler,
    rate_M,
    round_total,
    weight_dist_params,
)

__all__ = [
    "CheckReport",
    "check_assumptions",
    "chi_square_gof",
    "chi_square_two_sample",
    "equivalence_run",
    "ks_two_sample",
    "log1mexp",
    "oracle_log_partition",
    "oracle_predictive_pmf",
    "oracle_rate_M",
    "oracle_round_total",
    "oracle_weight_law",
    "run_suite",
]


def log1mexp(a) -> np.ndarray:
    """log(1 - exp(-a)) for a > 0, stable across both cancellation regimes."""
    a = np.asarray(a, dtype=float)
    if (a <= 0.0).any():
        raise DomainError("log1mexp needs a > 0")
    small = a < math.log(2.0)
    with np.errstate(divide="ignore"):
        return np.where(small, np.log(-np.expm1(-a)), np.log1p(-np.exp(-a)))


@dataclass(frozen=True, slots=True)
class CheckReport:
    """Outcome of one verification check.

    ``statistic`` is compared against ``threshold`` in the direction of
    ``comparison`` (``"<="`` or ``">="``); ``passed`` records the verdict
    so a serialized report stays self-contained.
    """

    name: str
    passed: bool
    statistic: float
    threshold: float
    comparison: str
    detail: str = ""

    def to_jsonable(self) -> dict:
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else repr(v)  # "inf"/"nan" keep the JSON valid

        return {
            "name": self.name,
            "passed": bool(self.passed),
            "statistic": num(self.statistic),
            "threshold": num(self.threshold),
            "comparison": self.comparison,
            "detail": self.detail,
        }

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"[{verdict}] {self.name}: statistic {self.statistic:.6g} "
            f"{self.comparison} {self.threshold:.6g}"
            + (f" ({self.detail})" if self.detail else "")
        )


def _report_leq(name, statistic, threshold, detail=""):
    return CheckReport(name, statistic <= threshold, float(statistic), float(threshold), "<=", detail)


def _report_geq(name, statistic, threshold, detail=""):
    return CheckReport(name, statistic >= threshold, float(statistic), float(threshold), ">=", detail)


# --- assumption checks --------------------------------------------------------


def check_assumptions(prior: ExpCrmPrior) -> list[CheckReport]:
    """Numeric evidence for A0, A1, and A2 at the prior's parameters."""
    return [_check_a0(prior), _check_a1(prior), _check_a2(prior)]


def _check_a0(prior: ExpCrmPrior) -> CheckReport:
    like = prior.likelihood
    pieces = []
    ok = 0
    for i, fa in enumerate(prior.fixed_atoms):
        try:
            b = log_partition_B(like, fa.xi, fa.lam)
        except (DomainError, QuadratureError) as err:
            pieces.append(f"atom {i} at {fa.location.value:g}: improper ({err})")
            continue
        ok += 1
        pieces.append(f"atom {i} at {fa.location.value:g}: B = {b:.6g}")
    n = len(prior.fixed_atoms)
    frac = 1.0 if n == 0 else ok / n
    detail = "; ".join(pieces) if pieces else "no fixed atoms"
    return _report_geq("A0: fixed-atom weight laws normalize", frac, 1.0, detail)


def _check_a1(prior: ExpCrmPrior) -> CheckReport:
    name = "A1: ordinary component has infinite mass"
    try:
        b = log_partition_B(prior.likelihood, prior.xi, prior.lam, force_numeric=True)
    except DivergenceSuspected as err:
        return _report_geq(name, math.inf, math.inf, f"divergence confirmed at {err.endpoint}")
    except QuadratureError as err:
        return CheckReport(
            name, False, math.nan, math.inf, ">=",
            f"quadrature could not classify the kernel mass: {err}",
        )
    return _report_geq(
        name, math.exp(b), math.inf,
        f"kernel mass converged to {math.exp(b):.6g}; the ordinary component is finite",
    )


def _a2_value(prior: ExpCrmPrior, rel_tol: float = 1e-9) -> float:
    """Round-1 trait rate by direct quadrature of mass * kappa * (1 - l0)."""
    like = prior.likelihood
    log_mass = math.log(prior.mass)

    def log_f(th):
        th = np.asarray(th, dtype=float)
        lp0 = like.log_pmf(0, th)
        with np.errstate(divide="ignore"):
            gap = np.log(-np.expm1(lp0))
        return log_mass + gap + log_conjugate_kernel(like, prior.xi, prior.lam, th)

    entry = entry_for(like)
    if entry is not None:
        low, up = entry.a2_orders(prior.xi, prior.lam)
    else:
        low, up = probed_orders(log_f, like.weight_domain.upper)
    spec = IntegrandSpec(
        log_f,
        upper=like.weight_domain.upper,
        lower_order=low,
        upper_order=up,
        name="round-1 trait rate",
    )
    value, _ = integrate(spec, rel_tol=rel_tol)
    return value


def _check_a2(prior: ExpCrmPrior) -> CheckReport:
    name = "A2: one step sees finitely many traits"
    try:
        value = _a2_value(prior)
    except DivergenceSuspected as err:
        return CheckReport(
            name, False, math.inf, math.inf, "<",
            f"round-1 rate diverges at {err.endpoint}",
        )
    except QuadratureError as err:
        return CheckReport(name, False, math.nan, math.inf, "<", f"quadrature failed: {err}")
    head = []
    total_head = 0.0
    for x in range(1, 11):
        r = rate_M(prior, 1, x)
        total_head += r
        head.append(f"M(1,{x})={r:.4g}")
    remainder = max(value - total_head, 0.0)
    detail = (
        f"round-1 rate {value:.6g}; " + ", ".join(head) + f"; counts above 10 keep {remainder:.3g}"
    )
    return CheckReport(name, math.isfinite(value), float(value), math.inf, "<", detail)


# --- statistical helpers ------------------------------------------------------


def ks_two_sample(a, b, alpha: float = 0.01, name: str = "two-sample KS") -> CheckReport:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DomainError("two-sample KS needs at least two points per sample")
    res = stats.ks_2samp(a, b, method="asymp" if min(a.size, b.size) > 500 else "auto")
    return _report_geq(name, res.pvalue, alpha, f"n = {a.size} vs {b.size}, D = {res.statistic:.4g}")


def chi_square_gof(
    samples,
    log_pmf,
    alpha: float = 0.01,
    min_expected: float = 5.0,
    name: str = "chi-square goodness of fit",
) -> CheckReport:
    """Pearson test of integer samples against a reference log pmf.

    Cells are pooled greedily from the left until each holds at least
    ``min_expected`` expected points; everything past the largest
    observation forms an open tail cell.
    """
    samples = np.asarray(samples, dtype=np.int64)
    n = samples.size
    if n < 20:
        raise DomainError("goodness of fit needs at least 20 samples")
    hi = int(samples.max())
    xs = np.arange(0, hi + 1)
    probs = np.exp(np.asarray(log_pmf(xs), dtype=float))
    tail = max(1.0 - float(probs.sum()), 0.0)
    counts = np.bincount(samples, minlength=hi + 1)

    obs_bins: list[float] = []
    exp_bins: list[float] = []
    acc_o = 0.0
    acc_e = 0.0
    for o, p in zip(counts, probs):
        acc_o += float(o)
        acc_e += float(p) * n
        if acc_e >= min_expected:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
            acc_o = 0.0
            acc_e = 0.0
    # leftovers plus the open tail form the last cell
    acc_e += tail * n
    if obs_bins and acc_e < min_expected:
        obs_bins[-1] += acc_o
        exp_bins[-1] += acc_e
    else:
        obs_bins.append(acc_o)
        exp_bins.append(acc_e)
    if len(obs_bins) < 2:
        raise DomainError("fewer than two cells after pooling; not enough spread to test")
    obs_arr = np.array(obs_bins)
    exp_arr = np.array(exp_bins)
    exp_arr *= obs_arr.sum() / exp_arr.sum()
    res = stats.chisquare(obs_arr, exp_arr)
    return _report_geq(
        name, res.pvalue, alpha, f"{len(obs_bins)} cells, n = {n}, chi2 = {res.statistic:.4g}"
    )


def chi_square_two_sample(
    a,
    b,
    alpha: float = 0.01,
    min_total: float = 10.0,
    name: str = "chi-square two-sample",
) -> CheckReport:
    """Homogeneity test for two samples of hashable categories.

    Categories whose combined count falls below ``min_total`` are pooled
    into a single bucket (in sorted category order, so the pooling is
    deterministic), then a 2 x C contingency test without continuity
    correction decides.
    """
    a = list(a)
    b = list(b)
    if not a or not b:
        raise DomainError("two-sample test needs nonempty samples")
    cats = sorted({*a, *b})
    ca = {c: 0 for c in cats}
    cb = {c: 0 for c in cats}
    for v in a:
        ca[v] += 1
    for v in b:
        cb[v] += 1
    row_a: list[float] = []
    row_b: list[float] = []
    pool_a = 0
    pool_b = 0
    for c in cats:
        if ca[c] + cb[c] >= min_total:
            row_a.append(ca[c])
            row_b.append(cb[c])
        else:
            pool_a += ca[c]
            pool_b += cb[c]
    if pool_a + pool_b > 0:
        row_a.append(pool_a)
        row_b.append(pool_b)
    if len(row_a) < 2:
        # all mass in one cell: the samples agree as exactly as this test can see
        return _report_geq(name, 1.0, alpha, "one cell after pooling")
    res = stats.chi2_contingency(np.array([row_a, row_b]), correction=False)
    return _report_geq(
        name,
        res.pvalue,
        alpha,
        f"{len(row_a)} cells, n = {len(a)} vs {len(b)}, chi2 = {res.statistic:.4g}",
    )


# --- oracle checks ------------------------------------------------------------


def _quadrature_orders(entry, orders_fn_name, args, log_f, upper):
    if entry is not None:
        return getattr(entry, orders_fn_name)(*args)
    return probed_orders(log_f, upper)


def oracle_log_partition(prior: ExpCrmPrior, xi, lam: float, rel_tol: float = 1e-9) -> CheckReport:
    """Primary log-partition path against forced quadrature."""
    like = prior.likelihood
    xi = as_xi(xi)
    primary = log_partition_B(like, xi, lam)
    numeric = log_partition_B(like, xi, lam, rel_tol=rel_tol, force_numeric=True)
    err = abs(primary - numeric) / max(abs(numeric), 1.0)
    path = "closed form" if entry_for(like) is not None else "same quadrature (no closed form)"
    return _report_leq(
        f"log partition at (xi={xi[0]:g}, lam={lam:g})",
        err,
        1e-7,
        f"{path} {primary:.12g} vs quadrature {numeric:.12g}",
    )


def oracle_rate_M(prior: ExpCrmPrior, m: int, x: int, rel_tol: float = 1e-9) -> CheckReport:
    """Atom rate against quadrature of the literal product integrand."""
    like = prior.likelihood
    log_mass = math.log(prior.mass)

    def log_f(th):
        th = np.asarray(th, dtype=float)
        head = (m - 1) * like.log_pmf(0, th) if m > 1 else 0.0
        return (
            log_mass
            + like.log_pmf(x, th)
            + head
            + log_conjugate_kernel(like, prior.xi, prior.lam, th)
        )

    entry = entry_for(like)
    low, up = _quadrature_orders(
        entry, "rate_orders", (prior.xi, prior.lam, m, x), log_f, like.weight_domain.upper
    )
    spec = IntegrandSpec(
        log_f, upper=like.weight_domain.upper, lower_order=low, upper_order=up,
        name=f"literal rate integrand M({m},{x})",
    )
    numeric, _ = integrate(spec, rel_tol=rel_tol)
    primary = rate_M(prior, m, x)
    err = abs(primary - numeric) / max(abs(numeric), 1e-300)
    return _report_leq(
        f"atom rate M({m},{x})", err, 1e-7, f"primary {primary:.12g} vs quadrature {numeric:.12g}"
    )


def oracle_round_total(prior: ExpCrmPrior, m: int, rel_tol: float = 1e-9) -> CheckReport:
    """Round total against quadrature of mass * kappa * l0^(m-1) * (1 - l0)."""
    like = prior.likelihood
    log_mass = math.log(prior.mass)

    def log_f(th):
        th = np.asarray(th, dtype=float)
        lp0 = like.log_pmf(0, th)
        with np.errstate(divide="ignore"):
            gap = np.log(-np.expm1(lp0))
        head = (m - 1) * lp0 if m > 1 else 0.0
        return log_mass + head + gap + log_conjugate_kernel(like, prior.xi, prior.lam, th)

    entry = entry_for(like)
    low, up = _quadrature_orders(
        entry, "total_orders", (prior.xi, prior.lam, m), log_f, like.weight_domain.upper
    )
    spec = IntegrandSpec(
        log_f, upper=like.weight_domain.upper, lower_order=low, upper_order=up,
        name=f"literal round-{m} total",
    )
    numeric, _ = integrate(spec, rel_tol=rel_tol)
    primary = round_total(prior, m)
    err = abs(primary - numeric) / max(abs(numeric), 1e-300)
    return _report_leq(
        f"round total, round {m}", err, 1e-7,
        f"primary {primary:.12g} vs quadrature {numeric:.12g}",
    )


def oracle_predictive_pmf(
    prior: ExpCrmPrior, xi_eff, lam_eff: float, x_hi: int = 6, rel_tol: float = 1e-9
) -> CheckReport:
    """Predictive pmf against a ratio of literal quadratures.

    Numerator: integral of l(x|theta) kappa(theta; xi_eff, lam_eff);
    denominator: integral of the kernel itself.
    """
    like = prior.likelihood
    xi_eff = as_xi(xi_eff)
    entry = entry_for(like)
    upper = like.weight_domain.upper

    def log_kernel(th):
        return log_conjugate_kernel(like, xi_eff, lam_eff, np.asarray(th, dtype=float))

    low, up = _quadrature_orders(entry, "kernel_orders", (xi_eff, lam_eff), log_kernel, upper)
    denom, _ = integrate(
        IntegrandSpec(log_kernel, upper=upper, lower_order=low, upper_order=up, name="kernel mass"),
        rel_tol=rel_tol,
    )

    bound = like.support_bound
    xs = [x for x in range(0, x_hi + 1) if bound is None or x <= bound]
    worst = 0.0
    rows = []
    primary = np.exp(predictive_logpmf(like, xi_eff, lam_eff, np.array(xs)))
    for x, p in zip(xs, primary):
        def log_f(th, _x=x):
            th = np.asarray(th, dtype=float)
            return like.log_pmf(_x, th) + log_conjugate_kernel(like, xi_eff, lam_eff, th)

        if x == 0:
            # l(0|theta) kappa is the kernel with one more unit of lam, since
            # phi(0) = 0 for every registered family; probe when unregistered
            if entry is not None:
                lo_x, up_x = _pmf0_orders(entry, xi_eff, lam_eff)
            else:
                lo_x, up_x = probed_orders(log_f, upper)
        else:
            lo_x, up_x = _quadrature_orders(
                entry, "rate_orders", (xi_eff, lam_eff, 1, x), log_f, upper
            )
        numer, _ = integrate(
            IntegrandSpec(log_f, upper=upper, lower_order=lo_x, upper_order=up_x,
                          name=f"predictive numerator x={x}"),
            rel_tol=rel_tol,
        )
        ratio = numer / denom
        err = abs(p - ratio) / max(abs(ratio), 1e-300)
        worst = max(worst, err)
        rows.append(f"x={x}: {p:.9g} vs {ratio:.9g}")
    return _report_leq(
        f"predictive pmf at (xi={xi_eff[0]:g}, lam={lam_eff:g})",
        worst,
        1e-7,
        "; ".join(rows),
    )


def _pmf0_orders(entry, xi_eff, lam_eff: float):
    """Endpoint orders of l(0|theta) * kappa for a catalog family."""
    return entry.kernel_orders(xi_eff, lam_eff + 1.0)


def oracle_weight_law(
    prior: ExpCrmPrior,
    xi,
    lam: float,
    reps: int = 4000,
    seed: int = 0,
    alpha: float = 0.01,
) -> CheckReport:
    """KS of the package's weight draws against an independent numeric cdf.

    The reference cdf is tabulated from the conjugate kernel by panel
    quadrature, with no knowledge of which named distribution the catalog
    sampler uses; heavy tails are fine because nothing here needs moments.
    """
    like = prior.likelihood
    xi = as_xi(xi)
    entry = entry_for(like)
    gen = RngState(seed, stream=17).generator()
    if entry is not None:
        draws = entry.sample_weights(gen, xi, lam, reps)
    else:
        draws = _NumericWeightSampler(like, xi, lam).sample(gen, reps)
    reference = _NumericWeightSampler(like, xi, lam)
    res = stats.kstest(draws, reference.cdf)
    return _report_geq(
        f"weight law at (xi={xi[0]:g}, lam={lam:g})",
        res.pvalue,
        alpha,
        f"n = {reps}, D = {res.statistic:.4g}",
    )


def _oracle_cells(prior: ExpCrmPrior) -> list[tuple[int, int]]:
    bound = prior.likelihood.support_bound
    cells = [(1, 1), (1, 2), (2, 1), (3, 2)]
    return [(m, x) for m, x in cells if bound is None or x <= bound]


def oracle_suite(prior: ExpCrmPrior, seed: int = 0, reps: int = 4000) -> list[CheckReport]:
    """All oracle checks at deterministic probe points derived from the prior."""
    reports = []
    cells = _oracle_cells(prior)
    for m, x in cells:
        xi_mx, lam_mx = weight_dist_params(prior, m, x)
        reports.append(oracle_log_partition(prior, xi_mx, lam_mx))
    for m, x in cells:
        reports.append(oracle_rate_M(prior, m, x))
    for m in (1, 2, 3):
        reports.append(oracle_round_total(prior, m))
    xi_11, lam_11 = weight_dist_params(prior, 1, 1)
    reports.append(oracle_predictive_pmf(prior, xi_11, lam_11))
    reports.append(oracle_weight_law(prior, xi_11, lam_11, reps=reps, seed=seed))
    return reports


# --- sampler equivalence ------------------------------------------------------


def equivalence_run(
    prior: ExpCrmPrior,
    n_steps: int = 3,
    reps: int = 2000,
    seed: int = 0,
    x_max: int = 50,
    eps_tail: float = 1e-6,
    alpha: float = 0.01,
) -> list[CheckReport]:
    """Compare the two generative processes on their common statistics.

    For each round n <= n_steps, the size-biased sampler's round-n atoms
    and the marginal stream's step-n first appearances must share the
    joint law of (atom count, count sum); each round gets a two-sample
    chi-square report.  Both samplers run under the same truncation so
    the comparison is exact, not asymptotic.
    """
    if reps < 100:
        raise DomainError("equivalence needs at least 100 replicates per sampler")
    sb = SizeBiasedSampler(prior, SizeBiasedConfig(m_max=n_steps, x_max=x_max, eps_tail=eps_tail))
    mg = MarginalSampler(prior, MarginalConfig(x_max=x_max, eps_tail=eps_tail))
    fixed_locs = {a.location.value for a in prior.fixed_atoms}
    sb_stats: list[list] = [[] for _ in range(n_steps)]
    mg_stats: list[list] = [[] for _ in range(n_steps)]
    for r in range(reps):
        labeled = sb.draw_labeled(RngState(seed, stream=2 * r))
        for n in range(1, n_steps + 1):
            mask = labeled.rounds == n
            sb_stats[n - 1].append((int(mask.sum()), int(labeled.counts[mask].sum())))
        seen = set(fixed_locs)
        for n, obs in enumerate(mg.sample(n_steps, RngState(seed, stream=2 * r + 1)), start=1):
            births = [a.count for a in obs.atoms if a.location.value not in seen]
            mg_stats[n - 1].append((len(births), int(sum(births))))
            seen.update(a.location.value for a in obs.atoms)
    return [
        chi_square_two_sample(
            sb_stats[n - 1],
            mg_stats[n - 1],
            alpha=alpha,
            name=f"size-biased vs marginal, round {n} (atoms, count sum)",
        )
        for n in range(1, n_steps + 1)
    ]


# --- entry point ---------------------------------------------------------------


_SUITES = ("assumptions", "oracle", "equivalence")


def run_suite(
    prior: ExpCrmPrior,
    suite: str,
    seed: int = 0,
    reps: int = 2000,
    alpha: float = 0.01,
) -> list[CheckReport]:
    """Run one named verification suite and return its reports."""
    if suite == "assumptions":
        return check_assumptions(prior)
    if suite == "oracle":
        return oracle_suite(prior, seed=seed, reps=max(reps, 1000))
    if suite == "equivalence":
        return equivalence_run(prior, reps=reps, seed=seed, alpha=alpha)
    raise DomainError(f"unknown suite {suite!r}; choose one of {', '.join(_SUITES)}")
