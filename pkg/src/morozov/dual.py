"""Dual function of the discrepancy constraint and its maximization.

The dual function is the optimal value of the inner problem at each
multiplier,

    D(lam) = inf_f  J(f) + lam * (||A f - g||^2 - epsilon),

with D(0) = 0 and right derivative D'(0) = ||g||^2 - epsilon. As an
infimum of affine functions of lam, D is concave, and for quadratic
penalties it is differentiable with

    D'(lam) = ||A f_lam - g||^2 - epsilon.

Maximizing D produces the multiplier at which the discrepancy equation
||A f - g||^2 = epsilon holds, i.e. the Tikhonov weight alpha = 1/lam
selected by the discrepancy principle. A maximizer exists exactly when

    dist(g, range(A)) < tau < ||g||        (tau = sqrt(epsilon)),

and ``diagnose_regime`` classifies problems accordingly: "interior" when
the inequality chain holds, "noise_dominates" when tau >= ||g|| (D is
nonincreasing, dual maximum at 0), "too_optimistic" when
tau <= dist(g, range(A)) (D increases forever and no maximum is attained).

D' is nonincreasing, so the default maximization brackets a sign change
of D' and bisects; that is globally convergent and tolerance-controlled.
Secant refinement and plain gradient ascent, lam <- lam + rho_n D'(lam)
started from 0, are available as alternatives.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionViolation,
    BracketFailure,
    ConvergenceFailure,
    RegimeError,
)
from .lagrange import LAMBDA_MAX, Lagrangian, lagrangian_value, solve_lagrange
from .linops import distance_to_range, residual_norm_sq
from .regularizers import check_assumptions

__all__ = [
    "DualEvaluation",
    "RegimeDiagnosis",
    "SelectionResult",
    "VerificationReport",
    "eval_dual",
    "diagnose_regime",
    "failed_inequality",
    "maximize_dual",
    "sweep_dual",
    "verify_morozov_solution",
    "concavity_defects",
]

log = logging.getLogger(__name__)

_BRACKET_FLOOR = 1e-300


@dataclass(frozen=True)
class DualEvaluation:
    """D and D' at one multiplier, with the inner solution when lam > 0."""

    lam: float
    d_value: float
    d_prime: float
    solution: object = None
    error: str = None


@dataclass(frozen=True)
class RegimeDiagnosis:
    """Where the tolerance sits relative to the attainable discrepancies."""

    dist_to_range: float
    data_norm: float
    tau: float
    regime: str  # "interior" | "noise_dominates" | "too_optimistic"


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of the dual maximization.

    ``iterations`` records every multiplier visited as (lam, D, D')
    triples, bracketing steps included. ``alpha`` is defined as
    ``1.0 / lambda_star``.
    """

    lambda_star: float
    alpha: float
    f_star: np.ndarray
    discrepancy: float
    iterations: list
    method: str
    converged: bool


@dataclass(frozen=True)
class VerificationReport:
    """Re-checks of a converged selection; one dict per check."""

    passed: bool
    checks: list = field(default_factory=list)

    def failed_items(self):
        return [c["name"] for c in self.checks if not c["passed"]]


def eval_dual(lag: Lagrangian, lam, solver=None, tol=1e-10):
    """Evaluate D and D' at one multiplier.

    At lam = 0 no inner solve is attempted: D(0) = 0 and the right
    derivative is ||g||^2 - epsilon. For lam > 0 the inner problem is
    solved (direct factorization for dense operators by default,
    conjugate gradient otherwise) and

        D(lam) = J(f_lam) + lam * D'(lam),
        D'(lam) = ||A f_lam - g||^2 - epsilon.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if lam == 0:
        g = lag.data
        return DualEvaluation(
            lam=0.0, d_value=0.0, d_prime=float(g @ g) - lag.epsilon
        )
    if solver is None:
        solver = "direct" if _all_dense(lag) else "iterative"
    sol = solve_lagrange(lag, lam, solver=solver, tol=tol)
    d_prime = sol.discrepancy_sq - lag.epsilon
    d_value = sol.j_value + lam * d_prime
    return DualEvaluation(lam=float(lam), d_value=d_value, d_prime=d_prime, solution=sol)


def _all_dense(lag):
    return lag.op.is_dense and lag.regularizer.seminorm_operator.is_dense


def diagnose_regime(op, g, tau, dist_tol=1e-10):
    """Classify where tau falls in dist(g, range(A)) < tau < ||g||.

    Equalities are classified into the failing regime, since the
    existence guarantee needs strict inequalities. When both boundary
    cases coincide (tau = ||g|| = dist), noise_dominates wins.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    g = np.asarray(g, dtype=np.float64)
    dist = distance_to_range(op, g, tol=dist_tol)
    data_norm = float(np.linalg.norm(g))
    if tau >= data_norm:
        regime = "noise_dominates"
    elif tau <= dist:
        regime = "too_optimistic"
    else:
        regime = "interior"
    return RegimeDiagnosis(
        dist_to_range=dist, data_norm=data_norm, tau=float(tau), regime=regime
    )


def failed_inequality(diag: RegimeDiagnosis):
    """Human-readable statement of the violated inequality, or None."""
    if diag.regime == "noise_dominates":
        return (
            f"tau >= ||g|| (tau={diag.tau:g}, ||g||={diag.data_norm:g}): "
            "the data is dominated by the noise"
        )
    if diag.regime == "too_optimistic":
        return (
            f"tau <= dist(g, range(A)) (tau={diag.tau:g}, "
            f"dist={diag.dist_to_range:g}): the noise estimate is too optimistic"
        )
    return None


def maximize_dual(
    lag: Lagrangian,
    method="bisection",
    rtol=1e-8,
    max_iter=None,
    lambda_init=1.0,
    step_rule="inv_n",
    step_constant=2.0,
    solver=None,
    inner_tol=1e-10,
    override_regime=False,
):
    """Find the multiplier maximizing D, i.e. solve D'(lam) = 0.

    Convergence is declared when |D'(lam)| <= rtol * epsilon, which is
    the discrepancy equation ||A f - g||^2 = epsilon at relative
    tolerance rtol.

    Parameters
    ----------
    method : {"bisection", "secant", "gradient_ascent"}
        Bisection and secant bracket a sign change of D' by doubling or
        halving from ``lambda_init`` and then narrow it; both are
        globally convergent since D' is nonincreasing. Gradient ascent
        iterates lam <- max(lam + rho_n D'(lam), 0) from lam = 0 with
        rho_n given by ``step_rule``.
    max_iter : int or None
        None picks a per-method default: 200 for the bracketing methods,
        10000 for gradient ascent (the unaccelerated iteration needs
        far more steps for the same tolerance).
    step_rule : {"inv_n", "constant"}
        rho_n = step_constant / n, or rho_n = step_constant.
    override_regime : bool
        Skip the interior-regime gate (for experimentation; outside the
        interior regime the iteration cannot converge).

    Raises
    ------
    RegimeError
        If the problem is not in the interior regime (unless overridden).
    AssumptionViolation
        If the penalty is not strictly convex along ker(A) (dense
        operators are checked up front; matrix-free ones are trusted).
    BracketFailure
        If D' never changes sign below LAMBDA_MAX.
    ConvergenceFailure
        If ``max_iter`` is exhausted; the trace so far is attached.
    """
    if method not in ("bisection", "secant", "gradient_ascent"):
        raise ValueError(f"unknown method {method!r}")
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    if max_iter is None:
        max_iter = 10_000 if method == "gradient_ascent" else 200

    diag = diagnose_regime(lag.op, lag.data, lag.tau)
    if diag.regime != "interior":
        if not override_regime:
            raise RegimeError(
                f"regime is {diag.regime!r}, not interior: {failed_inequality(diag)}",
                regime=diag.regime,
            )
        log.warning("regime gate overridden: %s", diag.regime)

    if _all_dense(lag):
        report = check_assumptions(lag.regularizer, lag.op)
        if not report.strictly_convex_along_kernel:
            raise AssumptionViolation(
                "penalty is not strictly convex along ker(A) "
                f"(kernel intersection dimension {report.kernel_intersection_dim}); "
                "the selected reconstruction would not be unique"
            )
    else:
        log.debug("matrix-free operators: strict-convexity check skipped")

    trace = []
    d_tol = rtol * lag.epsilon

    def evaluate(lam):
        e = eval_dual(lag, lam, solver=solver, tol=inner_tol)
        trace.append((e.lam, e.d_value, e.d_prime))
        return e

    def finish(e):
        sol = e.solution
        return SelectionResult(
            lambda_star=e.lam,
            alpha=1.0 / e.lam,
            f_star=sol.f_lambda,
            discrepancy=float(math.sqrt(sol.discrepancy_sq)),
            iterations=trace,
            method=method,
            converged=True,
        )

    if method == "gradient_ascent":
        return _gradient_ascent(
            lag, evaluate, finish, d_tol, max_iter, step_rule, step_constant, trace
        )

    e_lo, e_hi, e_done = _bracket_sign_change(evaluate, lambda_init, d_tol, trace)
    if e_done is not None:
        return finish(e_done)

    lo, hi = e_lo.lam, e_hi.lam
    e_prev, e_curr = e_lo, e_hi  # two most recent evaluations, for secant
    for _ in range(max_iter):
        lam = 0.5 * (lo + hi)
        if method == "secant":
            denom = e_curr.d_prime - e_prev.d_prime
            if denom != 0.0:
                cand = e_curr.lam - e_curr.d_prime * (e_curr.lam - e_prev.lam) / denom
                if math.isfinite(cand) and lo < cand < hi:
                    lam = cand
        e = evaluate(lam)
        if abs(e.d_prime) <= d_tol:
            return finish(e)
        if e.d_prime > 0:
            lo = lam
        else:
            hi = lam
        e_prev, e_curr = e_curr, e
    raise ConvergenceFailure(
        f"{method} did not reach |D'| <= {d_tol:g} in {max_iter} iterations "
        f"(bracket [{lo:g}, {hi:g}])",
        trace=trace,
    )


def _bracket_sign_change(evaluate, lambda_init, d_tol, trace):
    """Find evaluations with D'(lo) > 0 > D'(hi) by doubling or halving.

    Returns (e_lo, e_hi, converged_eval); converged_eval is non-None when
    an endpoint already satisfies the tolerance.
    """
    if not 0 < lambda_init <= LAMBDA_MAX:
        raise ValueError(f"lambda_init must be in (0, {LAMBDA_MAX:g}]")
    e = evaluate(lambda_init)
    if abs(e.d_prime) <= d_tol:
        return None, None, e
    if e.d_prime > 0:
        e_lo = e
        while True:
            hi = 2.0 * e_lo.lam
            if hi > LAMBDA_MAX:
                raise BracketFailure(
                    f"D' still positive at lam={e_lo.lam:g}; no maximizer below "
                    f"LAMBDA_MAX={LAMBDA_MAX:g} (noise estimate too optimistic)",
                    trace=trace,
                )
            e = evaluate(hi)
            if abs(e.d_prime) <= d_tol:
                return None, None, e
            if e.d_prime < 0:
                return e_lo, e, None
            e_lo = e
    else:
        e_hi = e
        while True:
            lo = 0.5 * e_hi.lam
            if lo < _BRACKET_FLOOR:
                raise BracketFailure(
                    f"D' still negative at lam={e_hi.lam:g} down to {lo:g}; the "
                    "dual is nonincreasing (data dominated by noise)",
                    trace=trace,
                )
            e = evaluate(lo)
            if abs(e.d_prime) <= d_tol:
                return None, None, e
            if e.d_prime > 0:
                return e, e_hi, None
            e_hi = e


def _gradient_ascent(lag, evaluate, finish, d_tol, max_iter, step_rule, step_constant, trace):
    if step_rule not in ("inv_n", "constant"):
        raise ValueError(f"unknown step_rule {step_rule!r}")
    if step_constant <= 0:
        raise ValueError("step_constant must be positive")
    lam = 0.0
    e = evaluate(0.0)
    for n in range(1, max_iter + 1):
        rho = step_constant / n if step_rule == "inv_n" else step_constant
        lam = max(lam + rho * e.d_prime, 0.0)
        if lam > LAMBDA_MAX:
            raise ConvergenceFailure(
                f"gradient ascent escaped past LAMBDA_MAX={LAMBDA_MAX:g}",
                trace=trace,
            )
        e = evaluate(lam)
        if lam > 0 and abs(e.d_prime) <= d_tol:
            return finish(e)
    raise ConvergenceFailure(
        f"gradient ascent did not reach |D'| <= {d_tol:g} in {max_iter} "
        f"iterations (last lam={lam:g})",
        trace=trace,
    )


def sweep_dual(lag: Lagrangian, lambdas, solver=None, tol=1e-10):
    """Evaluate the dual on an ascending positive grid.

    Inner failures at single points are recorded on the returned
    evaluations (``error`` set, values NaN) and the sweep continues.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise ValueError("grid must be nonempty")
    if np.any(lambdas <= 0):
        raise ValueError("grid values must be positive")
    if np.any(np.diff(lambdas) <= 0):
        raise ValueError("grid must be strictly ascending")
    out = []
    for lam in lambdas:
        try:
            out.append(eval_dual(lag, float(lam), solver=solver, tol=tol))
        except (ConvergenceFailure, AssumptionViolation, ValueError) as exc:
            log.warning("sweep point lam=%g failed: %s", lam, exc)
            out.append(
                DualEvaluation(
                    lam=float(lam),
                    d_value=float("nan"),
                    d_prime=float("nan"),
                    error=str(exc),
                )
            )
    return out


def concavity_defects(lambdas, d_values):
    """Chord defects of sampled D; positive entries witness non-concavity.

    For each interior point the value is how far D sits *below* the chord
    of its neighbors (concavity puts it above), normalized for arbitrary
    grid spacing. On a uniform grid this is half the usual second
    difference.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    d = np.asarray(d_values, dtype=np.float64)
    if lam.shape != d.shape or lam.ndim != 1 or lam.size < 3:
        raise ValueError("need matching 1-d arrays with at least 3 points")
    l1, l2, l3 = lam[:-2], lam[1:-1], lam[2:]
    d1, d2, d3 = d[:-2], d[1:-1], d[2:]
    chord = ((l3 - l2) * d1 + (l2 - l1) * d3) / (l3 - l1)
    return chord - d2


def verify_morozov_solution(
    res: SelectionResult, lag: Lagrangian, rtol=1e-8, opt_tol=1e-8, n_probes=100, seed=0
):
    """Re-check a converged selection independently of how it was found.

    Checks, in order: (a) the discrepancy equation
    |  ||A f - g||^2 - epsilon | <= rtol * epsilon; (b) the stationarity
    residual ||grad J(f) + 2 lam (A^T A f - A^T g)|| against
    opt_tol * (1 + ||2 lam A^T g||); (c) minimality of the Lagrangian at
    f against ``n_probes`` random perturbations.

    Returns a report listing each check; nothing is raised on failure.
    """
    if not res.converged:
        raise ValueError("verification needs a converged SelectionResult")
    f = np.asarray(res.f_star, dtype=np.float64)
    lam = res.lambda_star
    A, g = lag.op, lag.data
    checks = []

    disc_sq = residual_norm_sq(A, f, g)
    disc_err = abs(disc_sq - lag.epsilon)
    checks.append(
        {
            "name": "discrepancy",
            "passed": bool(disc_err <= rtol * lag.epsilon),
            "value": disc_err,
            "threshold": rtol * lag.epsilon,
        }
    )

    grad = lag.regularizer.gradient(f) + 2.0 * lam * (A.gram_apply(f) - A.apply_adjoint(g))
    opt_res = float(np.linalg.norm(grad))
    opt_bound = opt_tol * (1.0 + float(np.linalg.norm(2.0 * lam * A.apply_adjoint(g))))
    checks.append(
        {
            "name": "optimality",
            "passed": bool(opt_res <= opt_bound),
            "value": opt_res,
            "threshold": opt_bound,
        }
    )

    rng = np.random.default_rng(seed)
    base = lagrangian_value(lag, f, lam)
    scale = 0.1 * (1.0 + float(np.linalg.norm(f)))
    slack = 1e-9 * (1.0 + abs(base))
    worst = 0.0
    ok = True
    for _ in range(n_probes):
        delta = rng.standard_normal(f.shape[0])
        delta *= scale / np.linalg.norm(delta)
        gap = base - lagrangian_value(lag, f + delta, lam)
        worst = max(worst, gap)
        if gap > slack:
            ok = False
    checks.append(
        {
            "name": "lagrangian_minimality",
            "passed": bool(ok),
            "value": worst,
            "threshold": slack,
        }
    )

    return VerificationReport(passed=all(c["passed"] for c in checks), checks=checks)
