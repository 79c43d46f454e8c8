"""Error and disturbance for the pointer model, with the inequality suite.

The error operator N(t) = X(t) - x and disturbance operator D(t) = p(t) - p
have exact closed forms under the pointer coupling (N(t) = X + (t-1)x,
D(t) = -t P in terms of initial operators), so every moment reduces to
initial-state moments of a product state.  The reports here are computed
that way, with the operator expressions taken from the symbolic engine
rather than re-derived by hand; a 4D propagation cross-checks one
configuration in the test suite.

Spreads of the conjugate variables obey the Kennard-Robertson bound, and
the pi_x-disturbance obeys the hbar-independent product inequality

    epsilon * eta_pi_x + epsilon * sigma(pi_x) + sigma(x) * eta_pi_x >= 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import algebra
from .errors import NonHermitianObservable
from .phasespace import Observable, PhaseState, expectation, sigma

_TARGET_GENS = ("x", "p", "pi_x", "pi_p")
_DEVICE_GENS = ("X", "P", "pi_X", "pi_P")
_DEVICE_LOCAL = {"X": "x", "P": "p", "pi_X": "pi_x", "pi_P": "pi_p"}

_TOL = 1e-9


def _coeff_complex(coeff):
    return complex(float(coeff[0]), float(coeff[1]))


def _monomial_obs(names_and_powers):
    return Observable(((1.0, tuple(names_and_powers)),))


def expectation_of_expr(expr, target: PhaseState, device: PhaseState = None) -> complex:
    """<expr> on a product state, term by term.

    ``expr`` must be free of formal scalars and the Planck pair; target and
    device factors of each monomial are evaluated on their own states and
    multiplied (product-state factorization).
    """
    total = 0.0 + 0.0j
    for key, coeff in expr.terms.items():
        if any(key[algebra._SLOT[n]] for n in ("h_op", "I_op", "hbar", "t")):
            raise ValueError("expression still contains formal scalars or the Planck pair")
        value = _coeff_complex(coeff)
        t_pows = [(n, key[algebra._SLOT[n]]) for n in _TARGET_GENS if key[algebra._SLOT[n]]]
        d_pows = [(n, key[algebra._SLOT[n]]) for n in _DEVICE_GENS if key[algebra._SLOT[n]]]
        if t_pows:
            value *= expectation(target, _monomial_obs(t_pows))
        if d_pows:
            if device is None:
                raise ValueError("expression references device operators, no device given")
            local = [(_DEVICE_LOCAL[n], e) for n, e in d_pows]
            value *= expectation(device, _monomial_obs(local))
        total += value
    return total


def _pointer_operators(t):
    """Exact Heisenberg forms of N, D and the pi_x disturbance at time t."""
    l = algebra.liouvillian_of(
        algebra.multiply(algebra.x, algebra.P), subsystems=("target", "device")
    )
    t_frac = Fraction(t)
    n_op = algebra.heisenberg_evolve(algebra.X, l, t=t_frac, term_bound=4) - algebra.x
    d_op = algebra.heisenberg_evolve(algebra.p, l, t=t_frac, term_bound=4) - algebra.p
    d_pix = algebra.heisenberg_evolve(algebra.pi_x, l, t=t_frac, term_bound=4) - algebra.pi_x
    return n_op, d_op, d_pix


@dataclass
class EDReport:
    """Error, disturbances, spreads, and inequality slacks at one time."""

    t: float
    epsilon: float
    eta: float
    eta_pi_x: float
    sigma_x: float
    sigma_p: float
    sigma_pi_x: float
    comm_ND: complex
    slack_trivial: float
    slack_ozawa_like: float
    unbiased: bool
    mean_error: float = 0.0
    mean_disturbance: float = 0.0

    CSV_FIELDS = (
        "t", "epsilon", "eta", "eta_pi_x", "sigma_x", "sigma_p", "sigma_pi_x",
        "slack_trivial", "slack_ozawa_like", "unbiased",
    )

    def csv_row(self):
        vals = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            vals.append(str(int(v)) if isinstance(v, bool) else f"{v:.17g}")
        return ",".join(vals)


def reports_to_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(",".join(EDReport.CSV_FIELDS) + "\n")
        for r in reports:
            fh.write(r.csv_row() + "\n")


def error_disturbance(target: PhaseState, device: PhaseState, t) -> EDReport:
    """Moments of the error and disturbance operators on a product state.

    All second moments come from the exact Heisenberg closed forms
    evaluated against the initial states; nothing is propagated.
    """
    t = float(t)
    n_op, d_op, d_pix = _pointer_operators(t)

    eps_sq = expectation_of_expr(algebra.multiply(n_op, n_op), target, device).real
    eta_sq = expectation_of_expr(algebra.multiply(d_op, d_op), target, device).real
    eta_pix_sq = expectation_of_expr(algebra.multiply(d_pix, d_pix), target, device).real
    comm_nd = expectation_of_expr(algebra.commutator(n_op, d_op), target, device)

    epsilon = math.sqrt(max(eps_sq, 0.0))
    eta = math.sqrt(max(eta_sq, 0.0))
    eta_pix = math.sqrt(max(eta_pix_sq, 0.0))
    sig_x = sigma(target, "x")
    sig_p = sigma(target, "p")
    sig_pix = sigma(target, "pi_x")

    mean_err = expectation_of_expr(n_op, target, device).real
    mean_dist = expectation_of_expr(d_op, target, device).real
    mean_x = expectation(target, "x")
    mean_X = expectation(device, "x")
    mean_P = expectation(device, "p")
    unbiased = abs(mean_X - (1.0 - t) * mean_x) <= _TOL and abs(mean_P) <= _TOL

    slack_trivial = min(epsilon * eta, epsilon * sig_p + eta * sig_x)
    slack_ozawa = epsilon * eta_pix + epsilon * sig_pix + sig_x * eta_pix - 0.5

    return EDReport(
        t=t,
        epsilon=epsilon,
        eta=eta,
        eta_pi_x=eta_pix,
        sigma_x=sig_x,
        sigma_p=sig_p,
        sigma_pi_x=sig_pix,
        comm_ND=comm_nd,
        slack_trivial=slack_trivial,
        slack_ozawa_like=slack_ozawa,
        unbiased=unbiased,
        mean_error=mean_err,
        mean_disturbance=mean_dist,
    )


@dataclass(frozen=True)
class TrivialCheck:
    product_holds: bool
    sum_holds: bool
    product_is_tight: bool
    sum_is_tight: bool


def check_trivial(report: EDReport, tight_tol=1e-12) -> TrivialCheck:
    """The two sign-trivial inequalities eps*eta >= 0, eps*sig(p)+eta*sig(x) >= 0.

    Both hold by non-negativity; the check reports where equality is
    attained (error or disturbance switched off).
    """
    prod = report.epsilon * report.eta
    mixed = report.epsilon * report.sigma_p + report.eta * report.sigma_x
    return TrivialCheck(
        product_holds=prod >= -tight_tol,
        sum_holds=mixed >= -tight_tol,
        product_is_tight=abs(prod) <= tight_tol,
        sum_is_tight=abs(mixed) <= tight_tol,
    )


def check_ozawa_like(report: EDReport) -> float:
    """Slack of the hbar-independent product inequality; >= -1e-8 is required."""
    return (
        report.epsilon * report.eta_pi_x
        + report.epsilon * report.sigma_pi_x
        + report.sigma_x * report.eta_pi_x
        - 0.5
    )


_OBS_GEN = {
    "x": algebra.x,
    "p": algebra.p,
    "pi_x": algebra.pi_x,
    "pi_p": algebra.pi_p,
}


def _observable_to_expr(obs):
    obs = Observable.parse(obs)
    out = algebra.OperatorExpr.zero()
    for coeff, powers in obs.terms:
        term = algebra.OperatorExpr.scalar(Fraction(coeff))
        for name, e in powers:
            if name not in _OBS_GEN:
                raise NonHermitianObservable(f"unsupported observable factor {name!r}")
            for _ in range(e):
                term = algebra.multiply(term, _OBS_GEN[name])
        out = out + term
    return out


def kennard_robertson(s: PhaseState, a, b):
    """(lhs, rhs, holds) for sigma(a)*sigma(b) >= |<[a,b]>| / 2.

    The commutator is taken symbolically and then evaluated on the state.
    """
    obs_a, obs_b = Observable.parse(a), Observable.parse(b)
    comm = algebra.commutator(_observable_to_expr(obs_a), _observable_to_expr(obs_b))
    rhs = 0.5 * abs(expectation_of_expr(comm, s))
    lhs = _sigma_obs(s, obs_a) * _sigma_obs(s, obs_b)
    return lhs, rhs, lhs >= rhs - _TOL


def _sigma_obs(s, obs):
    m1 = expectation(s, obs)
    sq = Observable(
        tuple(
            (ca * cb, _merge_powers(pa, pb))
            for ca, pa in obs.terms
            for cb, pb in obs.terms
        )
    )
    m2 = expectation(s, sq)
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def _merge_powers(pa, pb):
    acc = {}
    for name, e in tuple(pa) + tuple(pb):
        acc[name] = acc.get(name, 0) + e
    return tuple(sorted(acc.items()))


@dataclass
class UnbiasedRow:
    """One row of an unbiased-condition scan."""

    t: float
    unbiased: bool
    epsilon: float
    eta: float
    mean_error: float
    mean_disturbance: float
    zero_error_claim_holds: bool


def unbiased_scan(target: PhaseState, device: PhaseState, t_values) -> list:
    """Evaluate the distributional unbiased condition at each time.

    Where the condition holds, the mean error and disturbance vanish (this
    is asserted).  ``zero_error_claim_holds`` records the stronger claim
    that the error and disturbance magnitudes themselves vanish there; it
    is true only for point-like states and is reported, not enforced.
    """
    rows = []
    for t in t_values:
        rep = error_disturbance(target, device, t)
        if rep.unbiased:
            if abs(rep.mean_error) > 1e-8 or abs(rep.mean_disturbance) > 1e-8:
                raise AssertionError(
                    "unbiased condition must force vanishing mean error/disturbance"
                )
        claim = (
            rep.unbiased
            and rep.epsilon <= 1e-8
            and rep.eta <= 1e-8
            and rep.sigma_x <= 1e-8
            and rep.sigma_p <= 1e-8
        )
        rows.append(
            UnbiasedRow(
                t=float(t),
                unbiased=rep.unbiased,
                epsilon=rep.epsilon,
                eta=rep.eta,
                mean_error=rep.mean_error,
                mean_disturbance=rep.mean_disturbance,
                zero_error_claim_holds=claim,
            )
        )
    return rows
