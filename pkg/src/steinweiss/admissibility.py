"""Exponent relations, hypothesis checks, and closed-form Hardy integrals.

The boundary exponent p, interior exponent q', kernel order gamma and the
weight powers alpha, beta are tied together by the dimensional balance

    (n-1)/(n*p) + 1/q' + (alpha + beta + 2 - gamma)/n = 1,

and the dual exponent q of the forward operator satisfies
1/q = (n-1)/(n*p) + (alpha + beta + 2 - gamma)/n, which makes q the
Hoelder conjugate of q'.  Everything in this module is exact arithmetic
on floats; equality relations are accepted at |slack| < 1e-12.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import DivergentIntegral, NonPositiveExponent

EQUALITY_TOL = 1e-12


def sphere_area(m: int) -> float:
    """Surface area of the unit sphere S^(m-1) in R^m."""
    if m < 1:
        raise ValueError(f"sphere dimension m must be >= 1, got {m}")
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


def unit_ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    return sphere_area(m) / m


@dataclass(frozen=True)
class Params:
    """One parameter set (n, p, q', alpha, beta, gamma) with derived exponents.

    Construction does not assert admissibility; see :func:`check_admissible`.
    """

    n: int
    p: float
    qprime: float
    alpha: float
    beta: float
    gamma: float
    q: float
    pprime: float
    s_kernel: float

    @classmethod
    def from_primary(cls, n: int, p: float, qprime: float, alpha: float,
                     beta: float, gamma: float) -> "Params":
        """Build a Params with q, p', s derived from the primary fields."""
        inv_q = (n - 1) / (n * p) + (alpha + beta + 2.0 - gamma) / n
        if inv_q <= 0.0:
            raise NonPositiveExponent(
                f"1/q = {inv_q} <= 0: dual exponent q has no value in (1, inf)")
        return cls(n=n, p=p, qprime=qprime, alpha=alpha, beta=beta,
                   gamma=gamma, q=1.0 / inv_q, pprime=p / (p - 1.0),
                   s_kernel=(n + 2.0 - gamma) / 2.0)


class SystemKind(enum.Enum):
    DOUBLE_WEIGHTED = "double"
    SINGLE_WEIGHTED = "single"


@dataclass(frozen=True)
class SystemExponents:
    """Powers (p0, q0) of an integral system, plus the inherited weights."""

    p0: float
    q0: float
    kind: SystemKind
    alpha: float
    beta: float
    gamma: float
    n: int


@dataclass(frozen=True)
class ConditionReport:
    name: str
    statement: str
    slack: float
    passed: bool


@dataclass
class AdmissibilityReport:
    conditions: list[ConditionReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def add(self, name: str, statement: str, slack: float, passed: bool) -> None:
        self.conditions.append(ConditionReport(name, statement, slack, passed))

    def failing(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "conditions": [
                {"name": c.name, "statement": c.statement,
                 "slack": c.slack, "passed": c.passed}
                for c in self.conditions
            ],
        }


def derive_exponents(n: int, p: float, gamma: float, alpha: float,
                     beta: float) -> Params:
    """Solve the exponent balance for q' and q given (n, p, gamma, alpha, beta).

    Raises NonPositiveExponent when the solved q' or q falls outside (1, inf).
    Admissibility beyond that is not asserted here.
    """
    if n < 3:
        raise NonPositiveExponent(f"dimension n must be >= 3, got {n}")
    if p <= 1.0:
        raise NonPositiveExponent(f"boundary exponent p must exceed 1, got {p}")
    if not (2.0 <= gamma < n):
        raise NonPositiveExponent(f"kernel order gamma must lie in [2, n), got {gamma}")
    inv_qprime = 1.0 - (n - 1) / (n * p) - (alpha + beta + 2.0 - gamma) / n
    if inv_qprime <= 0.0 or inv_qprime >= 1.0:
        raise NonPositiveExponent(
            f"solved 1/q' = {inv_qprime} outside (0, 1): no q' in (1, inf)")
    inv_q = 1.0 - inv_qprime
    if inv_q <= 0.0 or inv_q >= 1.0:
        raise NonPositiveExponent(f"solved 1/q = {inv_q} outside (0, 1)")
    return Params(n=n, p=p, qprime=1.0 / inv_qprime, alpha=alpha, beta=beta,
                  gamma=gamma, q=1.0 / inv_q, pprime=p / (p - 1.0),
                  s_kernel=(n + 2.0 - gamma) / 2.0)


def check_admissible(params: Params) -> AdmissibilityReport:
    """One report line per hypothesis of the weighted inequality.

    Strict inequalities fail at zero slack; the non-strict ones pass there.
    Failures are report lines, never exceptions.
    """
    n, p, qp = params.n, params.p, params.qprime
    a, b, g = params.alpha, params.beta, params.gamma
    rep = AdmissibilityReport()

    rel = (n - 1) / (n * p) + 1.0 / qp + (a + b + 2.0 - g) / n - 1.0
    rep.add("exponent_relation",
            "(n-1)/(n p) + 1/q' + (alpha+beta+2-gamma)/n = 1",
            abs(rel), abs(rel) < EQUALITY_TOL)

    inv_q = (n - 1) / (n * p) + (a + b + 2.0 - g) / n
    q_gap = abs(1.0 / params.q - inv_q)
    rep.add("q_consistency", "1/q = (n-1)/(n p) + (alpha+beta+2-gamma)/n",
            q_gap, q_gap < EQUALITY_TOL)

    pp_gap = abs(1.0 / params.pprime - (1.0 - 1.0 / p))
    rep.add("pprime_consistency", "1/p' = 1 - 1/p", pp_gap, pp_gap < EQUALITY_TOL)

    rep.add("p_range", "1 < p < inf", p - 1.0,
            p > 1.0 and math.isfinite(p))
    rep.add("qprime_range", "1 < q' < inf", qp - 1.0,
            qp > 1.0 and math.isfinite(qp))
    rep.add("gamma_range", "2 <= gamma < n", min(g - 2.0, n - g),
            g >= 2.0 and g < n)

    sub = (n - 1) / (n * p) + 1.0 / qp - 1.0
    rep.add("subcritical", "(n-1)/(n p) + 1/q' >= 1", sub, sub >= 0.0)

    alpha_slack = (n - 1) / params.pprime - a
    rep.add("alpha_bound", "alpha < (n-1)/p'", alpha_slack, alpha_slack > 0.0)

    beta_slack = n / params.q + 1.0 - b
    rep.add("beta_bound", "beta < n/q + 1", beta_slack, beta_slack > 0.0)

    rep.add("weight_sum", "alpha + beta >= 0", a + b, a + b >= 0.0)
    return rep


def check_system(sys: SystemExponents) -> AdmissibilityReport:
    """Verify the kind-specific balance relation and positivity of (p0, q0)."""
    n, a, b, g = sys.n, sys.alpha, sys.beta, sys.gamma
    rep = AdmissibilityReport()
    if sys.kind is SystemKind.DOUBLE_WEIGHTED:
        lhs = (n - 1) / (n * (sys.p0 + 1.0)) + 1.0 / (sys.q0 + 1.0)
        rhs = (n + a + b + 1.0 - g) / n
        rep.add("double_weighted_relation",
                "(n-1)/(n (p0+1)) + 1/(q0+1) = (n+alpha+beta+1-gamma)/n",
                abs(lhs - rhs), abs(lhs - rhs) < EQUALITY_TOL)
    else:
        lhs = (n - 1.0 - a) / (sys.p0 + 1.0) + (n - b) / (sys.q0 + 1.0)
        rhs = n + 1.0 - g
        rep.add("single_weighted_balance",
                "(n-1-alpha)/(p0+1) + (n-beta)/(q0+1) = n+1-gamma",
                abs(lhs - rhs), abs(lhs - rhs) < EQUALITY_TOL)
    rep.add("p0_positive", "p0 > 0", sys.p0, sys.p0 > 0.0)
    rep.add("q0_positive", "q0 > 0", sys.q0, sys.q0 > 0.0)
    return rep


def check_asymptotic_hypothesis(sys: SystemExponents) -> tuple[bool, bool]:
    """Flags (boundary_ok, interior_ok) for the small-argument limit laws.

    The boundary limit of u(xi)|xi|^alpha requires p0, q0 > 1 and
    1/q0 - (n+1+beta-gamma)/(q0 n) > (beta-1)/n; the interior limit of
    v(x)|x|^beta / x_n requires p0, q0 > 1 and
    1/p0 - (n+2+alpha-gamma)/(p0 (n-1)) > alpha/(n-1).
    """
    n, a, b, g = sys.n, sys.alpha, sys.beta, sys.gamma
    base = sys.p0 > 1.0 and sys.q0 > 1.0
    boundary_ok = base and (
        1.0 / sys.q0 - (n + 1.0 + b - g) / (sys.q0 * n) > (b - 1.0) / n)
    interior_ok = base and (
        1.0 / sys.p0 - (n + 2.0 + a - g) / (sys.p0 * (n - 1)) > a / (n - 1))
    return boundary_ok, interior_ok


def hardy_tail_integral(R: float, mu: float, n: int) -> float:
    """Exact value of the tail integral of |x|^(-mu) over the half-space.

    Integral of |x|^(-mu) over {|x| >= R, x_n > 0}; converges iff mu > n.
    """
    if R <= 0.0:
        raise ValueError(f"R must be positive, got {R}")
    if mu <= n:
        raise DivergentIntegral(
            f"half-space tail integral diverges: mu = {mu} <= n = {n}")
    return 0.5 * sphere_area(n) * R ** (n - mu) / (mu - n)


def hardy_ball_integral(R: float, nu: float, n: int) -> float:
    """Exact value of the ball integral of |xi|^(-nu) over the boundary.

    Integral of |xi|^(-nu) over {|xi| <= R} in R^(n-1); converges iff nu < n-1.
    """
    if R <= 0.0:
        raise ValueError(f"R must be positive, got {R}")
    if nu >= n - 1:
        raise DivergentIntegral(
            f"boundary ball integral diverges: nu = {nu} >= n-1 = {n - 1}")
    return sphere_area(n - 1) * R ** (n - 1 - nu) / (n - 1 - nu)


def _halfspace_ball_integral(R: float, mu: float, n: int) -> float:
    """Integral of |x|^(-mu) over {|x| <= R, x_n > 0}; converges iff mu < n."""
    if mu >= n:
        raise DivergentIntegral(
            f"half-space ball integral diverges: mu = {mu} >= n = {n}")
    return 0.5 * sphere_area(n) * R ** (n - mu) / (n - mu)


def _boundary_tail_integral(R: float, nu: float, n: int) -> float:
    """Integral of |xi|^(-nu) over {|xi| >= R} in R^(n-1); needs nu > n-1."""
    if nu <= n - 1:
        raise DivergentIntegral(
            f"boundary tail integral diverges: nu = {nu} <= n-1 = {n - 1}")
    return sphere_area(n - 1) * R ** (n - 1 - nu) / (nu - (n - 1))


def hardy_products(params: Params, R_list: list[float]) -> list[tuple[float, float]]:
    """Hardy sup-products for the near-origin and far-field weight pairs.

    For each R returns (A0_factor, A1_factor).  A0 pairs the half-space tail
    of W(x) = |x|^(-beta q - (n+1-gamma) q) with the boundary ball of the
    dualized weight |xi|^(-alpha p'); A1 swaps tail and ball for the
    far-field weights W(x) = |x|^((1-beta) q), U(xi) = |xi|^((n+2-gamma+alpha)p).
    Under the exponent balance both products are independent of R.
    """
    n, p, q, pp = params.n, params.p, params.q, params.pprime
    a, b, g = params.alpha, params.beta, params.gamma
    # U^(1-p') turns |xi|^(c p) into |xi|^(-c p'), since p (p'-1) = p'.
    mu0 = (b + (n + 1.0 - g)) * q
    nu0 = a * pp
    mu1 = (b - 1.0) * q
    nu1 = (n + 2.0 - g + a) * pp
    out = []
    for R in R_list:
        a0 = (hardy_tail_integral(R, mu0, n) ** (1.0 / q)
              * hardy_ball_integral(R, nu0, n) ** (1.0 / pp))
        a1 = (_halfspace_ball_integral(R, mu1, n) ** (1.0 / q)
              * _boundary_tail_integral(R, nu1, n) ** (1.0 / pp))
        out.append((a0, a1))
    return out
