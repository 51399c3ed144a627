"""Sufficient condition for a compactly supported potential drift to block a front.

Two algebraically equivalent forms are evaluated:

* ``PropositionForm`` works with the Sobolev exponents q, m, j and the
  radius delta of the ball on which the weighted energy is minimised;
* ``TheoremForm`` regroups the same quantities into three constants and
  the integer powers n - 1, n + 1 and n/(n + 1).

All drift summaries are taken in the gauge H(-x0) = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from scipy.optimize import minimize_scalar

from .drift import CrossSection, DriftSummary, concentrated, summarize
from .nonlinearity import NonlinearityConstants, gamma_tilde


class DimensionError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    pass


class Form(str, enum.Enum):
    THEOREM = "theorem"
    PROPOSITION = "prop"


@dataclass(frozen=True)
class Exponents:
    n: int
    q: Fraction
    p: Fraction
    m: Fraction
    j: Fraction

    def check(self) -> None:
        n = self.n
        assert self.q == Fraction(2 * n, n - 2)
        assert 1 / self.p == Fraction(1, 2) + 1 / self.j
        # m = 2n/(n-1) sits below the critical exponent np/(n-p), so W^{1,p} embeds in L^m
        assert self.m < n * self.p / (n - self.p)
        assert 2 < self.m < self.q
        assert 2 / (self.m - 2) == n - 1
        assert self.j / 2 == n + 1
        assert 2 * self.m / (self.j * (self.m - 2)) == Fraction(n, n + 1)


def exponents_for(n: int) -> Exponents:
    if int(n) != n or n < 3:
        raise DimensionError(f"the blocking criterion needs n >= 3, got n={n}")
    n = int(n)
    return Exponents(n, Fraction(2 * n, n - 2), Fraction(2 * (n + 1), n + 2), Fraction(2 * n, n - 1),
                     Fraction(2 * (n + 1)))


@dataclass(frozen=True)
class SobolevConstants:
    C1: float = 1.0
    C2: float = 1.0
    provenance: str = "configured"

    def __post_init__(self):
        if not (self.C1 > 0.0 and self.C2 > 0.0):
            raise ValueError("Sobolev constants must be positive")


@dataclass(frozen=True)
class CriterionReport:
    n: int
    q: str
    p: str
    m: str
    j: str
    alpha: float
    delta: float
    delta_def: float
    a_used: float
    nu: float
    beta: float
    gamma_const: float
    eta_const: float
    b_interp: float
    gamma_tilde_q: float
    gamma_tilde_m: float
    C_theorem_1: float
    C_theorem_2: float
    C_theorem_3: float
    net_drift: float
    sup_exp_neg: float
    exp_integral: float
    margin: float
    lhs: float
    rhs: float
    satisfied: bool
    form: str
    sobolev_C1: float
    sobolev_C2: float
    sobolev_provenance: str
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _f(x: Fraction) -> float:
    return float(x)


def _branch_terms(nc: NonlinearityConstants, sc: SobolevConstants, ds: DriftSummary, ex: Exponents,
                  *, variant: str = "proof"):
    """The two entries of the max in delta, before the final -1/(q-2) power."""
    q, p, m, j = map(_f, (ex.q, ex.p, ex.m, ex.j))
    a4 = nc.alpha / 4.0
    gq = gamma_tilde(nc, a4, q)
    if variant == "proof":
        gm = gamma_tilde(nc, a4, m)
        two = 2.0 ** _f((2 - ex.p) * ex.m / (2 * ex.p))
    elif variant == "def":
        gm = gamma_tilde(nc, nc.alpha / 2.0, m)
        two = 2.0 ** _f((2 - ex.q) * ex.m / (2 * ex.p))
    else:
        raise ValueError(variant)
    integral = ds.exp_integral_at(j / 2.0)
    first = gq * sc.C1**q
    G = gm * sc.C2**m * two * ds.sup_exp_neg * integral ** _f(ex.m / ex.j)
    second = G ** _f((ex.q - 2) / (ex.m - 2))
    return first, second, G, gq, gm


def compute_delta(nc: NonlinearityConstants, sc: SobolevConstants, ds: DriftSummary, ex: Exponents,
                  *, variant: str = "proof") -> float:
    """Radius of the weighted-H1 ball around the reference ramp (gauge psi(-x0) = 1).

    ``variant="proof"`` uses alpha/4 throughout and the factor
    2^((2-p)m/(2p)); ``variant="def"`` reproduces the displayed definition
    with alpha/2 and 2^((2-q)m/(2p)).
    """
    first, second, *_ = _branch_terms(nc, sc, ds, ex, variant=variant)
    q = _f(ex.q)
    lead = nc.alpha / 4.0 if variant == "proof" else nc.alpha / 2.0
    return lead ** (1.0 / (q - 2.0)) * max(first, second) ** (-1.0 / (q - 2.0))


def _a_terms(nc: NonlinearityConstants, cs: CrossSection, a: float):
    nu = min(nc.K, 0.5)
    beta = (1.0 / (2.0 * a) + a * nc.Fmax) * cs.measure
    gam = (1.0 / a + a / 3.0) * cs.measure
    eta = min(nu / 2.0, nc.alpha)
    return nu, beta, gam, eta


def evaluate(nc: NonlinearityConstants, sc: SobolevConstants, ds: DriftSummary, ex: Exponents,
             cs: CrossSection, a: float, form: Form | str = Form.PROPOSITION) -> CriterionReport:
    if a <= 0.0:
        raise ValueError("auxiliary length a must be positive")
    form = Form(form)
    n = ex.n
    if cs.n != n:
        raise DimensionError(f"cross-section has ambient dimension {cs.n}, exponents are for n={n}")
    q = _f(ex.q)
    first, second, G, gq, gm = _branch_terms(nc, sc, ds, ex)
    delta = compute_delta(nc, sc, ds, ex)
    delta_def = compute_delta(nc, sc, ds, ex, variant="def")
    nu, beta, gam, eta = _a_terms(nc, cs, a)
    a4 = nc.alpha / 4.0
    b = a4 / G
    decay = math.exp(-ds.net_drift)
    integral = ds.exp_integral_at(n + 1)

    # theorem constants
    C_t1 = eta / (nu * gam + beta) * a4 ** (2.0 / (q - 2.0))
    C_t2 = first ** (2.0 / (q - 2.0))
    m, p = ex.m, ex.p
    C_t3 = (gm * sc.C2 ** _f(m) * 2.0 ** _f((2 - p) * m / (2 * p))) ** (n - 1)

    if form is Form.PROPOSITION:
        lhs = C_t1
        rhs = decay * max(first, second) ** (2.0 / (q - 2.0))
    else:
        lhs = C_t1
        rhs = decay * max(C_t2, C_t3 * ds.sup_exp_neg ** (n - 1) * integral ** (n / (n + 1)))
    margin = eta * delta**2 - (nu * gam + beta) * decay
    # Informational: keep the b^((m-q)/(m-2)) factor of the b-choice and the factor 2 in
    # front of the max, both dropped in the displayed radius.
    mf, pf = _f(ex.m), _f(ex.p)
    second_strict = a4 ** ((mf - q) / (mf - 2.0)) * second
    delta_strict = (a4 / 2.0) ** (1.0 / (q - 2.0)) * max(first, second_strict) ** (-1.0 / (q - 2.0))
    extras = {"delta_strict": delta_strict,
              "satisfied_strict": bool(eta * delta_strict**2 > (nu * gam + beta) * decay)}
    return CriterionReport(
        n=n, q=str(ex.q), p=str(ex.p), m=str(ex.m), j=str(ex.j), alpha=nc.alpha,
        delta=delta, delta_def=delta_def, a_used=float(a), nu=nu, beta=beta, gamma_const=gam,
        eta_const=eta, b_interp=b, gamma_tilde_q=gq, gamma_tilde_m=gm,
        C_theorem_1=C_t1, C_theorem_2=C_t2, C_theorem_3=C_t3,
        net_drift=ds.net_drift, sup_exp_neg=ds.sup_exp_neg, exp_integral=integral,
        margin=margin, lhs=lhs, rhs=rhs, satisfied=bool(lhs > rhs), form=form.value,
        sobolev_C1=sc.C1, sobolev_C2=sc.C2, sobolev_provenance=sc.provenance, extras=extras,
    )


def homogeneity_audit(nc: NonlinearityConstants, sc: SobolevConstants, ds: DriftSummary, ex: Exponents,
                      cs: CrossSection, a: float, psi_left: float) -> tuple[bool, float]:
    """Redo the ball-radius inequality carrying psi(-x0) = psi_left explicitly.

    Returns the verdict and the margin eta*delta^2 - (nu*gamma + beta)*psi(0).
    """
    q, m, j = map(_f, (ex.q, ex.m, ex.j))
    a4 = nc.alpha / 4.0
    gq = gamma_tilde(nc, a4, q)
    gm = gamma_tilde(nc, a4, m)
    psi_sup = psi_left * ds.sup_exp_neg
    psi_inv_norm = psi_left ** -0.5 * ds.exp_integral_at(j / 2.0) ** (1.0 / j)
    first = gq * psi_left ** (1.0 - q / 2.0) * sc.C1**q
    G = gm * psi_sup * sc.C2**m * psi_inv_norm**m * 2.0 ** _f((2 - ex.p) * ex.m / (2 * ex.p))
    second = G ** _f((ex.q - 2) / (ex.m - 2))
    delta = a4 ** (1.0 / (q - 2.0)) * max(first, second) ** (-1.0 / (q - 2.0))
    nu, beta, gam, eta = _a_terms(nc, cs, a)
    psi0 = psi_left * math.exp(-ds.net_drift)
    margin = eta * delta**2 - (nu * gam + beta) * psi0
    return bool(margin > 0.0), margin


def optimal_a_closed_form(nc: NonlinearityConstants) -> float:
    nu = min(nc.K, 0.5)
    return math.sqrt((nu + 0.5) / (nu / 3.0 + nc.Fmax))


def optimize_a(nc: NonlinearityConstants, sc: SobolevConstants, ds: DriftSummary, ex: Exponents,
               cs: CrossSection, a_range: tuple[float, float],
               form: Form | str = Form.PROPOSITION) -> tuple[float, CriterionReport]:
    """Maximise lhs/rhs over the auxiliary length a in a_range."""
    lo, hi = map(float, a_range)
    if not (0.0 < lo <= hi) or not math.isfinite(hi):
        raise ValueError(f"degenerate a_range {a_range!r}")
    if lo == hi:
        return lo, evaluate(nc, sc, ds, ex, cs, lo, form)

    def neg_ratio(a):
        r = evaluate(nc, sc, ds, ex, cs, a, form)
        return -r.lhs / r.rhs

    res = minimize_scalar(neg_ratio, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10 * hi})
    best = float(res.x)
    for edge in (lo, hi):
        if neg_ratio(edge) < neg_ratio(best):
            best = edge
    return best, evaluate(nc, sc, ds, ex, cs, best, form)


@dataclass(frozen=True)
class ConcentratedReport:
    eps: float
    C: float
    lhs: float
    rhs: float
    net_condition: bool
    eps_condition: bool
    satisfied: bool
    eps_star: float
    integral_closed: float
    integral_quadrature: float
    ratio_C1_C3: float
    ratio_C2_C3: float
    report: CriterionReport


def concentrated_integral(cs: CrossSection, n: int, eps: float, C: float) -> float:
    """Closed form of the integral of exp((n+1) * int k1) for the concentrated drift."""
    r = n + 1
    if C == 0.0:
        return cs.measure * eps
    return cs.measure / (r * C) * math.expm1(r * C) * eps


def concentrated_eps_star(n: int, nc: NonlinearityConstants, sc: SobolevConstants, cs: CrossSection,
                          C: float, a: float) -> float:
    """Largest eps for which the concentration branch of the criterion holds at fixed C.

    Zero when the net-drift branch fails (no eps can help).
    """
    ex = exponents_for(n)
    unit = DriftSummary(C, 1.0, {float(n + 1): concentrated_integral(cs, n, 1.0, C)}, math.exp(-C), 1.0,
                        cs.measure)
    rep = evaluate(nc, sc, unit, ex, cs, a, Form.THEOREM)
    if not rep.C_theorem_1 > math.exp(-C) * rep.C_theorem_2:
        return 0.0
    bound = (rep.C_theorem_1 * math.exp(C) / rep.C_theorem_3) ** ((n + 1) / n)
    return bound / concentrated_integral(cs, n, 1.0, C)


def concentrated_thresholds(n: int, nc: NonlinearityConstants, sc: SobolevConstants, cs: CrossSection,
                            eps: float, C: float, a: float, *, rtol: float = 1e-6) -> ConcentratedReport:
    """Closed-form evaluation for k = (C/eps) on [-eps, 0], cross-checked against quadrature."""
    if eps <= 0.0 or C <= 0.0:
        raise ValueError("eps and C must be positive")
    ex = exponents_for(n)
    closed = concentrated_integral(cs, n, eps, C)
    ds_closed = DriftSummary(C, 1.0, {float(n + 1): closed}, math.exp(-C), eps, cs.measure)
    rep_closed = evaluate(nc, sc, ds_closed, ex, cs, a, Form.THEOREM)
    decay = math.exp(-C)
    net_ok = rep_closed.C_theorem_1 > decay * rep_closed.C_theorem_2
    eps_ok = rep_closed.C_theorem_1 > decay * rep_closed.C_theorem_3 * closed ** (n / (n + 1))

    ds = summarize(concentrated(eps, C), cs, [n + 1])
    rep = evaluate(nc, sc, ds, ex, cs, a, Form.PROPOSITION)
    quad_val = ds.exp_integral_at(n + 1)
    if abs(quad_val - closed) > rtol * closed or abs(rep.rhs - rep_closed.rhs) > rtol * rep_closed.rhs:
        raise ConsistencyError(f"closed form {closed!r} and quadrature {quad_val!r} disagree")
    if rep.satisfied != (net_ok and eps_ok) and abs(rep.lhs - rep.rhs) > rtol * rep.rhs:
        raise ConsistencyError("closed-form conditions and quadrature criterion disagree")
    return ConcentratedReport(
        eps=eps, C=C, lhs=rep_closed.lhs, rhs=rep_closed.rhs, net_condition=net_ok, eps_condition=eps_ok,
        satisfied=net_ok and eps_ok,
        eps_star=concentrated_eps_star(n, nc, sc, cs, C, a),
        integral_closed=closed, integral_quadrature=quad_val,
        ratio_C1_C3=rep_closed.C_theorem_1 / rep_closed.C_theorem_3,
        ratio_C2_C3=rep_closed.C_theorem_2 / rep_closed.C_theorem_3,
        report=rep,
    )


def summary_for(d, cs: CrossSection, n: int | None = None, quad_resolution: int = 8) -> DriftSummary:
    """Drift summary with the exponents the criterion needs."""
    n = cs.n if n is None else n
    return summarize(d, cs, [float(n + 1)], quad_resolution=quad_resolution)

