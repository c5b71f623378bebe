"""Coherent-state (Gross-Pitaevskii) analysis of the resonator.

The mean field obeys

    d alpha/dt = [-i A(N) - B(N)/2] alpha - i n G (alpha*)^(n-1)

with ``N = |alpha|^2``, ``A(N) = sum_m U_m N^(m-1)`` and
``B(N) = gamma + n eta_n N^(n-1)``. Stationary points with ``N > 0``
satisfy ``G = G_n(N)`` where

    G_n(N)^2 = [4 A(N)^2 + B(N)^2] / (4 n^2 N^(n-2)).

Most of the questions about the transition (where a nonzero branch is
born, whether it is born continuously, how many folds there are) reduce
to polynomial statements about ``P(N) = 4 A^2 + B^2``.
"""

__all__ = [
    "FixedPoint", "SemiclassicalSolutionSet", "CriticalDrive",
    "VacuumStability", "TransitionReport", "MultistabilityReport",
    "MARGINAL_TOL", "gp_rhs", "jacobian", "stability_of",
    "drive_of_density", "drive_slope", "critical_drive", "vacuum_stability",
    "fixed_points", "classify_transition", "detect_multistability",
    "descartes_bound", "branch_table", "write_branch_csv",
]

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

MARGINAL_TOL = 1e-10


# -- polynomial building blocks ------------------------------------------------

def _interaction_coeffs(spec):
    """Ascending coefficients of ``A(N) = sum_m U_m N^(m-1)``."""
    return np.asarray(spec.u, dtype=float)


def _loss_coeffs(spec):
    """Ascending coefficients of ``B(N) = gamma + n eta N^(n-1)``."""
    b = np.zeros(spec.n)
    b[0] += spec.gamma
    b[spec.n - 1] += spec.n * spec.eta_n
    return b


def _numerator_coeffs(spec):
    a = _interaction_coeffs(spec)
    b = _loss_coeffs(spec)
    return P.polyadd(4 * P.polymul(a, a), P.polymul(b, b))


def _lowest_degree(coeffs):
    nz = np.flatnonzero(np.asarray(coeffs) != 0)
    return int(nz[0]) if nz.size else None


def _trim(coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    nz = np.flatnonzero(coeffs != 0)
    return coeffs[:nz[-1] + 1] if nz.size else coeffs[:0]


# -- equation of motion ----------------------------------------------------------

def gp_rhs(spec, alpha):
    """Right-hand side of the mean-field equation at ``alpha`` (vectorised)."""
    alpha = np.asarray(alpha, dtype=np.complex128)
    dens = np.abs(alpha) ** 2
    a_n = P.polyval(dens, _interaction_coeffs(spec))
    b_n = P.polyval(dens, _loss_coeffs(spec))
    out = (-1j * a_n - 0.5 * b_n) * alpha
    if spec.n == 1:
        out = out - 1j * spec.g_n
    else:
        out = out - 1j * spec.n * spec.g_n * np.conj(alpha) ** (spec.n - 1)
    return out[()] if out.ndim == 0 else out


def jacobian(spec, alpha):
    """Real 2x2 Jacobian of :func:`gp_rhs` in ``(Re alpha, Im alpha)``."""
    alpha = complex(alpha)
    n = spec.n
    dens = abs(alpha) ** 2
    a_c, b_c = _interaction_coeffs(spec), _loss_coeffs(spec)
    h = -1j * P.polyval(dens, a_c) - 0.5 * P.polyval(dens, b_c)
    dh = -1j * P.polyval(dens, P.polyder(a_c)) - 0.5 * P.polyval(dens, P.polyder(b_c))
    # Wirtinger derivatives of f(alpha, alpha*)
    f_a = h + dh * dens
    f_ac = dh * alpha ** 2
    if n >= 2:
        f_ac += -1j * n * (n - 1) * spec.g_n * np.conj(alpha) ** (n - 2)
    dx = f_a + f_ac
    dy = 1j * (f_a - f_ac)
    return np.array([[dx.real, dy.real], [dx.imag, dy.imag]])


def stability_of(eigs, tol=MARGINAL_TOL):
    """``"stable"``, ``"marginal"`` or ``"unstable"`` from Jacobian eigenvalues."""
    top = max(np.real(eigs))
    if top < -tol:
        return "stable"
    if top > tol:
        return "unstable"
    return "marginal"


# -- inverse problem G_n(N) --------------------------------------------------------

def _factored(spec, dens):
    # A, B and their derivatives evaluated separately; expanding 4 A^2 + B^2
    # into one polynomial loses digits when the U_m terms cancel
    a, b = _interaction_coeffs(spec), _loss_coeffs(spec)
    return (P.polyval(dens, a), P.polyval(dens, b),
            P.polyval(dens, P.polyder(a)), P.polyval(dens, P.polyder(b)))


def drive_of_density(spec, density):
    """Drive amplitude ``G_n(N)`` at which density ``N > 0`` is stationary."""
    dens = np.asarray(density, dtype=float)
    if np.any(dens <= 0):
        raise ValueError("G_n(N) is only defined for N > 0")
    a, b, _, _ = _factored(spec, dens)
    out = np.sqrt((4 * a * a + b * b) / (4 * spec.n ** 2 * dens ** (spec.n - 2)))
    return out[()] if out.ndim == 0 else out


def _slope_numerator_coeffs(spec):
    # d(G^2)/dN = [N P'(N) - (n - 2) P(N)] / (4 n^2 N^(n-1))
    num = _numerator_coeffs(spec)
    return P.polysub(P.polymulx(P.polyder(num)), (spec.n - 2) * num)


def drive_slope(spec, density):
    """Analytic ``dG_n/dN``."""
    dens = np.asarray(density, dtype=float)
    g = drive_of_density(spec, dens)
    a, b, da, db = _factored(spec, dens)
    q = dens * (8 * a * da + 2 * b * db) - (spec.n - 2) * (4 * a * a + b * b)
    out = q / (8 * spec.n ** 2 * dens ** (spec.n - 1) * g)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class CriticalDrive:
    """Limit of ``G_n(N)`` as ``N -> 0+``.

    ``kind`` is ``"finite"``, ``"zero"`` or ``"infinite"``; ``value`` is
    the limit (``math.inf`` for the infinite case). ``exponent`` is the
    power of ``N`` in the leading behaviour ``G_n ~ c N^exponent``.
    """

    kind: str
    value: float
    exponent: float | None = None
    coefficient: float | None = None

    @property
    def is_finite_positive(self):
        return self.kind == "finite"

    def __str__(self):
        return {"finite": f"{self.value!r}", "zero": "0", "infinite": "infinity"}[self.kind]


def _leading_numerator(spec):
    """Lowest degree and coefficient of ``P = 4 A^2 + B^2``, computed exactly.

    Being a sum of two squares, ``P`` cannot cancel at its lowest order.
    """
    da = _lowest_degree(_interaction_coeffs(spec))
    db = _lowest_degree(_loss_coeffs(spec))
    cands = [d for d in (da, db) if d is not None]
    if not cands:
        return None, 0.0
    low = min(cands)
    coeff = 0.0
    if da == low:
        coeff += 4 * spec.u[da] ** 2
    if db == low:
        coeff += _loss_coeffs(spec)[db] ** 2
    return 2 * low, coeff


def critical_drive(spec):
    """``G_n^(c) = lim_{N -> 0+} G_n(N)`` from the leading power of ``P``."""
    deg, coeff = _leading_numerator(spec)
    if deg is None:
        return CriticalDrive("zero", 0.0, None, 0.0)
    # G^2 ~ coeff / (4 n^2) * N^(deg - (n - 2))
    power = deg - (spec.n - 2)
    pref = math.sqrt(coeff) / (2 * spec.n)
    if power > 0:
        return CriticalDrive("zero", 0.0, power / 2, pref)
    if power < 0:
        return CriticalDrive("infinite", math.inf, power / 2, pref)
    return CriticalDrive("finite", pref, 0.0, pref)


# -- vacuum --------------------------------------------------------------------------

@dataclass(frozen=True)
class VacuumStability:
    matrix: np.ndarray
    eigenvalues: tuple
    verdict: str


def vacuum_stability(spec):
    """Closed-form linear stability of ``alpha = 0``.

    The stability matrix is ``[[-gamma/2, U_1 - 2 d G], [-U_1 - 2 d G,
    -gamma/2]]`` with ``d = 1`` only for the two-photon drive, so
    ``lambda = -gamma/2 +- sqrt(4 d G^2 - U_1^2)``. For ``n = 1`` the
    vacuum is not a fixed point and the matrix is only the linear part.
    """
    g2 = spec.g_n if spec.n == 2 else 0.0
    u1 = spec.u[0]
    half = spec.gamma / 2
    mat = np.array([[-half, -2 * g2 + u1], [-2 * g2 - u1, -half]])
    root = np.sqrt(complex(4 * g2 ** 2 - u1 ** 2))
    eigs = (-half + root, -half - root)
    return VacuumStability(mat, eigs, stability_of(eigs))


# -- fixed points ----------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPoint:
    """One stationary solution (reported once per Z_n orbit).

    ``multiplicity`` counts the symmetry images ``theta + 2 pi j / n``;
    it is 1 for the vacuum.
    """

    density: float
    theta: float
    alpha: complex
    stability: str
    jacobian_eigs: tuple
    multiplicity: int = 1
    residual: float = 0.0

    def images(self, n):
        """All ``alpha`` values of the Z_n orbit."""
        if self.density == 0:
            return [0j]
        return [self.alpha * np.exp(2j * np.pi * j / n) for j in range(n)]


@dataclass
class SemiclassicalSolutionSet:
    drive: float
    points: list
    classification: str

    @property
    def nonzero(self):
        return [p for p in self.points if p.density > 0]

    @property
    def stable(self):
        return [p for p in self.points if p.stability == "stable"]

    def vacuum(self):
        for p in self.points:
            if p.density == 0:
                return p
        return None


def _stationary_poly(spec, g):
    num = _numerator_coeffs(spec)
    n = spec.n
    if n == 1:
        return P.polysub(P.polymulx(num), [4 * g ** 2])
    drive = np.zeros(n - 1)
    drive[n - 2] = 4 * n ** 2 * g ** 2
    return P.polysub(num, drive)


def _positive_real_roots(coeffs, accept, polish=None):
    """Positive real roots of a real polynomial.

    The variable is first scaled by the Fujiwara root bound so the
    companion matrix looks the same whatever the density scale. Each
    nearly real eigenvalue (``polyroots``) seeds Newton steps on the real
    axis from its real part and from both sides of it, because a close
    pair of real roots near a fold can come out as a complex pair.
    ``polish(N)``, if given, refines each root on a better conditioned
    form of the same function before ``accept(N)`` gives the final say.
    """
    coeffs = _trim(coeffs)
    if coeffs.size <= 1:
        return []
    deg = coeffs.size - 1
    # work in logs: the bound and the scaled coefficients can over/underflow
    mag = np.abs(coeffs)
    with np.errstate(divide="ignore"):
        logc = np.log(mag)
    log_scale = max((logc[k] - logc[-1]) / (deg - k) for k in range(deg) if mag[k] > 0) \
        if np.any(mag[:-1] > 0) else 0.0
    scale = math.exp(min(max(log_scale, -700.0), 700.0))
    logu = logc + np.arange(deg + 1) * math.log(scale)
    with np.errstate(invalid="ignore"):
        unit = np.where(mag > 0, np.sign(coeffs) * np.exp(logu - logu[mag > 0].max()), 0.0)
    d1 = P.polyder(unit)
    roots = []
    for r in P.polyroots(unit):
        if r.real <= 0 or abs(r.imag) > 1e-3 * max(1.0, abs(r)):
            continue
        for x in {r.real, r.real - abs(r.imag), r.real + abs(r.imag)}:
            x = _newton(unit, d1, x)
            if x is None:
                continue
            x *= scale
            if polish is not None:
                x = polish(x)
            if x is not None and accept(x):
                roots.append(float(x))
    roots.sort()
    unique = []
    for x in roots:
        if not unique or abs(x - unique[-1]) > 1e-10 * max(1.0, x):
            unique.append(x)
    return unique


def _newton(coeffs, d1, x):
    if x <= 0:
        return None
    for _ in range(60):
        fx, dfx = P.polyval(x, coeffs), P.polyval(x, d1)
        if dfx == 0 or not np.isfinite(fx):
            break
        step = fx / dfx
        x_new = x - step
        if x_new <= 0:
            return None
        x = x_new
        if abs(step) <= 4 * np.finfo(float).eps * abs(x):
            break
    return float(x)


def _phase(spec, dens, g):
    a_n = P.polyval(dens, _interaction_coeffs(spec))
    b_n = P.polyval(dens, _loss_coeffs(spec))
    denom = a_n - 0.5j * b_n
    if g == 0 or denom == 0:
        return 0.0
    # (A - iB/2) alpha = -n G (alpha*)^(n-1)  fixes exp(i n theta)
    z = -spec.n * g * dens ** ((spec.n - 2) / 2) / denom
    return float(np.angle(z) / spec.n)


def _stationary_polisher(spec, g):
    # Newton on 4 A^2 + B^2 - 4 n^2 g^2 N^(n-2) with A and B kept factored:
    # the expanded coefficients can cancel badly near folds
    a, b = _interaction_coeffs(spec), _loss_coeffs(spec)
    da, db = P.polyder(a), P.polyder(b)
    n = spec.n
    k = 4 * n * n * g * g

    def f(x):
        av, bv = P.polyval(x, a), P.polyval(x, b)
        val = 4 * av * av + bv * bv - k * x ** (n - 2)
        der = 8 * av * P.polyval(x, da) + 2 * bv * P.polyval(x, db) \
            - k * (n - 2) * x ** (n - 3)
        return val, der

    def polish(x):
        x = np.float64(x)
        for _ in range(8):
            with np.errstate(over="ignore", invalid="ignore"):
                val, der = f(x)
            if der == 0 or not (np.isfinite(val) and np.isfinite(der)):
                break
            x_new = x - val / der
            if not x_new > 0 or abs(x_new - x) > 1e-3 * x:
                break
            done = abs(x_new - x) <= 4 * np.finfo(float).eps * x
            x = x_new
            if done:
                break
        return float(x)

    return polish


def fixed_points(spec, g):
    """All stationary mean-field solutions at drive ``g``.

    Parameters
    ----------
    spec : ModelSpec
        Only ``n``, ``u``, ``gamma`` and ``eta_n`` are used.
    g : float
        Drive amplitude (overrides ``spec.g_n``).

    Returns
    -------
    SemiclassicalSolutionSet
        Vacuum first (for ``n >= 2``), then nonzero densities in
        increasing order. ``classification`` is ``"none"`` when only the
        vacuum exists, ``"multistable"`` when two or more nonzero orbits
        are stable, and otherwise the model-level transition kind.
    """
    if not g >= 0:
        raise ValueError(f"drive must be non-negative, got {g!r}")
    spec = spec.replace(g_n=float(g))
    points = []
    if spec.n >= 2:
        eigs = tuple(np.linalg.eigvals(jacobian(spec, 0j)))
        points.append(FixedPoint(0.0, 0.0, 0j, stability_of(eigs), eigs, 1, 0.0))

    def consistent(x):
        target = drive_of_density(spec, x)
        return abs(target - g) <= 1e-9 * max(g, 1e-300) or (g == 0 and target == 0)

    coeffs = _stationary_poly(spec, g)
    polish = _stationary_polisher(spec, g)
    if _trim(coeffs).size == 0:
        # every density is stationary (lossless, undriven, no interaction)
        densities = []
    else:
        densities = _positive_real_roots(coeffs, consistent, polish)
    for dens in densities:
        theta = _phase(spec, dens, g)
        alpha = math.sqrt(dens) * complex(math.cos(theta), math.sin(theta))
        eigs = tuple(np.linalg.eigvals(jacobian(spec, alpha)))
        resid = abs(gp_rhs(spec, alpha))
        points.append(FixedPoint(dens, theta, alpha, stability_of(eigs), eigs,
                                 spec.n, float(resid)))

    stable_nonzero = [p for p in points if p.density > 0 and p.stability == "stable"]
    if not any(p.density > 0 for p in points):
        kind = "none"
    elif len(stable_nonzero) >= 2:
        kind = "multistable"
    else:
        kind = classify_transition(spec).kind
    return SemiclassicalSolutionSet(float(g), points, kind)


# -- transition classification ------------------------------------------------------

@dataclass
class TransitionReport:
    """Outcome of the second-order-transition conditions for one model.

    ``condition_i``: ``0 < G_n^(c) < inf``. ``condition_ii``: the first
    nonzero derivative of ``G_n`` at ``N -> 0+`` is positive (``None``
    when condition (i) fails). ``derivative_order`` is 1 unless the slope
    vanishes exactly and higher orders had to be inspected.
    """

    n: int
    kind: str
    critical: CriticalDrive
    condition_i: bool
    condition_ii: bool | None
    slope: float | None
    derivative_order: int | None
    derivative_value: float | None
    folds: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def as_text(self):
        lines = [
            f"n: {self.n}",
            f"classification: {self.kind}",
            f"critical_drive: {self.critical}",
            f"critical_drive_kind: {self.critical.kind}",
            f"condition_i: {self.condition_i}",
            f"condition_ii: {self.condition_ii}",
            f"slope_at_critical: {self.slope!r}",
            f"first_nonzero_derivative_order: {self.derivative_order}",
            f"first_nonzero_derivative_value: {self.derivative_value!r}",
            "folds: " + ", ".join(f"{kind}@N={x!r}" for x, kind in self.folds),
        ]
        lines += [f"note: {s}" for s in self.notes]
        return "\n".join(lines) + "\n"


def _sqrt_series(f, order):
    """Taylor coefficients of ``sqrt(f)`` about 0, given ``f[0] > 0``."""
    f = np.concatenate([f, np.zeros(max(0, order + 1 - len(f)))])
    s = np.zeros(order + 1)
    s[0] = math.sqrt(f[0])
    for k in range(1, order + 1):
        s[k] = (f[k] - np.dot(s[1:k], s[k - 1:0:-1])) / (2 * s[0])
    return s


def _fold_points(spec):
    """Stationary points of ``G_n(N)`` on ``(0, inf)`` from the slope numerator."""
    q = _trim(_slope_numerator_coeffs(spec))
    if q.size <= 1:
        return []
    def changes_sign(x):
        lo, hi = P.polyval(x * (1 - 1e-7), q), P.polyval(x * (1 + 1e-7), q)
        return lo * hi < 0

    out = []
    d2 = P.polyder(q)
    for x in _positive_real_roots(q, changes_sign):
        # sign of Q just above the root decides min vs max
        curv = P.polyval(x, d2)
        if curv == 0:
            continue
        out.append((x, "min" if curv > 0 else "max"))
    return out


def classify_transition(spec):
    """Decide between second-order, first-order or no transition.

    A second-order transition needs a finite, positive critical drive and a
    non-negative slope of ``G_n`` as the nonzero branch leaves ``N = 0``.
    If the slope is exactly zero the first nonzero higher derivative is
    used and reported. Otherwise the transition is first order when
    ``G_n(N)`` has a fold (a local minimum) on ``N > 0``, and ``"none"``
    when it has no fold.
    """
    crit = critical_drive(spec)
    folds = _fold_points(spec)
    notes = []
    cond_i = crit.kind == "finite" and crit.value > 0
    cond_ii = None
    slope = order = deriv = None
    if cond_i:
        num = _trim(_numerator_coeffs(spec))
        f = num[spec.n - 2:]
        max_order = max(len(f), 2) * 2
        s = _sqrt_series(f, max_order)
        slope = float(s[1] / (2 * spec.n))
        nz = np.flatnonzero(s[1:] != 0)
        if nz.size:
            order = int(nz[0]) + 1
            deriv = float(math.factorial(order) * s[order] / (2 * spec.n))
            cond_ii = bool(deriv > 0)
            if order > 1:
                notes.append(f"slope vanishes; derivative of order {order} decides")
        else:
            cond_ii = True
            notes.append("G_n(N) is constant; the branch is degenerate")
    if cond_i and cond_ii:
        kind = "second_order"
    elif any(k == "min" for _, k in folds):
        kind = "first_order"
    else:
        kind = "none"
    if spec.n % 2 == 1:
        notes.append("odd drive order: second-order transition excluded")
    return TransitionReport(spec.n, kind, crit, cond_i, cond_ii, slope, order,
                            deriv, folds, notes)


# -- multistability -----------------------------------------------------------------

def descartes_bound(coeffs):
    """Number of sign changes in a coefficient sequence, zeros skipped."""
    signs = [np.sign(c) for c in coeffs if c != 0]
    return int(sum(1 for a, b in zip(signs, signs[1:]) if a != b))


@dataclass
class MultistabilityReport:
    """Extrema of ``G_n(N)`` inside a density window.

    ``descartes_bound`` bounds the number of positive stationary points
    of ``G_n`` (sign changes of the slope-numerator polynomial);
    ``u_sign_alternations`` counts sign changes along ``U_1, U_2, ...``.
    """

    extrema: list
    descartes_bound: int
    u_sign_alternations: int

    @property
    def multistable(self):
        return sum(1 for _, k in self.extrema if k == "min") >= 2


def detect_multistability(spec, n_range, samples=4000):
    """Locate the extrema of ``G_n(N)`` on ``n_range = (N_lo, N_hi)``.

    The slope is scanned on a log-spaced grid and every sign change is
    refined by bracketing root search on ``dG_n/dN``.
    """
    lo, hi = map(float, n_range)
    if not 0 < lo < hi:
        raise ValueError(f"density window must satisfy 0 < lo < hi, got {n_range}")
    grid = np.geomspace(lo, hi, samples)
    slope = drive_slope(spec, grid)
    extrema = []
    sgn = np.sign(slope)
    for i in range(len(grid) - 1):
        s0, s1 = sgn[i], sgn[i + 1]
        if s0 == 0:
            if i > 0 and sgn[i - 1] * s1 < 0:
                extrema.append((float(grid[i]), "min" if s1 > 0 else "max"))
            continue
        if s0 * s1 < 0:
            x = brentq(lambda x: drive_slope(spec, x), grid[i], grid[i + 1],
                       xtol=1e-14, rtol=4 * np.finfo(float).eps)
            extrema.append((float(x), "min" if s1 > 0 else "max"))
    return MultistabilityReport(
        extrema,
        descartes_bound(_trim(_slope_numerator_coeffs(spec))),
        descartes_bound([u for u in spec.u]),
    )


# -- branch tables -------------------------------------------------------------------

def branch_table(spec, densities):
    """Rows ``(N, G_n(N), stability)`` along the nonzero branch."""
    rows = []
    for dens in np.asarray(densities, dtype=float):
        g = float(drive_of_density(spec, dens))
        s = spec.replace(g_n=g)
        theta = _phase(s, dens, g)
        alpha = math.sqrt(dens) * complex(math.cos(theta), math.sin(theta))
        eigs = np.linalg.eigvals(jacobian(s, alpha))
        rows.append((float(dens), g, stability_of(eigs)))
    return rows


def write_branch_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "G_n", "stability"])
        for dens, g, stab in rows:
            w.writerow([repr(dens), repr(g), stab])
