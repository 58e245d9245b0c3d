"""Jost solutions by Volterra marching, and the Jost function.

Everything is computed through the transformed unknowns
m_pm(x) = Psi_pm(z, x) e^{mp i k x}, k = (z - v_inf)^{1/2}, Im k > 0, which
satisfy Volterra equations with bounded kernels:

  m_+(x) = 1 - (2ik)^{-1} int_x^{X}  [1 - e^{ 2ik(x'-x)}] W(x') m_+(x') dx'
  m_-(x) = 1 - (2ik)^{-1} int_{-X}^x [1 - e^{ 2ik(x-x')}] W(x') m_-(x') dx'

The kernels vanish on the diagonal, so a product-trapezoid march is explicit;
both the running integral and the phase-shifted running integral satisfy
one-step recurrences, giving an O(n) sweep.  Marching error is O(h^2) with a
smooth leading term, so one grid-doubling Richardson step upgrades to O(h^4).

The auxiliary solutions psi_pm of the inhomogeneous zero-energy problem
-psi'' + V psi = W Psi_pm(0, .) are marched in the rescaled form
phi_pm = e^{pm sqrt(v_inf) x} psi_pm, whose Volterra kernel is bounded.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalError, PreconditionError
from .policy import DEFAULT_POLICY, NumericPolicy
from .potentials import Potential1D


def spectral_k(z: complex, v_infinity: float) -> complex:
    """k = (z - v_inf)^{1/2} with Im k > 0.

    Raises on the essential spectrum [v_inf, inf) where the branch is cut.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real >= v_infinity:
        raise PreconditionError("branch cut: z on [v_infinity, infinity)")
    k = np.sqrt(z - v_infinity)
    if k.imag < 0:
        k = -k
    return k


@dataclass(frozen=True)
class JostSolution:
    """Jost solutions and derivatives on the truncation grid."""

    z: complex
    k: complex
    grid: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    dpsi_plus: np.ndarray
    dpsi_minus: np.ndarray
    m_plus: np.ndarray         # Psi_+ e^{-ikx}
    m_minus: np.ndarray        # Psi_- e^{+ikx}
    dm_plus: np.ndarray
    dm_minus: np.ndarray


@dataclass(frozen=True)
class AuxSolution:
    """Solutions of -psi'' + V psi = W Psi_pm(0,.), asymptotic to -Psi_pm(0,.)."""

    grid: np.ndarray
    psi_plus_aux: np.ndarray
    psi_minus_aux: np.ndarray
    phi_plus: np.ndarray       # e^{+sqrt(vinf) x} psi_+
    phi_minus: np.ndarray      # e^{-sqrt(vinf) x} psi_-
    v_infinity: float


def _march_m(w: np.ndarray, h: float, k: complex, side: int):
    """Product-trapezoid march of the m-equation; returns (m, dm)."""
    n = w.size
    m = np.empty(n, dtype=complex)
    dm = np.empty(n, dtype=complex)
    two_ik = 2j * k
    shift = np.exp(two_ik * h)        # |shift| <= 1 for Im k > 0
    half = 0.5 * h
    if side > 0:
        m[-1] = 1.0
        dm[-1] = 0.0
        p = 0.0 + 0.0j
        q = 0.0 + 0.0j
        for i in range(n - 2, -1, -1):
            fm = w[i + 1] * m[i + 1]
            pbar = p + half * fm
            qbar = shift * (q + half * fm)
            mi = 1.0 - (pbar - qbar) / two_ik
            m[i] = mi
            p = pbar + half * w[i] * mi
            q = qbar + half * w[i] * mi
            dm[i] = -q
    else:
        m[0] = 1.0
        dm[0] = 0.0
        p = 0.0 + 0.0j
        q = 0.0 + 0.0j
        for i in range(1, n):
            fm = w[i - 1] * m[i - 1]
            pbar = p + half * fm
            qbar = shift * (q + half * fm)
            mi = 1.0 - (pbar - qbar) / two_ik
            m[i] = mi
            p = pbar + half * w[i] * mi
            q = qbar + half * w[i] * mi
            dm[i] = q
    return m, dm


def _march_both(p: Potential1D, z: complex, richardson: bool):
    """m_pm and derivatives on p.grid, optionally Richardson-upgraded."""
    k = spectral_k(z, p.v_infinity)
    x = p.grid
    h = x[1] - x[0]
    w = p.w_samples
    mp, dmp = _march_m(w, h, k, +1)
    mm, dmm = _march_m(w, h, k, -1)
    if richardson:
        xf = np.linspace(x[0], x[-1], 2 * (x.size - 1) + 1)
        wf = np.asarray(p.w(xf), dtype=float)
        hf = xf[1] - xf[0]
        mpf, dmpf = _march_m(wf, hf, k, +1)
        mmf, dmmf = _march_m(wf, hf, k, -1)
        mp = (4.0 * mpf[::2] - mp) / 3.0
        mm = (4.0 * mmf[::2] - mm) / 3.0
        dmp = (4.0 * dmpf[::2] - dmp) / 3.0
        dmm = (4.0 * dmmf[::2] - dmm) / 3.0
    return k, mp, mm, dmp, dmm


def solve_jost(p: Potential1D, z: complex, richardson: bool = True
               ) -> JostSolution:
    """Jost solutions Psi_pm(z, .) on the truncation grid.

    For Im z < 0 the solution is obtained at the conjugate point and
    conjugated (valid for real potentials).
    """
    z = complex(z)
    if z.imag < 0:
        sol = solve_jost(p, z.conjugate(), richardson)
        return JostSolution(z, -sol.k.conjugate(), sol.grid,
                            sol.psi_plus.conj(), sol.psi_minus.conj(),
                            sol.dpsi_plus.conj(), sol.dpsi_minus.conj(),
                            sol.m_plus.conj(), sol.m_minus.conj(),
                            sol.dm_plus.conj(), sol.dm_minus.conj())
    k, mp, mm, dmp, dmm = _march_both(p, z, richardson)
    x = p.grid
    ep = np.exp(1j * k * x)
    em = np.exp(-1j * k * x)
    psi_p = ep * mp
    psi_m = em * mm
    dpsi_p = ep * (1j * k * mp + dmp)
    dpsi_m = em * (-1j * k * mm + dmm)
    if not (np.all(np.isfinite(psi_p)) and np.all(np.isfinite(psi_m))):
        raise NumericalError("Jost march produced non-finite values")
    return JostSolution(z, k, x, psi_p, psi_m, dpsi_p, dpsi_m, mp, mm, dmp, dmm)


def jost_function(p: Potential1D, z: complex, method: str = "integral",
                  richardson: bool = True,
                  policy: NumericPolicy = DEFAULT_POLICY) -> complex:
    """Jost function F(z) = Wr(Psi_-, Psi_+)/(2ik) = det(I - K(z)).

    method 'integral' uses F = 1 + i/(2k) int W m_+ dx (the plus-side Green
    representation); 'wronskian' evaluates the Wronskian form at interior
    sample points; 'both' cross-checks them against policy.cross_tol.
    """
    z = complex(z)
    if z.imag < 0:
        return jost_function(p, z.conjugate(), method, richardson,
                             policy).conjugate()
    k, mp, mm, dmp, dmm = _march_both(p, z, richardson)
    x = p.grid
    w = p.w_samples

    def integral_value():
        return 1.0 + 1j / (2.0 * k) * np.trapezoid(w * mp, x)

    def wronskian_value():
        n = x.size
        idx = [int(f * n) for f in (0.38, 0.45, 0.5, 0.55, 0.62)]
        vals = np.array([
            mm[i] * mp[i] + (mm[i] * dmp[i] - dmm[i] * mp[i]) / (2j * k)
            for i in idx
        ])
        spread = np.max(np.abs(vals - vals.mean()))
        if spread > 1e-6 * max(1.0, abs(vals.mean())):
            raise NumericalError(
                f"Wronskian not x-independent (spread {spread:.2e})"
            )
        return vals.mean()

    if method == "integral":
        return integral_value()
    if method == "wronskian":
        return wronskian_value()
    if method == "both":
        fi, fw = integral_value(), wronskian_value()
        if abs(fi - fw) > policy.cross_tol * max(1.0, abs(fi)):
            raise NumericalError(
                f"integral/wronskian routes disagree: {fi} vs {fw}"
            )
        return 0.5 * (fi + fw)
    raise PreconditionError(f"unknown method {method!r}")


def jost_derivative_at_eigenvalue(p: Potential1D, lambda_j: float,
                                  richardson: bool = True,
                                  policy: NumericPolicy = DEFAULT_POLICY
                                  ) -> complex:
    """dF/dz at a discrete eigenvalue lambda_j < v_inf.

    Equals -(2 (v_inf - lambda)^{1/2})^{-1} int Psi_- Psi_+ dx; the product
    Psi_- Psi_+ is m_- m_+ in the transformed variables.
    """
    lam = float(lambda_j)
    if lam >= p.v_infinity:
        raise PreconditionError("eigenvalues lie below v_infinity")
    resid = abs(jost_function(p, lam, richardson=richardson))
    if resid > policy.eigen_tol:
        raise PreconditionError(
            f"lambda={lam} is not a zero of the Jost function (|F|={resid:.2e})"
        )
    _, mp, mm, _, _ = _march_both(p, lam, richardson)
    kap = np.sqrt(p.v_infinity - lam)
    integral = np.trapezoid(mm * mp, p.grid)
    return -integral / (2.0 * kap)


def solve_aux(p: Potential1D, richardson: bool = True,
              policy: NumericPolicy = DEFAULT_POLICY) -> AuxSolution:
    """Auxiliary solutions psi_pm; requires 0 to be a discrete eigenvalue."""
    resid = abs(jost_function(p, 0.0, richardson=richardson))
    if resid > policy.eigen_tol:
        raise PreconditionError(
            f"0 is not an eigenvalue (|F(0)| = {resid:.2e}); "
            "auxiliary solutions are not defined"
        )
    kap = np.sqrt(p.v_infinity)

    def run(x, w):
        h = x[1] - x[0]
        m0p, _ = _march_m(w, h, 1j * kap, +1)
        m0m, _ = _march_m(w, h, 1j * kap, -1)
        phi_p = _march_phi(w, h, kap, m0p, +1)
        phi_m = _march_phi(w, h, kap, m0m, -1)
        return phi_p, phi_m

    x = p.grid
    phi_p, phi_m = run(x, p.w_samples)
    if richardson:
        xf = np.linspace(x[0], x[-1], 2 * (x.size - 1) + 1)
        wf = np.asarray(p.w(xf), dtype=float)
        fp, fm = run(xf, wf)
        phi_p = (4.0 * fp[::2] - phi_p) / 3.0
        phi_m = (4.0 * fm[::2] - phi_m) / 3.0
    psi_p = np.exp(-kap * x) * phi_p
    psi_m = np.exp(kap * x) * phi_m
    return AuxSolution(x, psi_p, psi_m, phi_p, phi_m, p.v_infinity)


def _march_phi(w: np.ndarray, h: float, kap: float, m0: np.ndarray, side: int
               ) -> np.ndarray:
    """March phi_pm = e^{pm kap x} psi_pm.

    phi_+(x) = -m0_+(x) + (2 kap)^{-1} int_x^X  [1 - e^{-2 kap (x'-x)}] W phi_+ dx'
    phi_-(x) = -m0_-(x) + (2 kap)^{-1} int_-X^x [1 - e^{-2 kap (x-x')}] W phi_- dx'
    """
    n = w.size
    m0r = np.real(m0)
    phi = np.empty(n, dtype=float)
    shift = np.exp(-2.0 * kap * h)
    half = 0.5 * h
    two_kap = 2.0 * kap
    if side > 0:
        phi[-1] = -m0r[-1]
        p = 0.0
        q = 0.0
        for i in range(n - 2, -1, -1):
            f = w[i + 1] * phi[i + 1]
            pbar = p + half * f
            qbar = shift * (q + half * f)
            val = -m0r[i] + (pbar - qbar) / two_kap
            phi[i] = val
            p = pbar + half * w[i] * val
            q = qbar + half * w[i] * val
    else:
        phi[0] = -m0r[0]
        p = 0.0
        q = 0.0
        for i in range(1, n):
            f = w[i - 1] * phi[i - 1]
            pbar = p + half * f
            qbar = shift * (q + half * f)
            val = -m0r[i] + (pbar - qbar) / two_kap
            phi[i] = val
            p = pbar + half * w[i] * val
            q = qbar + half * w[i] * val
    return phi


def locate_eigenvalues(p: Potential1D, bracket: tuple[float, float],
                       scan_points: int = 240,
                       policy: NumericPolicy = DEFAULT_POLICY) -> list[float]:
    """Real zeros of F on a bracket below v_infinity, sorted ascending.

    Coarse sign-change scan on a cheap grid, then root polishing with the
    accurate evaluator.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if hi <= lo:
        raise PreconditionError("empty bracket")
    if hi >= p.v_infinity:
        raise PreconditionError("bracket must lie strictly below v_infinity")

    coarse = Potential1D(p.v_infinity, p.w_callable, p.x_max,
                         min(p.n_nodes, 801), p.tail_bound, p.label)

    def f_coarse(lam):
        return jost_function(coarse, lam, richardson=False).real

    def f_fine(lam):
        return jost_function(p, lam, richardson=True).real

    lams = np.linspace(lo, hi, scan_points)
    vals = np.array([f_coarse(l) for l in lams])
    roots = []
    for i in range(scan_points - 1):
        if vals[i] == 0.0:
            roots.append(lams[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(_polish_root(f_coarse, f_fine, lams[i], lams[i + 1]))
    if vals[-1] == 0.0:
        roots.append(lams[-1])
    return sorted(roots)


def _polish_root(f_coarse, f_fine, a: float, b: float) -> float:
    """Refine a coarse sign-change bracket against the accurate evaluator.

    The coarse and fine evaluators differ by their quadrature error, so a
    coarse bracket need not bracket for the fine function; the fine bracket
    is re-established around the coarse root before polishing.
    """
    r = brentq(f_coarse, a, b, xtol=1e-10)
    width = b - a
    delta = 1e-4 * max(1.0, abs(r))
    while delta < 4.0 * width:
        la, lb = r - delta, r + delta
        fa, fb = f_fine(la), f_fine(lb)
        if fa == 0.0:
            return la
        if fb == 0.0:
            return lb
        if fa * fb < 0:
            return brentq(f_fine, la, lb, xtol=1e-12)
        delta *= 4.0
    raise NumericalError(
        f"could not re-bracket root near {r}: coarse and fine Jost "
        "evaluations disagree on the sign structure"
    )
