"""Transverse Fourier truncation on the cylinder R x [0, 2pi]^{d-1}.

After the discrete Fourier transform in the periodic directions, the
Birman-Schwinger operator truncated at wave number J acts on
L^2(R; C^{N_J}) with the matrix-valued kernel

    block (j, m):  -(2 kappa_j)^{-1} e^{-kappa_j |x - x'|} W_{j-m}(x'),
    kappa_j = (v_inf + |j|^2 - z)^{1/2},  Re kappa_j > 0,

where W_m are the transverse Fourier coefficients of the potential offset.
Everything here works in this coefficient-space (matrix) normalization; the
trace of the truncated operator is

    Theta_J(z) = -(1/2) (int W_0 dx1) sum_{|j|<=J} kappa_j^{-1},

and the 2-modified determinant F2J = det2(I - K_J), the Galerkin Evans
function E_J, and Theta_J tie together as F2J = e^{Theta_J} E_J, which the
equivalence check verifies numerically.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PreconditionError
from .grids import NystromGrid, gauss_legendre_composite, romberg_even
from .policy import DEFAULT_POLICY, NumericPolicy
from .potentials import Potential1D
from . import semisep

MAX_DENSE_SIZE = 12000


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def transverse_modes(J: int, d: int):
    """Wave vectors |j| <= J in lexicographic order (deterministic)."""
    if d == 2:
        return [(m,) for m in range(-J, J + 1)]
    if d == 3:
        out = []
        for m2 in range(-J, J + 1):
            for m3 in range(-J, J + 1):
                if m2 * m2 + m3 * m3 <= J * J:
                    out.append((m2, m3))
        return sorted(out)
    raise PreconditionError("only d = 2, 3 are supported")


def _mode_norm2(m) -> int:
    return sum(int(c) * int(c) for c in m)


@dataclass(frozen=True)
class GalerkinTruncation:
    J: int
    d: int = 2
    mode_index: tuple = field(init=False)

    def __post_init__(self):
        if self.J < 0:
            raise PreconditionError("J must be nonnegative")
        object.__setattr__(self, "mode_index",
                           tuple(transverse_modes(self.J, self.d)))

    @property
    def n_modes(self) -> int:
        return len(self.mode_index)

    def kappas(self, z: complex, v_infinity: float) -> np.ndarray:
        norms = np.array([_mode_norm2(m) for m in self.mode_index], dtype=float)
        kap = np.sqrt(v_infinity + norms - complex(z))
        if np.any(kap.real <= 0):
            raise PreconditionError("z lies on a shifted essential-spectrum cut")
        return kap


# ---------------------------------------------------------------------------
# Fourier-coefficient potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierPotential:
    """Transverse Fourier data of a cylinder potential offset.

    coefficients maps wave vectors (tuples) to vectorized callables of x1.
    Vectors with |m| <= m_max that are absent are an error when requested;
    those beyond m_max are identically zero (declared band limit).
    """

    d: int
    v_infinity: float
    coefficients: dict
    m_max: int
    x_max: float = 20.0
    aliasing_warning: bool = False
    parseval_defect: float = 0.0

    def __post_init__(self):
        if self.d not in (2, 3):
            raise PreconditionError("d must be 2 or 3")
        if self.v_infinity <= 0:
            raise PreconditionError("v_infinity must be positive")
        canon = {}
        for key, fun in self.coefficients.items():
            canon[_canon_key(key, self.d)] = fun
        object.__setattr__(self, "coefficients", canon)

    def coeff(self, m):
        key = _canon_key(m, self.d)
        if key in self.coefficients:
            return self.coefficients[key]
        if _mode_norm2(key) > self.m_max * self.m_max:
            return None     # beyond the declared band: identically zero
        raise PreconditionError(
            f"missing Fourier coefficient for wave vector {key} "
            f"(declared band |m| <= {self.m_max})"
        )

    def coeff_l2(self, m, n_quad: int = 4001) -> float:
        fun = self.coeff(m)
        if fun is None:
            return 0.0
        x = np.linspace(-self.x_max, self.x_max, n_quad)
        vals = np.asarray(fun(x))
        return float(np.sqrt(np.trapezoid(np.abs(vals) ** 2, x).real))

    def integral_w0(self, n_quad: int = 8001) -> complex:
        fun = self.coeff(tuple([0] * (self.d - 1)))
        if fun is None:
            return 0.0
        x = np.linspace(-self.x_max, self.x_max, n_quad)
        return complex(np.trapezoid(np.asarray(fun(x)), x))


def _canon_key(m, d: int):
    if np.isscalar(m):
        key = (int(m),)
    else:
        key = tuple(int(c) for c in m)
    if len(key) != d - 1:
        raise PreconditionError(f"wave vector {key} has wrong dimension for d={d}")
    return key


def planar_potential(p: Potential1D, d: int = 2) -> FourierPotential:
    """Planar potential: only the zero mode is present."""
    zero = tuple([0] * (d - 1))
    return FourierPotential(d, p.v_infinity, {zero: p.w_callable}, 0, p.x_max)


def cosine_coupled_potential(p: Potential1D, amplitude: float,
                             d: int = 2) -> FourierPotential:
    """W(x1, y) = W0(x1) (1 + amplitude cos y1): modes 0 and +-1."""
    base = p.w_callable
    half = 0.5 * amplitude

    def w0(x):
        return base(x)

    def w1(x):
        return half * base(x)

    if d == 2:
        coeffs = {(0,): w0, (1,): w1, (-1,): w1}
    else:
        coeffs = {(0, 0): w0, (1, 0): w1, (-1, 0): w1}
    return FourierPotential(d, p.v_infinity, coeffs, 1, p.x_max)


def fourier_decompose(w_samples: np.ndarray, d: int, m_max: int,
                      x1_grid: np.ndarray, v_infinity: float,
                      nyquist_tol: float = 1e-10) -> FourierPotential:
    """Fourier coefficients of sampled W(x1, y) on a uniform periodic y grid.

    d=2: w_samples has shape (n_x, n_y); d=3: (n_x, n_y, n_y).  The
    transform is the FFT-consistent trapezoid rule (exact for band-limited
    data).  A Parseval defect and an aliasing flag (energy at the Nyquist
    mode) are recorded.
    """
    from scipy.interpolate import CubicSpline

    w = np.asarray(w_samples)
    x1 = np.asarray(x1_grid, dtype=float)
    if d == 2:
        if w.ndim != 2:
            raise PreconditionError("d=2 expects (n_x, n_y) samples")
        n_y = w.shape[1]
        if n_y <= 2 * m_max:
            raise PreconditionError("y-grid must have more than 2*m_max nodes")
        hat = np.fft.fft(w, axis=1) / n_y
        nyq = float(np.max(np.abs(hat[:, n_y // 2]))) if n_y % 2 == 0 else 0.0
        alias = nyq > nyquist_tol * max(1.0, float(np.max(np.abs(w))))
        coeffs = {}
        for m in range(-m_max, m_max + 1):
            col = hat[:, m % n_y]
            if np.max(np.abs(col.imag)) < 1e-14 * max(1.0, np.max(np.abs(col))):
                col = col.real
            spline = CubicSpline(x1, col)
            coeffs[(m,)] = _window_spline(spline, x1[0], x1[-1])
        total = float(np.sum(np.abs(w) ** 2) / n_y)
        kept = float(np.sum(np.abs(hat) ** 2) * n_y / n_y)
        defect = abs(total - kept) / max(total, 1e-300)
        return FourierPotential(d, v_infinity, coeffs, m_max,
                                x_max=float(min(-x1[0], x1[-1])),
                                aliasing_warning=alias,
                                parseval_defect=defect)
    if d == 3:
        if w.ndim != 3:
            raise PreconditionError("d=3 expects (n_x, n_y, n_y) samples")
        n_y = w.shape[1]
        if n_y <= 2 * m_max:
            raise PreconditionError("y-grid must have more than 2*m_max nodes")
        hat = np.fft.fft2(w, axes=(1, 2)) / (n_y * n_y)
        alias = False
        if n_y % 2 == 0:
            alias = float(np.max(np.abs(hat[:, n_y // 2, :]))) > nyquist_tol
        coeffs = {}
        for m2 in range(-m_max, m_max + 1):
            for m3 in range(-m_max, m_max + 1):
                if m2 * m2 + m3 * m3 > m_max * m_max:
                    continue
                col = hat[:, m2 % n_y, m3 % n_y]
                spline = CubicSpline(x1, col)
                coeffs[(m2, m3)] = _window_spline(spline, x1[0], x1[-1])
        return FourierPotential(d, v_infinity, coeffs, m_max,
                                x_max=float(min(-x1[0], x1[-1])),
                                aliasing_warning=alias)
    raise PreconditionError("d must be 2 or 3")


def _window_spline(spline, lo, hi):
    def f(t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= lo) & (t <= hi), spline(np.clip(t, lo, hi)), 0.0)
    return f


# ---------------------------------------------------------------------------
# truncated kernel, trace, determinants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedKernel:
    z: complex
    truncation: GalerkinTruncation
    grid: NystromGrid
    assembled: np.ndarray       # balanced dense (M N_J) x (M N_J)
    kappas: np.ndarray
    blocks: tuple               # (j, m, coefficient key or None) descriptors


def assemble_truncated_kernel(fp: FourierPotential, trunc: GalerkinTruncation,
                              z: complex, g: NystromGrid) -> TruncatedKernel:
    """Dense symmetric-balanced Nystrom matrix of the truncated kernel."""
    modes = trunc.mode_index
    kap = trunc.kappas(z, fp.v_infinity)
    x = g.nodes
    n = x.size
    nj = trunc.n_modes
    if n * nj > MAX_DENSE_SIZE:
        raise PreconditionError(
            f"dense size {n * nj} exceeds cap {MAX_DENSE_SIZE}"
        )
    sq = np.sqrt(g.weights)
    big = np.zeros((n * nj, n * nj), dtype=complex)
    descriptors = []
    dist = np.abs(x[:, None] - x[None, :])
    for aj, j in enumerate(modes):
        green = np.exp(-kap[aj] * dist) / (2.0 * kap[aj])
        for am, m in enumerate(modes):
            key = tuple(jj - mm for jj, mm in zip(j, m))
            fun = fp.coeff(key)
            descriptors.append((j, m, key if fun is not None else None))
            if fun is None:
                continue
            wvals = np.asarray(fun(x), dtype=complex)
            blk = -green * (wvals * g.weights)[None, :]
            big[aj * n:(aj + 1) * n, am * n:(am + 1) * n] = \
                (blk / g.weights[None, :]) * sq[None, :] * sq[:, None]
    return TruncatedKernel(complex(z), trunc, g, big, kap, tuple(descriptors))


def theta_j(fp: FourierPotential, trunc: GalerkinTruncation, z: complex
            ) -> complex:
    """Trace of the truncated kernel in the coefficient-space normalization."""
    kap = trunc.kappas(z, fp.v_infinity)
    return -0.5 * fp.integral_w0() * np.sum(1.0 / kap)


def f2j(fp: FourierPotential, trunc: GalerkinTruncation, z: complex,
        route: str = "nystrom", grid: NystromGrid | None = None,
        levels: int = 2, steps: int | None = None,
        policy: NumericPolicy = DEFAULT_POLICY) -> complex:
    """2-modified determinant of the truncated operator.

    route 'nystrom' evaluates det2 of the dense matrix with node-doubling
    extrapolation; 'semiseparable' reduces through the fundamental solution
    of the preconditioned first-order system.
    """
    if route == "nystrom":
        if grid is None:
            grid = gauss_legendre_composite(-fp.x_max, fp.x_max, 20, 10)
        vals = []
        g = grid
        for _ in range(max(1, levels)):
            kern = assemble_truncated_kernel(fp, trunc, z, g)
            m = kern.assembled
            sign, lab = np.linalg.slogdet(np.eye(m.shape[0]) - m)
            vals.append(sign * np.exp(lab) * np.exp(np.trace(m)))
            g = g.refined()
        return romberg_even(vals)
    if route == "semiseparable":
        kernel = _semisep_kernel(fp, trunc, z)
        if steps is None:
            kmax = float(np.max(np.abs(trunc.kappas(z, fp.v_infinity))))
            steps = int(max(2000, 20 * kmax * 2 * fp.x_max))
        return semisep.det_semiseparable(kernel, modified=True, steps=steps)
    raise PreconditionError(f"unknown route {route!r}")


def _wmat_batch_factory(fp: FourierPotential, trunc: GalerkinTruncation):
    """Vectorized xs -> (len(xs), N_J, N_J) coupling matrices W_{j-m}(x)."""
    modes = trunc.mode_index
    nj = trunc.n_modes
    funs = {}
    for j in modes:
        for m in modes:
            key = tuple(jj - mm for jj, mm in zip(j, m))
            if key not in funs:
                funs[key] = fp.coeff(key)

    def wmats(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        cache = {key: (np.asarray(fun(xs), dtype=complex)
                       if fun is not None else None)
                 for key, fun in funs.items()}
        out = np.zeros((xs.size, nj, nj), dtype=complex)
        for aj, j in enumerate(modes):
            for am, m in enumerate(modes):
                vals = cache[tuple(jj - mm for jj, mm in zip(j, m))]
                if vals is not None:
                    out[:, aj, am] = vals
        return out

    return wmats


def _semisep_kernel(fp: FourierPotential, trunc: GalerkinTruncation,
                    z: complex) -> semisep.SemiSeparableKernel:
    """Matrix semi-separable factorization of the truncated kernel."""
    kap = trunc.kappas(z, fp.v_infinity)
    nj = trunc.n_modes
    wmats = _wmat_batch_factory(fp, trunc)

    def wmat(x):
        return wmats(np.array([x]))[0]

    def f_upper(x):
        return np.diag(-np.exp(kap * x) / (2.0 * kap))

    def f_lower(x):
        return np.diag(-np.exp(-kap * x) / (2.0 * kap))

    def g_upper(x):
        # (G1)_{m,j} = e^{-kappa_j x} W_{j-m}(x)
        return (wmat(x) * np.exp(-kap * x)[:, None]).T

    def g_lower(x):
        return (wmat(x) * np.exp(kap * x)[:, None]).T

    def batch(xs):
        xs = np.asarray(xs, dtype=float)
        n = xs.size
        ep = np.exp(kap[None, :] * xs[:, None])        # (n, nj)
        em = np.exp(-kap[None, :] * xs[:, None])
        f1s = np.zeros((n, nj, nj), dtype=complex)
        f2s = np.zeros((n, nj, nj), dtype=complex)
        idx = np.arange(nj)
        f1s[:, idx, idx] = -ep / (2.0 * kap[None, :])
        f2s[:, idx, idx] = -em / (2.0 * kap[None, :])
        ws = wmats(xs)
        g1s = np.transpose(ws * em[:, :, None], (0, 2, 1))
        g2s = np.transpose(ws * ep[:, :, None], (0, 2, 1))
        return f1s, g1s, f2s, g2s

    return semisep.SemiSeparableKernel(
        block_dim=nj, f1=f_upper, g1=g_upper, f2=f_lower, g2=g_lower,
        a=-fp.x_max, b=fp.x_max, value_dim=nj, decay_rates=kap, batch=batch,
    )


# ---------------------------------------------------------------------------
# Galerkin Evans function
# ---------------------------------------------------------------------------

def evans_ej(fp: FourierPotential, trunc: GalerkinTruncation, z: complex,
             step_cap: float = 0.1, reorth_every: int = 50,
             match_point: float = 0.0) -> complex:
    """Galerkin Evans function, normalized so that W == 0 gives 1.

    The 2 N_J-dimensional first-order system is integrated in the
    diagonalized (preconditioned) frame diag(-h^{1/2}, h^{1/2}) + coupling;
    the stable basis is carried from +X and the unstable basis from -X with
    periodic QR renormalization, the two frames are matched at match_point,
    and the free-solution growth factors are divided out so the W == 0
    determinant is exactly 1.
    """
    nj = trunc.n_modes
    kap = trunc.kappas(z, fp.v_infinity)
    wmats = _wmat_batch_factory(fp, trunc)
    inv2kap = 0.5 / kap
    diag = np.diag(np.concatenate([-kap, kap]))

    def coefficients_at(xs):
        c = wmats(xs) * inv2kap[None, None, :]     # (n, nj, nj): (1/2) W h^{-1/2}
        top = np.concatenate([-c, -c], axis=2)
        bot = np.concatenate([c, c], axis=2)
        return np.concatenate([top, bot], axis=1) + diag[None, :, :]

    x_max = fp.x_max
    kmax = float(np.max(np.abs(kap)))
    n_half = int(np.ceil((x_max - match_point) / (step_cap / max(kmax, 1.0))))
    n_half = max(n_half, 200)

    def integrate(z0, x0, x1, nsteps, chunk=512):
        zc = z0.copy()
        logdet = 0.0 + 0.0j
        h = (x1 - x0) / nsteps
        done = 0
        while done < nsteps:
            n_here = min(chunk, nsteps - done)
            xs = x0 + done * h + 0.5 * h * np.arange(2 * n_here + 1)
            mats = coefficients_at(xs)
            for s in range(n_here):
                m0, mh, m1 = mats[2 * s], mats[2 * s + 1], mats[2 * s + 2]
                k1 = m0 @ zc
                k2 = mh @ (zc + 0.5 * h * k1)
                k3 = mh @ (zc + 0.5 * h * k2)
                k4 = m1 @ (zc + h * k3)
                zc = zc + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                idx = done + s
                if (idx + 1) % reorth_every == 0 or idx == nsteps - 1:
                    q, r = np.linalg.qr(zc)
                    d = np.diag(r).astype(complex)
                    if np.any(d == 0) or not np.all(np.isfinite(d)):
                        raise NumericalError(
                            "Evans frame degenerated; reduce the step size"
                        )
                    logdet += np.sum(np.log(d))
                    zc = q
            done += n_here
        return zc, logdet

    plus0 = np.vstack([np.eye(nj, dtype=complex),
                       np.zeros((nj, nj), dtype=complex)])
    minus0 = np.vstack([np.zeros((nj, nj), dtype=complex),
                        np.eye(nj, dtype=complex)])
    zp, logp = integrate(plus0, x_max, match_point, n_half)
    n_halfm = int(np.ceil((match_point + x_max) / (step_cap / max(kmax, 1.0))))
    n_halfm = max(n_halfm, 200)
    zm, logm = integrate(minus0, -x_max, match_point, n_halfm)
    frame = np.hstack([zp, zm])
    sign, lab = np.linalg.slogdet(frame)
    if sign == 0:
        raise NumericalError("matched Evans frame is singular")
    log_e = np.log(sign) + lab + logp + logm - np.sum(kap) * 2.0 * x_max
    return np.exp(log_e)


# ---------------------------------------------------------------------------
# equivalence and convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceReport:
    z: complex
    J: int
    f2j: complex
    theta: complex
    evans: complex
    residual: float


def equivalence_check(fp: FourierPotential, trunc: GalerkinTruncation,
                      z: complex, route: str = "nystrom",
                      **kwargs) -> EquivalenceReport:
    """Residual of the renormalized identity F2J = e^{Theta_J} E_J."""
    f2 = f2j(fp, trunc, z, route=route, **kwargs)
    th = theta_j(fp, trunc, z)
    ej = evans_ej(fp, trunc, z)
    resid = abs(f2 - np.exp(th) * ej) / max(1.0, abs(f2))
    return EquivalenceReport(complex(z), trunc.J, f2, th, ej, float(resid))


def block_hs_norm2(fp: FourierPotential, j, m, kappa_j: complex,
                   n_quad: int = 2001) -> float:
    """Squared HS norm of one kernel block over [-X, X]^2 (exact in x)."""
    key = tuple(jj - mm for jj, mm in zip(j, m))
    fun = fp.coeff(key)
    if fun is None:
        return 0.0
    X = fp.x_max
    xs = np.linspace(-X, X, n_quad)
    wv = np.abs(np.asarray(fun(xs))) ** 2
    rk = kappa_j.real
    inner = (2.0 - np.exp(-2.0 * rk * (X - xs)) - np.exp(-2.0 * rk * (X + xs))
             ) / (2.0 * rk)
    return float(np.trapezoid(wv * inner, xs) / (4.0 * abs(kappa_j) ** 2))


def hs_norm_and_bound(fp: FourierPotential, trunc: GalerkinTruncation,
                      z: complex) -> tuple[float, float]:
    """(HS norm of K_J, structural upper bound c sum_j (vinf+|j|^2)^{-3/2})."""
    modes = trunc.mode_index
    kap = trunc.kappas(z, fp.v_infinity)
    total = 0.0
    for aj, j in enumerate(modes):
        for m in modes:
            total += block_hs_norm2(fp, j, m, kap[aj])
    norms2 = [fp.coeff_l2(tuple(jj - mm for jj, mm in zip(j, m))) ** 2
              for j in modes for m in modes]
    sum_w2 = sum(norms2)
    c = max(float((fp.v_infinity + _mode_norm2(j)) ** 1.5
                  / (4.0 * abs(k) ** 2 * k.real))
            for j, k in zip(modes, kap))
    bound = c * sum(
        (fp.v_infinity + _mode_norm2(j)) ** -1.5 for j in modes) * sum_w2
    return float(np.sqrt(total)), float(bound)


@dataclass(frozen=True)
class ConvergenceRow:
    J: int
    hs_distance: float
    f2_difference: float


@dataclass(frozen=True)
class ConvergenceTable:
    z: complex
    j_reference: int
    rows: tuple
    hs_slope: float
    f2_slope: float

    @property
    def hs_monotone(self) -> bool:
        d = [r.hs_distance for r in self.rows]
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))

    @property
    def f2_monotone(self) -> bool:
        d = [r.f2_difference for r in self.rows]
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))


def convergence_study(fp: FourierPotential, z: complex, j_list,
                      route: str = "semiseparable") -> ConvergenceTable:
    """Distances to the reference truncation J_ref = max(j_list).

    HS distances use the exact per-block norms (block orthogonality of the
    truncation); determinant differences use the requested route.  Log-log
    slopes are least-squares fits against J.
    """
    js = sorted(set(int(j) for j in j_list))
    if len(js) < 3:
        raise PreconditionError("need at least three truncation levels")
    j_ref = max(js)
    d = fp.d
    trunc_ref = GalerkinTruncation(j_ref, d)
    kap_ref = trunc_ref.kappas(z, fp.v_infinity)
    kap_map = dict(zip(trunc_ref.mode_index, kap_ref))
    f2_ref = f2j(fp, trunc_ref, z, route=route)
    rows = []
    for J in js:
        if J == j_ref:
            continue
        keep = set(GalerkinTruncation(J, d).mode_index)
        total = 0.0
        for j in trunc_ref.mode_index:
            for m in trunc_ref.mode_index:
                if j in keep and m in keep:
                    continue
                total += block_hs_norm2(fp, j, m, kap_map[j])
        f2_val = f2j(fp, GalerkinTruncation(J, d), z, route=route)
        rows.append(ConvergenceRow(J, float(np.sqrt(total)),
                                   float(abs(f2_val - f2_ref))))
    logj = np.log([r.J for r in rows])
    hs_slope = float(np.polyfit(logj, np.log([r.hs_distance for r in rows]), 1)[0])
    f2_slope = float(np.polyfit(
        logj, np.log([max(r.f2_difference, 1e-300) for r in rows]), 1)[0])
    return ConvergenceTable(complex(z), j_ref, tuple(rows), hs_slope, f2_slope)
