"""Dense complex linear algebra and determinant perturbation expansions.

Centre piece: the small-z behaviour of det(I - A(z)) and of the 2-modified
determinant det2(I - A(z)) = det((I - A(z)) e^{A(z)}) for an analytic matrix
family A(z) = A0 + A1 z + ..., in both the regular case (I - A0 invertible)
and the singular case (1 an eigenvalue of A0).  In the singular case the
leading coefficient is assembled from the Riesz projection P0 of A0 at 1,
the quasinilpotent part D0 = (A0 - I)P0, and the minor of the transformed
first-order coefficient obtained by striking the rows and columns in which
the Jordan form of D0 carries an off-diagonal one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, PreconditionError
from .policy import DEFAULT_POLICY, NumericPolicy


# ---------------------------------------------------------------------------
# basic helpers
# ---------------------------------------------------------------------------

def as_square_matrix(a) -> np.ndarray:
    """Validate and return a finite square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError("matrix has non-finite entries")
    return m


def logdet(m: np.ndarray) -> complex:
    """log det of a general complex matrix via LU (complex logarithm)."""
    sign, lab = np.linalg.slogdet(m)
    if sign == 0:
        return complex(-np.inf, 0.0)
    return np.log(sign) + lab


def det_i_minus(a: np.ndarray) -> complex:
    """det(I - A) with log accumulation to dodge overflow."""
    a = as_square_matrix(a)
    sign, lab = np.linalg.slogdet(np.eye(a.shape[0]) - a)
    return sign * np.exp(lab)


def det_and_det2(a) -> tuple[complex, complex]:
    """Return (det(I-A), det2(I-A)) where det2(I-A) = det(I-A) exp(tr A)."""
    a = as_square_matrix(a)
    d = det_i_minus(a)
    return d, d * np.exp(np.trace(a))


def trace_norm(a) -> float:
    """Sum of singular values (finite-dimensional trace norm)."""
    return float(np.sum(np.linalg.svd(as_square_matrix(a), compute_uv=False)))


def hs_norm(a) -> float:
    """Frobenius / Hilbert-Schmidt norm."""
    return float(np.linalg.norm(np.asarray(a)))


# ---------------------------------------------------------------------------
# analytic families and expansion results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticMatrixFamily:
    """Polynomial truncation A(z) = sum_l coefficients[l] z^l, valid |z|<radius."""

    coefficients: tuple
    radius: float = 1.0

    def __post_init__(self):
        if len(self.coefficients) < 2:
            raise PreconditionError("need at least A0 and A1")
        mats = tuple(as_square_matrix(c) for c in self.coefficients)
        dims = {m.shape[0] for m in mats}
        if len(dims) != 1:
            raise PreconditionError(f"coefficient dimensions differ: {dims}")
        if self.radius <= 0:
            raise PreconditionError("radius must be positive")
        object.__setattr__(self, "coefficients", mats)

    @property
    def dim(self) -> int:
        return self.coefficients[0].shape[0]

    @property
    def a0(self) -> np.ndarray:
        return self.coefficients[0]

    @property
    def a1(self) -> np.ndarray:
        return self.coefficients[1]

    def __call__(self, z: complex) -> np.ndarray:
        acc = np.zeros_like(self.coefficients[0])
        for c in reversed(self.coefficients):
            acc = acc * z + c
        return acc


@dataclass(frozen=True)
class ExpansionResult:
    """Leading behaviour of z -> det(I - A(z)) near z = 0.

    order               index of the first generically nonvanishing Taylor
                        coefficient (n0 - nu0 in the singular case).
    leading_coefficient coefficient of z^order (for order 0 this repeats
                        `constant`; the z-coefficient is then in `slope`).
    constant            value at z = 0.
    slope               first-order coefficient (regular case only).
    next_order_bound    magnitude estimate of the next Taylor coefficient.
    modified            True if the quantities refer to det2.
    """

    order: int
    leading_coefficient: complex
    constant: complex
    slope: complex
    next_order_bound: float
    modified: bool


# ---------------------------------------------------------------------------
# Riesz projections by contour quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RieszData:
    """Spectral data of A0 at an isolated eigenvalue (default: 1).

    projection             Riesz projection P0 (not orthogonal in general).
    nilpotent              D0 = (A0 - center I) P0.
    n0                     algebraic multiplicity = trace P0.
    nu0                    number of off-diagonal ones in the Jordan form of
                           D0 restricted to ran P0 (= rank of D0).
    complement_projection  Q0 = I - P0.
    center                 eigenvalue the projection belongs to.
    """

    projection: np.ndarray
    nilpotent: np.ndarray
    n0: int
    nu0: int
    complement_projection: np.ndarray
    center: complex = 1.0 + 0.0j

    def validate(self, tol: float = 1e-7) -> None:
        p, d = self.projection, self.nilpotent
        scale = max(1.0, np.linalg.norm(p))
        if np.linalg.norm(p @ p - p) > tol * scale:
            raise NumericalError("projection is not idempotent")
        if np.linalg.norm(p @ d - d) > tol * scale or np.linalg.norm(d @ p - d) > tol * scale:
            raise NumericalError("nilpotent part does not commute with projection")
        if abs(np.trace(p) - self.n0) > 1e-6 * max(1, self.n0):
            raise NumericalError("trace of projection is not the multiplicity")
        dn = np.linalg.matrix_power(d, max(self.n0, 1))
        if np.linalg.norm(dn) > tol * max(1.0, np.linalg.norm(d)) ** max(self.n0, 1):
            raise NumericalError("nilpotent part is not nilpotent of expected index")
        if not (0 <= self.nu0 <= max(self.n0 - 1, 0)):
            raise NumericalError("nu0 outside [0, n0-1]")


def riesz_projection(a0, center: complex = 1.0, radius: float = 0.1,
                     nodes: int = 64, policy: NumericPolicy = DEFAULT_POLICY
                     ) -> RieszData:
    """Riesz projection of A0 at the eigenvalue group inside a circle.

    Trapezoid quadrature of -(2 pi i)^{-1} oint (A0 - zeta I)^{-1} d zeta on
    the circle |zeta - center| = radius; node count doubles until the trace
    is integral to within policy.trace_tol.
    """
    a0 = as_square_matrix(a0)
    dim = a0.shape[0]
    ident = np.eye(dim)
    scale = max(1.0, np.linalg.norm(a0, 2))

    dist = np.abs(np.abs(np.linalg.eigvals(a0) - center) - radius)
    if np.min(dist) < policy.tol_circle * scale:
        raise PreconditionError("contour through spectrum")

    n = max(nodes, 8)
    while True:
        theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        zeta = center + radius * np.exp(1j * theta)
        acc = np.zeros((dim, dim), dtype=complex)
        for t, zt in zip(theta, zeta):
            # -(2 pi i)^{-1} * (i r e^{i t} dtheta) * (A0 - zeta)^{-1}
            acc += np.linalg.solve(a0 - zt * ident, ident) \
                * (radius * np.exp(1j * t))
        p0 = -acc / n
        tr = np.trace(p0)
        n0 = int(round(tr.real))
        if abs(tr - n0) <= policy.trace_tol:
            break
        n *= 2
        if n > 16384:
            raise NumericalError(
                f"contour resolution insufficient: trace {tr} not integral"
            )

    d0 = (a0 - center * ident) @ p0
    nu0 = _nilpotent_rank(d0, policy)
    if n0 > 0 and nu0 > n0 - 1:
        raise NumericalError("rank of nilpotent part exceeds n0 - 1")
    return RieszData(p0, d0, n0, nu0, ident - p0, center=complex(center))


def _nilpotent_rank(d0: np.ndarray, policy: NumericPolicy) -> int:
    """Rank of D0 by singular-value thresholding, with a cluster check."""
    sv = np.linalg.svd(d0, compute_uv=False)
    if sv.size == 0 or sv[0] <= policy.rank_tol:
        return 0
    thresh = policy.rank_tol * sv[0]
    kept = sv[sv > thresh]
    dropped = sv[sv <= thresh]
    if dropped.size and kept.size and dropped[0] > 0:
        if kept[-1] / dropped[0] < 1e3:
            raise NumericalError(
                "singular values of the nilpotent part do not cluster cleanly; "
                "Jordan structure is numerically ambiguous"
            )
    return int(kept.size)


# ---------------------------------------------------------------------------
# range bases and restricted operators
# ---------------------------------------------------------------------------

def _range_basis(p: np.ndarray, rank: int) -> np.ndarray:
    """Orthonormal basis (columns) of ran(p) for a rank-`rank` projection."""
    u, sv, _ = np.linalg.svd(p)
    return u[:, :rank]


def _restricted(op: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Matrix of x -> op x restricted to span(basis), in that basis.

    Valid whenever op maps span(basis) into itself.
    """
    return basis.conj().T @ (op @ basis)


# ---------------------------------------------------------------------------
# Jordan chains of a small nilpotent matrix
# ---------------------------------------------------------------------------

def _jordan_chain_basis(n: np.ndarray, rank_tol: float) -> tuple[np.ndarray, list[int]]:
    """Chain basis X with X^{-1} N X in Jordan form, for nilpotent N.

    Returns (X, heights) where heights lists the Jordan block sizes in the
    order the corresponding columns appear in X (each block contributes
    columns N^{h-1}v, ..., N v, v).
    """
    dim = n.shape[0]
    norm = np.linalg.norm(n, 2)
    if dim == 0:
        return np.zeros((0, 0), dtype=complex), []
    if norm <= rank_tol:        # semisimple: nilpotent part is pure noise
        return np.eye(dim, dtype=complex), [1] * dim

    def rank_of(m):
        sv = np.linalg.svd(m, compute_uv=False)
        return int(np.sum(sv > rank_tol * max(sv[0], norm)))

    ranks = [dim]
    power = np.eye(dim, dtype=complex)
    while ranks[-1] > 0:
        power = power @ n
        ranks.append(rank_of(power))
        if len(ranks) > dim + 1:
            raise NumericalError("matrix is not numerically nilpotent")
    p = len(ranks) - 1  # nilpotency index

    def kernel_basis(m):
        u, sv, vh = np.linalg.svd(m)
        r = int(np.sum(sv > rank_tol * max(sv[0] if sv.size else 0.0, norm)))
        return vh[r:].conj().T  # columns span ker m

    blocks: list[tuple[int, np.ndarray]] = []  # (height, head vector)
    chain_cols: list[np.ndarray] = []
    for k in range(p, 0, -1):
        kerk = kernel_basis(np.linalg.matrix_power(n, k))
        # span to exclude: ker N^{k-1} plus height-k members of taller chains
        excl = [kernel_basis(np.linalg.matrix_power(n, k - 1))] if k > 1 else []
        for h, head in blocks:
            excl.append((np.linalg.matrix_power(n, h - k) @ head)[:, None])
        n_new = (ranks[k - 1] - ranks[k]) - sum(1 for h, _ in blocks if h > k)
        if n_new <= 0:
            continue
        if excl:
            e = np.hstack(excl)
            q, _ = np.linalg.qr(e)
            proj = kerk - q @ (q.conj().T @ kerk)
        else:
            proj = kerk
        u, sv, vh = np.linalg.svd(proj, full_matrices=False)
        if sv.size < n_new or (sv.size >= n_new and sv[n_new - 1] < 1e-8):
            raise NumericalError("Jordan chain extraction failed (ill conditioned)")
        heads = kerk @ vh[:n_new].conj().T
        for c in range(n_new):
            blocks.append((k, heads[:, c]))
    blocks.sort(key=lambda t: -t[0])
    heights = []
    for h, head in blocks:
        heights.append(h)
        for j in range(h - 1, -1, -1):
            chain_cols.append(np.linalg.matrix_power(n, j) @ head)
    x = np.stack(chain_cols, axis=1)
    if np.linalg.cond(x) > 1e10:
        raise NumericalError("Jordan chain basis is ill conditioned")
    # verify
    j = np.linalg.solve(x, n @ x)
    jexp = np.zeros_like(j)
    pos = 0
    for h in heights:
        for i in range(h - 1):
            jexp[pos + i, pos + i + 1] = 1.0
        pos += h
    if np.linalg.norm(j - jexp) > 1e-6 * max(1.0, norm):
        raise NumericalError("Jordan form verification failed")
    return x, heights


# ---------------------------------------------------------------------------
# expansions
# ---------------------------------------------------------------------------

def expansion_regular(fam: AnalyticMatrixFamily, modified: bool = False,
                      policy: NumericPolicy = DEFAULT_POLICY) -> ExpansionResult:
    """First-order expansion of det(I-A(z)) when I - A0 is invertible.

    Unmodified:  det(I-A0) * [1 - tr((I-A0)^{-1} A1) z + O(z^2)].
    2-modified:  det2(I-A0) * [1 - tr((I-A0)^{-1} A0 A1) z + O(z^2)].
    """
    a0, a1 = fam.a0, fam.a1
    ident = np.eye(fam.dim)
    im_a0 = ident - a0
    if np.linalg.cond(im_a0) > policy.cond_max:
        raise PreconditionError(
            "I - A0 is numerically singular; use expansion_singular"
        )
    inv = np.linalg.solve(im_a0, ident)
    if modified:
        const = det_and_det2(a0)[1]
        slope = -const * np.trace(inv @ a0 @ a1)
    else:
        const = det_i_minus(a0)
        slope = -const * np.trace(inv @ a1)
    order = 0 if const != 0 else 1
    nb = _coefficient_bound(fam, modified, 2)
    return ExpansionResult(order, const if order == 0 else slope,
                           const, slope, nb, modified)


def expansion_singular(fam: AnalyticMatrixFamily, riesz: RieszData,
                       modified: bool = False,
                       policy: NumericPolicy = DEFAULT_POLICY) -> ExpansionResult:
    """Leading term of det(I-A(z)) when 1 is an eigenvalue of A0.

    det(I-A(z)) = detQ * det(A1~) * (-z)^{n0-nu0} + O(z^{n0-nu0+1}),
    where detQ is the determinant of I - A0 restricted to the complement
    range and A1~ is the (n0-nu0)-minor of the transformed A1 obtained by
    striking the rows, respectively columns, in which the Jordan form of the
    nilpotent part carries a superdiagonal one.  The 2-modified variant takes
    the complement determinant as det2 and carries an extra factor e^{n0}.
    """
    n0, nu0 = riesz.n0, riesz.nu0
    if n0 == 0:
        raise PreconditionError("Riesz data carries no eigenvalue at 1")
    if nu0 >= n0:
        raise PreconditionError("inconsistent structure: nu0 must be < n0")
    a0, a1 = fam.a0, fam.a1
    dim = fam.dim

    # complement block determinant
    q_rank = dim - n0
    if q_rank > 0:
        uq = _range_basis(riesz.complement_projection, q_rank)
        mq = _restricted(riesz.complement_projection @ a0, uq)
        detq = det_i_minus(mq)
        if modified:
            detq *= np.exp(np.trace(mq))
    else:
        detq = 1.0 + 0.0j

    # eigen-block data in an orthonormal basis of ran P0
    up = _range_basis(riesz.projection, n0)
    d_p = _restricted(riesz.nilpotent, up)
    m_p = _restricted(riesz.projection @ a1, up)

    x, heights = _jordan_chain_basis(d_p, policy.rank_tol)
    a1_hat = np.linalg.solve(x, m_p @ x)
    # strike rows/columns where the Jordan form has its ones: within a block
    # of height h starting at s the ones are (s+i, s+i+1), i < h-1
    keep_rows, keep_cols = [], []
    pos = 0
    for h in heights:
        keep_rows.append(pos + h - 1)   # all but the last row are struck
        keep_cols.append(pos)           # all but the first column are struck
        pos += h
    a1_tilde = a1_hat[np.ix_(keep_rows, keep_cols)]
    det_a1t = np.linalg.det(a1_tilde) if a1_tilde.size else 1.0 + 0.0j

    if abs(det_a1t) < policy.degenerate_tol:
        raise NumericalError(
            "higher-order expansion needed: det of the struck minor vanishes"
        )

    order = n0 - nu0
    lead = detq * det_a1t * (-1.0) ** order
    if modified:
        lead *= np.exp(n0)
    nb = _coefficient_bound(fam, modified, order + 1)
    return ExpansionResult(order, lead, 0.0 + 0.0j, lead if order == 1 else 0.0,
                           nb, modified)


def _coefficient_bound(fam: AnalyticMatrixFamily, modified: bool,
                       order: int) -> float:
    """Magnitude estimate of Taylor coefficient `order` of the determinant."""
    rho = 0.5 * fam.radius

    def f(z):
        d, d2 = det_and_det2(fam(z))
        return d2 if modified else d

    coeffs = derivative_coefficients(f, 0.0, rho, order)
    return float(abs(coeffs[order]))


# ---------------------------------------------------------------------------
# contour Taylor coefficients
# ---------------------------------------------------------------------------

def derivative_coefficients(f, center: complex, radius: float, max_order: int,
                            nodes: int | None = None) -> np.ndarray:
    """Taylor coefficients c_0..c_max_order of f about `center`.

    Trapezoid rule on the circle of the given radius; spectrally accurate
    for f analytic on the closed disc.
    """
    if radius <= 0:
        raise PreconditionError("radius must be positive")
    if max_order < 0:
        raise PreconditionError("max_order must be nonnegative")
    m = nodes or max(64, 4 * (max_order + 1))
    theta = 2.0 * np.pi * np.arange(m) / m
    samples = np.array([f(center + radius * np.exp(1j * t)) for t in theta],
                       dtype=complex)
    if not np.all(np.isfinite(samples)):
        raise NumericalError("non-finite samples on the contour")
    # c_q = (1/(m rho^q)) sum f(theta_j) e^{-i q theta_j}
    fft = np.fft.fft(samples) / m
    orders = np.arange(max_order + 1)
    return fft[: max_order + 1] / radius ** orders
