"""1D potentials with a positive asymptotic value.

A Potential1D carries the asymptotic value v_infinity and the offset
W = V - v_infinity, both as a callable (needed on quadrature nodes that are
not grid points) and as samples on a uniform truncation grid.  Built-in
generators cover the soliton family produced by the pulse solutions of the
scalar reaction-diffusion model (see stabindex); arbitrary potentials load
from two-column text files.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import PreconditionError

DEFAULT_X_MAX = 20.0
DEFAULT_NODES = 4001


@dataclass(frozen=True)
class Potential1D:
    """Offset potential W = V - V_inf on a symmetric truncated domain."""

    v_infinity: float
    w_callable: object                 # vectorized x -> W(x)
    x_max: float = DEFAULT_X_MAX
    n_nodes: int = DEFAULT_NODES
    tail_bound: float = 0.0            # sup |W| outside [-x_max, x_max]
    label: str = "user"
    grid: np.ndarray = field(init=False)
    w_samples: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.v_infinity <= 0:
            raise PreconditionError("v_infinity must be positive")
        if self.x_max <= 0 or self.n_nodes < 3:
            raise PreconditionError("bad truncation grid")
        grid = np.linspace(-self.x_max, self.x_max, self.n_nodes)
        w = np.asarray(self.w_callable(grid), dtype=float)
        if not np.all(np.isfinite(w)):
            raise PreconditionError("potential samples are not finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "w_samples", w)

    def w(self, x):
        return self.w_callable(np.asarray(x, dtype=float))

    def u(self, x):
        w = self.w(x)
        return np.sign(w) * np.sqrt(np.abs(w))

    def v(self, x):
        return np.sqrt(np.abs(self.w(x)))

    @property
    def l1_norm(self) -> float:
        return float(np.trapezoid(np.abs(self.w_samples), self.grid))

    def shifted(self, y: float) -> "Potential1D":
        """Potential x -> W(x + y) on the same grid."""
        base = self.w_callable
        return Potential1D(self.v_infinity, lambda x, b=base, y=y: b(x + y),
                           self.x_max, self.n_nodes, self.tail_bound,
                           label=f"{self.label}|shift{y:+g}")


def kdv_potential(n: int, kappa: float = 1.0, c: float = 1.0,
                  x_max: float = DEFAULT_X_MAX, n_nodes: int = DEFAULT_NODES
                  ) -> Potential1D:
    """Soliton-family potential: V_inf = (n-1)^2 kappa^2, W = -n(n+1)kappa^2 sech^2(kappa x).

    The amplitude parameter c moves the underlying pulse but not the
    linearized potential.
    """
    if n < 2 or kappa <= 0 or c <= 0:
        raise PreconditionError("need n >= 2, kappa > 0, c > 0")
    vinf = (n - 1) ** 2 * kappa ** 2
    amp = -n * (n + 1) * kappa ** 2

    def w(x):
        return amp / np.cosh(kappa * x) ** 2

    tail = abs(amp) / np.cosh(kappa * x_max) ** 2
    return Potential1D(vinf, w, x_max, n_nodes, tail,
                       label=f"kdv:{n}:{kappa:g}:{c:g}")


def free_potential(v_infinity: float = 1.0, x_max: float = DEFAULT_X_MAX,
                   n_nodes: int = DEFAULT_NODES) -> Potential1D:
    """W identically zero (free comparison problem)."""
    return Potential1D(v_infinity, lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                       x_max, n_nodes, 0.0, label="free")


def gaussian_bump_potential(coeffs, width: float = 2.0,
                            v_infinity: float = 1.0,
                            x_max: float = DEFAULT_X_MAX,
                            n_nodes: int = DEFAULT_NODES) -> Potential1D:
    """Smooth rapidly-decaying test potential from a few Fourier-like knobs."""
    c = np.asarray(coeffs, dtype=float)

    def w(x):
        bump = np.exp(-x ** 2 / (2.0 * width ** 2))
        osc = c[0] + sum(c[i] * np.sin(0.7 * i * x + 0.3 * i) for i in range(1, len(c)))
        return bump * osc

    tail = float(np.max(np.abs(w(np.array([x_max, -x_max])))))
    return Potential1D(v_infinity, w, x_max, n_nodes, tail, label="bump")


def parse_potential(spec: str, x_max: float = DEFAULT_X_MAX,
                    n_nodes: int = DEFAULT_NODES) -> Potential1D:
    """Parse a potential spec string: 'kdv:<n>[:<kappa>[:<c>]]' or a file path."""
    if spec.startswith("kdv:"):
        parts = spec.split(":")
        n = int(parts[1])
        kappa = float(parts[2]) if len(parts) > 2 else 1.0
        c = float(parts[3]) if len(parts) > 3 else 1.0
        return kdv_potential(n, kappa, c, x_max, n_nodes)
    return load_potential(spec, n_nodes=n_nodes)


def load_potential(path: str, n_nodes: int = DEFAULT_NODES) -> Potential1D:
    """Two-column text file (x, W(x)) with '# v_infinity = ' and
    '# tail_bound = ' header lines."""
    vinf = None
    tail = 0.0
    xs, ws = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, val = (s.strip() for s in body.split("=", 1))
                    if key == "v_infinity":
                        vinf = float(val)
                    elif key == "tail_bound":
                        tail = float(val)
                continue
            cols = line.split()
            xs.append(float(cols[0]))
            ws.append(float(cols[1]))
    if vinf is None:
        raise PreconditionError(f"{path}: missing '# v_infinity = ' header")
    x = np.asarray(xs)
    if x.size < 4 or np.any(np.diff(x) <= 0):
        raise PreconditionError(f"{path}: need an increasing x column")
    spline = CubicSpline(x, np.asarray(ws), extrapolate=False)
    x_max = float(min(-x[0], x[-1]))

    def w(t):
        t = np.asarray(t, dtype=float)
        out = spline(np.clip(t, x[0], x[-1]))
        return np.where(np.abs(t) <= x_max, out, 0.0)

    return Potential1D(vinf, w, x_max, n_nodes, tail, label=path)


def save_potential(p: Potential1D, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# v_infinity = {p.v_infinity:.17g}\n")
        fh.write(f"# tail_bound = {p.tail_bound:.17g}\n")
        for x, w in zip(p.grid, p.w_samples):
            fh.write(f"{x:.17g} {w:.17g}\n")
