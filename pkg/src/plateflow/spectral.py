"""Sine-basis spectral representation on the box (0, pi)^n.

Fields are expanded in products of sin(k_i x_i) with mode indices
k_i = 1..N-1 per axis and collocation nodes x_j = j*pi/N, j = 1..N-1.
In this basis the Dirichlet Laplacian is diagonal: mode k is an
eigenfunction with eigenvalue -lam_k, lam_k = sum_i k_i**2, so the
hinged-plate boundary conditions hold identically.

Normalization: coefficients are plain sine amplitudes (c_1 = 1 for
f = sin x).  The quadrature weight (pi/N)^n and the Parseval constant
(pi/2)^n relate nodal sums and coefficient sums:

    (pi/N)^n * sum_j f_j**2  ==  (pi/2)^n * sum_k c_k**2   (exactly).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .errors import GridMismatchError, RepresentationError

SPECTRAL = "spectral"
PHYSICAL = "physical"


class Grid:
    """Interior collocation grid and mode bookkeeping for one (n, N) pair."""

    def __init__(self, n: int, N: int):
        if n not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {n}")
        if not isinstance(N, (int, np.integer)) or N < 4:
            raise ValueError(f"modes per axis must be an integer >= 4, got {N}")
        self.n = int(n)
        self.N = int(N)
        k = np.arange(1, self.N, dtype=float)
        self.axis_modes = k
        self.nodes = k * np.pi / self.N
        self.shape = (self.N - 1,) * self.n
        self.mode_count = (self.N - 1) ** self.n
        if self.n == 1:
            self.lam = k ** 2
        else:
            self.lam = k[:, None] ** 2 + k[None, :] ** 2
        self.lam_min = float(self.n)
        # quadrature weight for nodal integrals and the Parseval constant
        self.quad_weight = (np.pi / self.N) ** self.n
        self.parseval = (np.pi / 2.0) ** self.n
        # 2/3-rule cutoff: zero the top third of the N-1 modes per axis
        self.dealias_cutoff = (2 * (self.N - 1)) // 3
        if self.n == 1:
            keep = k <= self.dealias_cutoff
        else:
            keep = (k[:, None] <= self.dealias_cutoff) & (k[None, :] <= self.dealias_cutoff)
        self.dealias_mask = keep.astype(float)
        self._sin = None
        self._cos = None

    @property
    def sine_matrix(self) -> np.ndarray:
        """S[j, k] = sin((j+1)(k+1) pi / N); symmetric, S @ S = (N/2) I."""
        if self._sin is None:
            jk = np.outer(self.axis_modes, self.axis_modes)
            self._sin = np.sin(jk * np.pi / self.N)
        return self._sin

    @property
    def cosine_matrix(self) -> np.ndarray:
        """C[j, k] = cos(k x_j), used to evaluate differentiated sine series."""
        if self._cos is None:
            jk = np.outer(self.axis_modes, self.axis_modes)
            self._cos = np.cos(jk * np.pi / self.N)
        return self._cos

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.n, self.N) == (other.n, other.N)

    def __hash__(self):
        return hash((self.n, self.N))

    def __repr__(self):
        return f"Grid(n={self.n}, N={self.N})"


@dataclass
class ScalarField:
    """One real scalar field, tagged with its representation."""

    grid: Grid
    data: np.ndarray
    rep: str = SPECTRAL

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.data.shape} does not match grid shape {self.grid.shape}")
        if self.rep not in (SPECTRAL, PHYSICAL):
            raise RepresentationError(f"unknown representation tag {self.rep!r}")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.data.copy(), self.rep)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())


def _require(field: ScalarField, rep: str, op: str):
    if field.rep != rep:
        raise RepresentationError(f"{op} expects a {rep} field, got {field.rep}")


def dst_forward(f: ScalarField) -> ScalarField:
    """Nodal values -> sine amplitudes (fast transform path)."""
    _require(f, PHYSICAL, "dst_forward")
    c = _fft.dstn(f.data, type=1) / float(f.grid.N) ** f.grid.n
    return ScalarField(f.grid, c, SPECTRAL)


def dst_inverse(c: ScalarField) -> ScalarField:
    """Sine amplitudes -> nodal values (fast transform path)."""
    _require(c, SPECTRAL, "dst_inverse")
    f = _fft.dstn(c.data, type=1) / 2.0 ** c.grid.n
    return ScalarField(c.grid, f, PHYSICAL)


def dst_forward_direct(f: ScalarField) -> ScalarField:
    """O(N^2)-per-axis reference transform via explicit sine matrices.

    Kept as the in-package oracle for the fast path; exercised by the
    test suite on every grid it touches.
    """
    _require(f, PHYSICAL, "dst_forward_direct")
    g = f.grid
    S = g.sine_matrix
    scale = 2.0 / g.N
    if g.n == 1:
        c = scale * (S @ f.data)
    else:
        c = scale * scale * (S @ f.data @ S)
    return ScalarField(g, c, SPECTRAL)


def dst_inverse_direct(c: ScalarField) -> ScalarField:
    _require(c, SPECTRAL, "dst_inverse_direct")
    g = c.grid
    S = g.sine_matrix
    if g.n == 1:
        f = S @ c.data
    else:
        f = S @ c.data @ S
    return ScalarField(g, f, PHYSICAL)


def laplacian_apply(f: ScalarField) -> ScalarField:
    """Apply the Dirichlet Laplacian: mode k is scaled by -lam_k."""
    _require(f, SPECTRAL, "laplacian_apply")
    return ScalarField(f.grid, -f.grid.lam * f.data, SPECTRAL)


def laplacian_solve(g: ScalarField) -> ScalarField:
    """Solve lap(w) = g; unique since every lam_k >= n >= 1."""
    _require(g, SPECTRAL, "laplacian_solve")
    return ScalarField(g.grid, g.data / (-g.grid.lam), SPECTRAL)


def axis_derivatives(c: ScalarField) -> list[np.ndarray]:
    """Nodal values of the partial derivatives of a spectral field.

    The sine series differentiates axis-wise into a cosine series with
    coefficients k*c_k, evaluated on the same interior nodes.
    """
    _require(c, SPECTRAL, "axis_derivatives")
    g = c.grid
    k = g.axis_modes
    C = g.cosine_matrix
    if g.n == 1:
        return [C @ (k * c.data)]
    S = g.sine_matrix
    dx = C @ (k[:, None] * c.data) @ S
    dy = S @ (c.data * k[None, :]) @ C
    return [dx, dy]


def gradient_squared(f: ScalarField) -> ScalarField:
    """Nodal values of |grad f|^2, computed from per-axis derivative series."""
    out = np.zeros(f.grid.shape)
    for d in axis_derivatives(f):
        out += d * d
    return ScalarField(f.grid, out, PHYSICAL)


def dealias(c: ScalarField) -> ScalarField:
    """Zero the top third of modes per axis (2/3 rule)."""
    _require(c, SPECTRAL, "dealias")
    return ScalarField(c.grid, c.data * c.grid.dealias_mask, SPECTRAL)


@dataclass
class SpectralState:
    """The evolved triple (Z, U, Theta) as stacked sine amplitudes.

    Z is the curvature variable (Laplacian of the deflection), U the
    deflection velocity and Theta the temperature; ``coeffs`` has shape
    (3,) + grid.shape and holds them in that order.
    """

    grid: Grid
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (3,) + self.grid.shape:
            raise ValueError(
                f"state shape {self.coeffs.shape} != {(3,) + self.grid.shape}")
        if self.t < 0:
            raise ValueError("time stamp must be >= 0")

    @classmethod
    def from_fields(cls, z: ScalarField, u: ScalarField, theta: ScalarField,
                    t: float = 0.0) -> "SpectralState":
        for f, name in ((z, "Z"), (u, "U"), (theta, "Theta")):
            _require(f, SPECTRAL, f"SpectralState component {name}")
            if f.grid != z.grid:
                raise GridMismatchError("state components must share one grid")
        return cls(z.grid, np.stack([z.data, u.data, theta.data]), t)

    @classmethod
    def zero(cls, grid: Grid, t: float = 0.0) -> "SpectralState":
        return cls(grid, np.zeros((3,) + grid.shape), t)

    @property
    def z(self) -> ScalarField:
        return ScalarField(self.grid, self.coeffs[0], SPECTRAL)

    @property
    def u(self) -> ScalarField:
        return ScalarField(self.grid, self.coeffs[1], SPECTRAL)

    @property
    def theta(self) -> ScalarField:
        return ScalarField(self.grid, self.coeffs[2], SPECTRAL)

    def copy(self) -> "SpectralState":
        return SpectralState(self.grid, self.coeffs.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.coeffs).all())


# Batched variants used by the path-based solvers; leading axes are
# arbitrary, the trailing grid axes are transformed.

def batch_to_nodal(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.n == 1:
        return _fft.dst(coeffs, type=1, axis=-1) / 2.0
    return _fft.dstn(coeffs, type=1, axes=(-2, -1)) / 4.0


def batch_to_spectral(values: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.n == 1:
        return _fft.dst(values, type=1, axis=-1) / float(grid.N)
    return _fft.dstn(values, type=1, axes=(-2, -1)) / float(grid.N) ** 2


def batch_axis_derivatives(coeffs: np.ndarray, grid: Grid) -> list[np.ndarray]:
    k = grid.axis_modes
    C = grid.cosine_matrix
    if grid.n == 1:
        return [np.einsum("jk,...k->...j", C, k * coeffs)]
    S = grid.sine_matrix
    dx = np.einsum("ja,...ab,kb->...jk", C, k[:, None] * coeffs, S)
    dy = np.einsum("ja,...ab,kb->...jk", S, coeffs * k[None, :], C)
    return [dx, dy]
