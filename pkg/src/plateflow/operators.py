"""The 3x3 coupling matrix, per-mode generator blocks, and matrix phi functions.

The first-order system couples the three fields through a constant real
matrix M applied under the Laplacian, so in the sine basis the generator
decomposes into independent 3x3 blocks B_k = -lam_k * M.  Everything in
this module operates on those small blocks; no global matrix is ever
assembled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonHurwitz
from .spectral import Grid, SpectralState

DEFAULT_COUPLING = np.array([[0.0, 1.0, 0.0],
                             [-1.0, 0.0, 1.0],
                             [0.0, -1.0, 1.0]])

#: residual tolerance for accepting an eigenpair of a 3x3 matrix
_EIG_RESIDUAL_TOL = 1e-10


def char_poly_coeffs(m: np.ndarray) -> tuple[float, float, float]:
    """Coefficients (c2, c1, c0) of det(M - zI) = -(z^3 - c2 z^2 + c1 z - c0)."""
    m = np.asarray(m, dtype=float)
    c2 = m[0, 0] + m[1, 1] + m[2, 2]
    c1 = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
          + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
          + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    c0 = (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
          - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
          + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    return float(c2), float(c1), float(c0)


def _cubic_roots(a2: float, a1: float, a0: float) -> np.ndarray:
    """Roots of z^3 + a2 z^2 + a1 z + a0 (real coefficients), closed form."""
    shift = a2 / 3.0
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2 ** 3 / 27.0 - a2 * a1 / 3.0 + a0
    if abs(p) < 1e-14 and abs(q) < 1e-14:
        r = -shift
        return np.array([r, r, r], dtype=complex)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        # one real root; take the larger-magnitude cube root first to
        # avoid cancellation, recover the partner from p
        sq = np.sqrt(disc)
        u = np.cbrt(-q / 2.0 - np.copysign(sq, q))
        v = 0.0 if u == 0.0 else -p / (3.0 * u)
        y1 = u + v
        # deflate: remaining quadratic y^2 + y1*y + (y1^2 + p)
        b = y1
        c = y1 * y1 + p
        rad = np.sqrt(complex(b * b - 4.0 * c))
        roots = np.array([y1, (-b + rad) / 2.0, (-b - rad) / 2.0], dtype=complex)
    else:
        # three real roots via the trigonometric form
        r = np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (2.0 * p * r), -1.0, 1.0)
        phi = np.arccos(arg)
        ks = np.array([0.0, 1.0, 2.0])
        roots = (2.0 * r * np.cos(phi / 3.0 - 2.0 * np.pi * ks / 3.0)).astype(complex)
    return roots - shift


def _polish_root(z: complex, a2: float, a1: float, a0: float) -> complex:
    for _ in range(8):
        p = ((z + a2) * z + a1) * z + a0
        dp = (3.0 * z + 2.0 * a2) * z + a1
        if abs(dp) < 1e-300:
            break
        step = p / dp
        z = z - step
        if abs(step) < 1e-16 * max(1.0, abs(z)):
            break
    return z


def _null_vector(a: np.ndarray) -> np.ndarray:
    """Approximate null vector of a (near-singular) 3x3 complex matrix."""
    rows = [a[i] for i in range(3)]
    best, best_norm = None, -1.0
    for i in range(3):
        for j in range(i + 1, 3):
            v = np.cross(rows[i], rows[j])
            nv = np.linalg.norm(v)
            if nv > best_norm:
                best, best_norm = v, nv
    row_scale = max(np.linalg.norm(r) for r in rows)
    if best_norm > 1e-12 * max(row_scale, 1.0) ** 2:
        return best / best_norm
    # rank <= 1: any vector orthogonal to the dominant row works
    r = rows[int(np.argmax([np.linalg.norm(x) for x in rows]))]
    if np.linalg.norm(r) < 1e-300:
        return np.array([1.0, 0.0, 0.0], dtype=complex)
    trial = np.eye(3)[int(np.argmin(np.abs(r)))].astype(complex)
    v = trial - r * (np.vdot(r, trial) / np.vdot(r, r))
    return v / np.linalg.norm(v)


class CouplingMatrix:
    """Validated 3x3 coupling matrix with Hurwitz-type spectrum.

    Construction rejects singular matrices and matrices whose spectrum
    touches the closed left half plane, since those cannot generate a
    stable evolution.
    """

    def __init__(self, matrix=None):
        m = DEFAULT_COUPLING if matrix is None else np.array(matrix, dtype=float)
        if m.shape != (3, 3) or not np.isfinite(m).all():
            raise ValueError("coupling matrix must be a finite 3x3 real matrix")
        _, _, det = char_poly_coeffs(m)
        if abs(det) < 1e-300:
            raise ValueError("coupling matrix must be nonsingular")
        self._m = m
        self._m.setflags(write=False)
        self.eigenvalues = eig_M(m)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __repr__(self):
        return f"CouplingMatrix({self._m.tolist()})"


def eig_M(m) -> np.ndarray:
    """Eigenvalues of a 3x3 coupling matrix, sorted by (Re, Im) ascending.

    Solves the characteristic cubic in closed form, polishes each root
    by Newton iteration, and verifies the eigenpair residual against a
    null-vector reconstruction.  Raises NonHurwitz when any eigenvalue
    has real part <= 0.
    """
    if isinstance(m, CouplingMatrix):
        return m.eigenvalues.copy()
    m = np.asarray(m, dtype=float)
    c2, c1, c0 = char_poly_coeffs(m)
    # det(M - zI) = 0  <=>  z^3 - c2 z^2 + c1 z - c0 = 0
    roots = _cubic_roots(-c2, c1, -c0)
    roots = np.array([_polish_root(z, -c2, c1, -c0) for z in roots])
    scale = max(1.0, float(np.abs(m).max()))
    for z in roots:
        v = _null_vector(m.astype(complex) - z * np.eye(3))
        res = np.linalg.norm(m @ v - z * v)
        if res > _EIG_RESIDUAL_TOL * scale:
            raise ArithmeticError(
                f"eigenpair residual {res:.2e} exceeds tolerance for root {z}")
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]
    if np.min(roots.real) <= 0.0:
        raise NonHurwitz(roots)
    return roots


@dataclass
class SpectrumReport:
    """Spectrum of the coupling matrix and the induced decay window."""

    eigenvalues: np.ndarray
    lam_min: float
    s_A: float
    omega_max: float

    def as_text(self) -> str:
        lines = ["coupling-matrix spectrum",
                 f"  {'re':>14s} {'im':>14s}"]
        for z in self.eigenvalues:
            lines.append(f"  {z.real:14.8f} {z.imag:14.8f}")
        lines.append(f"lam_min     = {self.lam_min:.8f}")
        lines.append(f"s(A)        = {self.s_A:.8f}")
        lines.append(f"omega window = [0, {self.omega_max:.8f})")
        return "\n".join(lines)

    def csv_rows(self) -> list[str]:
        rows = ["re,im,s_A,omega_max"]
        for z in self.eigenvalues:
            rows.append(f"{z.real:.17g},{z.imag:.17g},{self.s_A:.17g},{self.omega_max:.17g}")
        return rows


def spectral_bound(M, grid: Grid) -> SpectrumReport:
    """s(A) = -lam_min * min Re(sigma(M)) and the admissible decay window."""
    ev = eig_M(M)
    s_a = -grid.lam_min * float(np.min(ev.real))
    return SpectrumReport(eigenvalues=ev, lam_min=grid.lam_min,
                          s_A=s_a, omega_max=-s_a)


#: switch to plain Taylor evaluation below this norm of the scaled argument
_PHI_TAYLOR_THRESHOLD = 0.1
_PHI_TAYLOR_TERMS = 25


def _phi_taylor(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    eye = np.eye(3)
    e = eye.copy()
    p1 = eye.copy()
    p2 = eye / 2.0
    term = eye.copy()
    for j in range(1, _PHI_TAYLOR_TERMS):
        term = term @ x / j
        e = e + term
        p1 = p1 + term / (j + 1.0)
        p2 = p2 + term / ((j + 1.0) * (j + 2.0))
    return e, p1, p2


def phi_functions(B: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(exp(hB), phi1(hB), phi2(hB)) for a real 3x3 block.

    phi1(X) = X^-1 (e^X - I), phi2(X) = X^-2 (e^X - I - X); both are
    entire, so small arguments are evaluated by a truncated Taylor series
    to avoid cancellation, larger ones by scaling and squaring with the
    doubling recurrences

        e^(2Y)   = e^Y e^Y
        phi1(2Y) = (e^Y + I) phi1(Y) / 2
        phi2(2Y) = (phi1(Y)^2 + 2 phi2(Y)) / 4.
    """
    if h <= 0:
        raise ValueError("step size must be > 0")
    x = float(h) * np.asarray(B, dtype=float)
    if x.shape != (3, 3):
        raise ValueError("block must be 3x3")
    norm = float(np.abs(x).sum(axis=1).max())
    if norm <= _PHI_TAYLOR_THRESHOLD:
        return _phi_taylor(x)
    s = int(np.ceil(np.log2(norm / _PHI_TAYLOR_THRESHOLD)))
    e, p1, p2 = _phi_taylor(x / 2.0 ** s)
    eye = np.eye(3)
    for _ in range(s):
        p2 = (p1 @ p1 + 2.0 * p2) / 4.0
        p1 = (e + eye) @ p1 / 2.0
        e = e @ e
    return e, p1, p2


def apply_blocks(blocks: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Apply a stack of per-mode 3x3 blocks to stacked coefficients (3, ...)."""
    flat = coeffs.reshape(3, -1).T[:, :, None]          # (L, 3, 1)
    out = (blocks @ flat)[:, :, 0].T
    return out.reshape(coeffs.shape)


class ModeBlocks:
    """Cached exp/phi evaluations of every per-mode block for one step size.

    Blocks are grouped by distinct Laplacian eigenvalue, so the cost is
    O(#distinct lam) small-matrix evaluations.  Instances are immutable
    after construction; changing h means building a new cache.
    """

    def __init__(self, grid: Grid, M=None, h: float = 1.0, want_phi: bool = True):
        if isinstance(M, CouplingMatrix):
            m = M.matrix
        elif M is None:
            m = CouplingMatrix().matrix
        else:
            m = CouplingMatrix(M).matrix
        self.grid = grid
        self.M = m
        self.h = float(h)
        lam_flat = grid.lam.reshape(-1)
        uniq, inverse = np.unique(lam_flat, return_inverse=True)
        e_u = np.empty((uniq.size, 3, 3))
        p1_u = np.empty_like(e_u)
        p2_u = np.empty_like(e_u)
        for i, lam in enumerate(uniq):
            e_u[i], p1_u[i], p2_u[i] = phi_functions(-lam * m, self.h)
        self.exp = e_u[inverse]
        self.phi1 = p1_u[inverse] if want_phi else None
        self.phi2 = p2_u[inverse] if want_phi else None

    def apply_exp(self, coeffs: np.ndarray) -> np.ndarray:
        """exp(h B_k) applied mode-wise to stacked coefficients (3, ...)."""
        return apply_blocks(self.exp, coeffs)


def semigroup_apply(state: SpectralState, t: float, M=None) -> SpectralState:
    """Exact flow of the linear system over a duration t >= 0."""
    if t < 0:
        raise ValueError("duration must be >= 0")
    if t == 0.0:
        return state.copy()
    blocks = ModeBlocks(state.grid, M=M, h=t, want_phi=False)
    return SpectralState(state.grid, blocks.apply_exp(state.coeffs), state.t + t)
