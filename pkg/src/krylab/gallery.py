"""Operators used throughout the lab: shifts, compact normal diagonals,
1-D Friedrichs systems on a periodic grid and the ``-d/dx + c`` prototype.

Differential operators are discretized Fourier-spectrally so that the
derivative matrix is exactly antisymmetric; the Friedrichs pair identities
then hold to rounding rather than to truncation order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import toeplitz

from .errors import InvalidInput, NotFriedrichs
from .hilbert import DenseOperator, as_vector

Fill = Literal["zero_fill", "cyclic"]


@dataclass(frozen=True)
class ShiftSpec:
    """Right shift on the window of indices -N..N (ambient dimension 2N+1)."""

    N: int
    fill: Fill = "zero_fill"

    @property
    def dim(self) -> int:
        return 2 * self.N + 1

    def position(self, n: int) -> int:
        """Array position of the canonical vector e_n."""
        if not -self.N <= n <= self.N:
            raise InvalidInput(f"index {n} outside window [-{self.N}, {self.N}]")
        return n + self.N

    def indices(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)


def build_shift(spec: ShiftSpec) -> DenseOperator:
    if spec.N < 1:
        raise InvalidInput("window radius must be at least 1")
    if spec.fill not in ("zero_fill", "cyclic"):
        raise InvalidInput(f"unknown fill {spec.fill!r}")
    dim = spec.dim
    r = np.zeros((dim, dim), dtype=complex)
    for j in range(dim - 1):
        r[j + 1, j] = 1.0
    if spec.fill == "cyclic":
        r[0, dim - 1] = 1.0
    return DenseOperator(r, name=f"shift[{spec.fill},N={spec.N}]")


def build_compact_normal(eigenvalues: Sequence[complex]) -> DenseOperator:
    ev = np.asarray(eigenvalues, dtype=complex).reshape(-1)
    if ev.size == 0:
        raise InvalidInput("need at least one eigenvalue")
    op = DenseOperator(np.diag(ev), name="compact_normal")
    assert op.has("normal")
    return op


def jordan_block(size: int) -> DenseOperator:
    """Nilpotent block sending e_k to e_{k+1}."""
    if size < 1:
        raise InvalidInput("size must be positive")
    return DenseOperator(np.eye(size, k=-1, dtype=complex), name=f"jordan[{size}]")


def grid_points(M: int, L: float) -> np.ndarray:
    return L * np.arange(M) / M


def wavenumbers(M: int, L: float) -> np.ndarray:
    """Discrete wavenumbers in FFT order; the Nyquist mode (even M) gets 0."""
    k = np.fft.fftfreq(M, d=1.0 / M)
    if M % 2 == 0:
        k[M // 2] = 0.0
    return 2 * np.pi * k / L


def spectral_derivative(M: int, L: float = 2 * np.pi) -> np.ndarray:
    """Fourier differentiation matrix on M periodic points over length L.

    Built from the closed-form cotangent/cosecant column so that the
    result is exactly antisymmetric (the row is the negated column).
    """
    if M < 2:
        raise InvalidInput("need at least two grid points")
    if L <= 0:
        raise InvalidInput("domain length must be positive")
    h = 2 * np.pi / M
    j = np.arange(1, M)
    col = np.zeros(M)
    if M % 2 == 0:
        col[1:] = 0.5 * (-1.0) ** j / np.tan(j * h / 2)
    else:
        col[1:] = 0.5 * (-1.0) ** j / np.sin(j * h / 2)
    col *= 2 * np.pi / L
    # D[i, k] = col[i - k]: column is col, first row is -col reversed in index
    row = np.zeros(M)
    row[1:] = -col[1:]
    d = toeplitz(col, row)
    return d


def fourier_mode(M: int, L: float, k: int) -> np.ndarray:
    """Unit-norm grid samples of exp(2*pi*i*k*x/L)."""
    x = grid_points(M, L)
    return np.exp(2j * np.pi * k * x / L) / np.sqrt(M)


def discrete_wavenumber(M: int, L: float, k: int) -> float:
    """Eigenvalue scale of the spectral derivative on mode k (0 for Nyquist)."""
    if M % 2 == 0 and abs(k) == M // 2:
        return 0.0
    return 2 * np.pi * k / L


@dataclass(frozen=True)
class Friedrichs1DSpec:
    """Coefficients of A f = d/dx(B f) + C f for a system of size r.

    ``B`` and ``C`` are either one r x r matrix (constant coefficient) or an
    (M, r, r) array of per-grid-point samples.
    """

    r: int
    M: int
    L: float
    B: np.ndarray
    C: np.ndarray
    mu: float

    def sampled(self, name: str) -> np.ndarray:
        raw = np.asarray(getattr(self, name), dtype=complex)
        if raw.ndim == 0 and self.r == 1:
            raw = raw.reshape(1, 1)
        if raw.shape == (self.r, self.r):
            return np.broadcast_to(raw, (self.M, self.r, self.r)).copy()
        if raw.shape == (self.M, self.r, self.r):
            return raw.copy()
        if self.r == 1 and raw.shape == (self.M,):
            return raw.reshape(self.M, 1, 1)
        raise InvalidInput(f"coefficient {name} has shape {raw.shape}, expected "
                           f"({self.r},{self.r}) or ({self.M},{self.r},{self.r})")


def _block_diag(samples: np.ndarray) -> np.ndarray:
    M, r, _ = samples.shape
    out = np.zeros((M * r, M * r), dtype=complex)
    for i in range(M):
        out[i * r:(i + 1) * r, i * r:(i + 1) * r] = samples[i]
    return out


def build_friedrichs_1d(spec: Friedrichs1DSpec) -> tuple[DenseOperator, DenseOperator]:
    """Discretize d/dx(B f) + C f and its formal adjoint on a periodic grid.

    Unknowns are ordered grid-point-major: entry ``i*r + c`` is component
    ``c`` at grid point ``i``. The derivative term uses the split form
    1/2 (D B + B D) + 1/2 (dB/dx), so A0 + A0* equals the block diagonal of
    C + C* + dB/dx exactly.
    """
    if spec.r < 1 or spec.M < 2:
        raise InvalidInput("need r >= 1 and M >= 2")
    B = spec.sampled("B")
    C = spec.sampled("C")
    for i in range(spec.M):
        if np.linalg.norm(B[i] - B[i].conj().T, 2) > 1e-12:
            raise InvalidInput(f"B is not Hermitian at grid point {i}")
        B[i] = (B[i] + B[i].conj().T) / 2
    D = spectral_derivative(spec.M, spec.L)
    # dB/dx sampled per entry
    dB = np.einsum("ij,jab->iab", D, B)
    dB = (dB + np.conj(np.transpose(dB, (0, 2, 1)))) / 2
    coercive = C + np.conj(np.transpose(C, (0, 2, 1))) + dB
    for i in range(spec.M):
        low = np.linalg.eigvalsh(coercive[i])[0]
        if low < spec.mu - 1e-10:
            raise NotFriedrichs(
                f"C + C* + dB/dx has eigenvalue {low:.6g} < mu={spec.mu} at grid point {i}",
                grid_point=i,
            )
    Dr = np.kron(D, np.eye(spec.r))
    Bb = _block_diag(B)
    a0 = 0.5 * (Dr @ Bb + Bb @ Dr) + 0.5 * _block_diag(dB) + _block_diag(C)
    a0_tilde = a0.conj().T
    return (DenseOperator(a0, name="friedrichs_1d"),
            DenseOperator(a0_tilde, name="friedrichs_1d_adjoint"))


@dataclass(frozen=True)
class PrototypeSpec:
    """Samples of c on M periodic points over length L, for A = -d/dx + c."""

    c: np.ndarray
    L: float = 2 * np.pi

    @property
    def modes(self) -> int:
        return int(np.asarray(self.c).size)

    @classmethod
    def constant(cls, modes: int, value: complex = 1.0, L: float = 2 * np.pi) -> "PrototypeSpec":
        return cls(np.full(modes, value, dtype=complex), L)

    @classmethod
    def sinusoidal(cls, modes: int, offset: float, amplitude: float,
                   frequency: int = 1, L: float = 2 * np.pi) -> "PrototypeSpec":
        x = grid_points(modes, L)
        return cls(offset + amplitude * np.sin(2 * np.pi * frequency * x / L) + 0j, L)


def build_prototype(spec: PrototypeSpec) -> DenseOperator:
    c = np.asarray(spec.c, dtype=complex).reshape(-1)
    if c.size < 2:
        raise InvalidInput("prototype needs at least two grid points")
    if not np.all(np.isfinite(c)):
        raise InvalidInput("c has non-finite samples")
    if c.real.min() <= 0:
        raise NotFriedrichs(
            f"Re c is not separated from zero (min {c.real.min():.6g})",
            grid_point=int(np.argmin(c.real)),
        )
    D = spectral_derivative(c.size, spec.L)
    return DenseOperator(-D + np.diag(c), name="prototype")


@dataclass(frozen=True)
class FriedrichsCheck:
    is_pair: bool
    sum_self_adjoint_defect: float
    bottom: float
    bound: float


def check_friedrichs_pair(t: DenseOperator, t_tilde: DenseOperator,
                          tol: float = 1e-10) -> FriedrichsCheck:
    """Check that T + T~ is self-adjoint (to ``tol``) with positive bottom."""
    if t.dim != t_tilde.dim:
        raise InvalidInput("operators act on different spaces")
    s = t.matrix + t_tilde.matrix
    defect = float(np.linalg.norm(s - s.conj().T, 2))
    herm = (s + s.conj().T) / 2
    bottom = float(np.linalg.eigvalsh(herm)[0])
    bound = float(np.linalg.norm(s, 2))
    return FriedrichsCheck(defect <= tol and bottom > 0, defect, bottom, bound)


def shift_noncyclic_datum(spec: ShiftSpec, n: int) -> np.ndarray:
    """Canonical vector e_n of the window."""
    e = np.zeros(spec.dim, dtype=complex)
    e[spec.position(n)] = 1.0
    return as_vector(e)


def szego_symbol(theta: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """exp(-scale / (2|sin(theta/2)|)): equals exp(-scale/|theta|) to leading
    order at 0, smooth and 2*pi-periodic, log not integrable."""
    s = np.abs(np.sin(np.asarray(theta) / 2))
    with np.errstate(divide="ignore"):
        out = np.exp(-scale / (2 * s))
    return np.where(s == 0, 0.0, out)


def szego_samples(M: int, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """M equispaced angles in [-pi, pi) avoiding theta=0, and symbol samples.

    Odd M uses the grid -pi + 2 pi j / M, even M its midpoint shift; both
    are symmetric mod 2 pi, so the datum is real.
    """
    offset = 0.5 if M % 2 == 0 else 0.0
    theta = -np.pi + 2 * np.pi * (np.arange(M) + offset) / M
    return theta, szego_symbol(theta, scale)


def shift_szego_datum(spec: ShiftSpec, scale: float = 1.0) -> np.ndarray:
    """Inverse unitary DFT of the Szego-type symbol on the window indices.

    A numerical stand-in for a cyclic vector of the bilateral shift: every
    symbol sample is nonzero and the norm equals the samples' l2 norm.
    """
    theta, sym = szego_samples(spec.dim, scale)
    n = spec.indices()
    F = np.exp(1j * np.outer(n, theta)) / np.sqrt(spec.dim)
    return as_vector(F @ sym)


def outer_region_mass(x, spec: ShiftSpec, fraction: float = 0.1) -> float:
    """Fraction of |x|^2 carried by the outer ``fraction`` of the window."""
    x = np.asarray(x, dtype=complex)
    total = float(np.vdot(x, x).real)
    if total == 0:
        return 0.0
    width = max(1, int(np.ceil(fraction * spec.N)))
    idx = np.abs(spec.indices()) > spec.N - width
    return float(np.vdot(x[idx], x[idx]).real) / total
