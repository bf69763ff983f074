"""Hermitian linear algebra helpers and seeded random sampling.

Everything downstream funnels its matrix analysis through this module so
that clamping rules and tolerances live in exactly one place.
"""
from __future__ import annotations

import numpy as np

# Relative tolerance floor used when a matrix is (numerically) zero.
TOL_FLOOR = 1e-12
# Eigenvalues above -NEG_EIG_REL * ||A|| are treated as roundoff and clamped.
NEG_EIG_REL = 1e-9


class NumericalIntegrityError(RuntimeError):
    """A quantity that is non-negative in exact arithmetic came out wrong."""


def _norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def herm_eigendecompose(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a Hermitian matrix.

    Parameters
    ----------
    h : ndarray
        Square matrix, Hermitian up to 1e-10 * ||h|| (it is symmetrized
        before the decomposition).

    Returns
    -------
    w : ndarray
        Real eigenvalues in descending order.
    v : ndarray
        Unitary matrix whose k-th column is the eigenvector for w[k].
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(_norm(h), 1.0)
    if _norm(h - h.conj().T) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return w[::-1], v[:, ::-1]


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in [-1e-9 * ||a||, 0) are clamped to zero; anything more
    negative raises NumericalIntegrityError.
    """
    w, v = herm_eigendecompose(a)
    scale = max(float(w[0]), TOL_FLOOR) if w.size else TOL_FLOOR
    if w.size and w[-1] < -NEG_EIG_REL * max(scale, _norm(a)):
        raise NumericalIntegrityError(
            f"matrix is not PSD: min eigenvalue {w[-1]:.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def pseudo_inv_sqrt(a: np.ndarray, cutoff: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse square root of a PSD matrix.

    Eigenvalues at or below the cutoff (default 1e-12 * max eigenvalue)
    are treated as exact zeros and inverted to zero.
    """
    w, v = herm_eigendecompose(a)
    scale = max(float(w[0]), 0.0) if w.size else 0.0
    if w.size and w[-1] < -NEG_EIG_REL * max(scale, TOL_FLOOR):
        raise NumericalIntegrityError(
            f"matrix is not PSD: min eigenvalue {w[-1]:.3e}")
    if cutoff is None:
        cutoff = TOL_FLOOR * scale
    inv = np.where(w > cutoff, 1.0 / np.sqrt(np.clip(w, TOL_FLOOR**2, None)), 0.0)
    return (v * inv) @ v.conj().T


def loewner_between(x: np.ndarray, lo: float, hi: float, tol: float = 1e-10) -> bool:
    """Whether lo*I <= x <= hi*I in the ordering of Hermitian matrices."""
    w = np.linalg.eigvalsh((np.asarray(x, dtype=complex) + np.asarray(x).conj().T) / 2)
    return bool(w[0] >= lo - tol and w[-1] <= hi + tol)


# ---------------------------------------------------------------------------
# Seeded sampling.
# ---------------------------------------------------------------------------

_MIX_1 = 0x9E3779B97F4A7C15
_MIX_2 = 0xBF58476D1CE4E5B9
_MIX_3 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def child_seed(master_seed: int, index: int) -> int:
    """Derive the 64-bit seed of stream `index` from a master seed.

    splitmix64-style finalizer over (master_seed + index * odd constant);
    fixed here so result files can be replayed bit for bit.
    """
    z = (int(master_seed) + (int(index) + 1) * _MIX_1) & _MASK
    z = ((z ^ (z >> 30)) * _MIX_2) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_3) & _MASK
    return (z ^ (z >> 31)) & _MASK


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))


def sample_haar_batch(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of `count` independent Haar-distributed d x d unitaries.

    Ginibre matrix -> QR -> multiply each column by the phase of the
    matching diagonal entry of R, which removes the sign ambiguity of the
    factorization and makes the distribution exactly Haar.
    """
    if d < 1 or count < 0:
        raise ValueError("need d >= 1 and count >= 0")
    z = (rng.standard_normal((count, d, d)) + 1j * rng.standard_normal((count, d, d)))
    z /= np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phase = diag / np.abs(diag)
    return q * phase[:, None, :]


def sample_haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """One Haar-distributed d x d unitary."""
    return sample_haar_batch(d, 1, rng)[0]


def sample_density(d: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """Random rank <= r density matrix from the induced Ginibre ensemble.

    G is d x r complex Gaussian and the state is G G^dag / Tr(G G^dag),
    i.e. the Hilbert-Schmidt ensemble when r = d.
    """
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


RANK_CLIP = 1e-14


def state_eigenvalues(rho: np.ndarray) -> np.ndarray:
    """Validated spectrum of a density matrix, descending.

    Checks Hermiticity, unit trace (1e-9), and positivity (eigenvalues
    >= -1e-9); eigenvalues below RANK_CLIP are returned as exact zeros so
    rank-sensitive quantities vanish sharply rather than to roundoff.
    """
    w, _ = herm_eigendecompose(rho)
    if abs(float(np.sum(w)) - 1.0) > 1e-9:
        raise ValueError(f"state trace {float(np.sum(w))!r} is not 1")
    if float(w[-1]) < -1e-9:
        raise ValueError(f"state has negative eigenvalue {float(w[-1])!r}")
    w = np.where(w < RANK_CLIP, 0.0, w)
    return w
