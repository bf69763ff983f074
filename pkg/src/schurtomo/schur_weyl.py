"""Numerical Schur-Weyl engine.

Schur polynomials, symmetric-group characters, isotypic projectors on
tensor space, unitary-group irrep matrices q_lam(X) in a fixed
orthonormal basis, and the block isometries of the multiplicity-free
decomposition Q_lam (x) C^d = (+)_mu Q_mu.

The fixed basis of Q_lam is the image of the Young symmetrizer of the
column-reading standard tableau (row-symmetrize, then
column-antisymmetrize), orthonormalized by QR in semistandard-tableau
column order. Everything else in the package that touches irrep
matrices is expressed in this basis, which is what `basis_id` names.
"""
from __future__ import annotations

import itertools
import threading
from collections import Counter
from dataclasses import dataclass
from functools import cache
from math import factorial

import numpy as np

from .linalg import NumericalIntegrityError, child_seed, make_rng, sample_haar_batch
from .partitions import Partition, add_box, as_partition, dim_gl, dim_sym, remove_box

TENSOR_SCALE = 10_000   # largest d**n any tensor-space construction touches
PERM_SCALE = 9          # largest n whose full n! permutation sweep we run
CG_SOLVE_MAX = 50       # largest dim_gl(lam,d)*d commutant solve (SVD cost gate)

_CG_SEED_BASE = 0x5Cecded_0A11
_lock = threading.Lock()
_basis_cache: dict[tuple[tuple[int, ...], int], np.ndarray] = {}
_cg_cache: dict[tuple[tuple[int, ...], int], "CgDecomposition"] = {}
_class_sum_cache: dict[tuple[int, int], dict[tuple[int, ...], np.ndarray]] = {}


# ---------------------------------------------------------------------------
# Schur polynomials and characters.
# ---------------------------------------------------------------------------

def _interlacing(shape: tuple[int, ...], k: int):
    """Sub-shapes nu with at most k rows interlacing `shape`."""
    bounds = []
    for i in range(min(len(shape), k)):
        lo = shape[i + 1] if i + 1 < len(shape) else 0
        bounds.append(range(shape[i], lo - 1, -1))
    for nu in itertools.product(*bounds):
        trimmed = nu
        while trimmed and trimmed[-1] == 0:
            trimmed = trimmed[:-1]
        yield trimmed


def schur_polynomial(lam, xs):
    """Schur polynomial s_lam(xs), the SSYT monomial sum.

    Parameters
    ----------
    lam : partition-like
    xs : array-like, shape (..., d)
        Variable values; leading axes are treated as a batch. Complex
        values are allowed (needed for spectra of unitaries).

    Returns
    -------
    float, complex, or ndarray matching the batch shape.

    Evaluated by the branching rule s_lam(x_1..x_k) =
    sum_{nu interlacing lam} s_nu(x_1..x_{k-1}) x_k^{|lam|-|nu|}, which
    sums the same monomials as the tableau definition. Exact zero when
    more rows than nonzero variables survive (the xs must be sorted so
    zeros come last for that sharpness; callers pass spectra sorted
    descending).
    """
    lam = as_partition(lam)
    xs = np.asarray(xs)
    dtype = complex if np.iscomplexobj(xs) else float
    xs = xs.astype(dtype)
    d = xs.shape[-1]
    batch = xs.shape[:-1]
    if lam.rows > d:
        out = np.zeros(batch, dtype)
        return out if batch else out[()]
    memo: dict[tuple[tuple[int, ...], int], np.ndarray] = {}

    def level(shape: tuple[int, ...], k: int) -> np.ndarray:
        if not shape:
            return np.ones(batch, dtype)
        if len(shape) > k:
            return np.zeros(batch, dtype)
        if k == 1:
            return xs[..., 0] ** shape[0]
        key = (shape, k)
        if key not in memo:
            total = np.zeros(batch, dtype)
            m = sum(shape)
            for nu in _interlacing(shape, k - 1):
                total = total + level(nu, k - 1) * xs[..., k - 1] ** (m - sum(nu))
            memo[key] = total
        return memo[key]

    val = level(lam.parts, d)
    return val if batch else val[()]


def schur_of_product(lam, a: np.ndarray, b: np.ndarray):
    """s_lam at the spectrum of the PSD product a @ b (batched over leading axes).

    The product of two PSD matrices has real non-negative eigenvalues;
    roundoff dust is clamped, anything beyond dust raises.
    """
    m = np.asarray(a) @ np.asarray(b)
    ev = np.linalg.eigvals(m)
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    if float(np.max(np.abs(ev.imag))) > 1e-8 * scale:
        raise NumericalIntegrityError("PSD-product spectrum is not numerically real")
    xs = np.clip(ev.real, 0.0, None)
    xs = -np.sort(-xs, axis=-1)
    return schur_polynomial(lam, xs)


@cache
def _mn_char(shape: tuple[int, ...], cycles: tuple[int, ...]) -> int:
    """Murnaghan-Nakayama recursion over border strips, via beta-numbers."""
    if not cycles:
        return 1 if not shape else 0
    k = cycles[0]
    length = len(shape)
    beta = [shape[i] + (length - 1 - i) for i in range(length)]
    beta_set = set(beta)
    total = 0
    for i, b in enumerate(beta):
        nb = b - k
        if nb < 0 or nb in beta_set:
            continue
        height = sum(1 for c in beta if nb < c < b)
        new_beta = sorted((c for j, c in enumerate(beta) if j != i), reverse=True)
        new_beta.append(nb)
        new_beta.sort(reverse=True)
        new_shape = tuple(nb2 - (length - 1 - idx) for idx, nb2 in enumerate(new_beta))
        while new_shape and new_shape[-1] == 0:
            new_shape = new_shape[:-1]
        total += (-1) ** height * _mn_char(new_shape, cycles[1:])
    return total


def sn_character(lam, cycle_type) -> int:
    """Symmetric-group character chi_lam at the given cycle type."""
    lam, ct = as_partition(lam), as_partition(cycle_type)
    if lam.n != ct.n:
        raise ValueError(f"cycle type {ct} is not a partition of {lam.n}")
    return _mn_char(lam.parts, tuple(sorted(ct.parts, reverse=True)))


# ---------------------------------------------------------------------------
# Tensor-space machinery (oracle scale).
# ---------------------------------------------------------------------------

def _cycle_type(perm: tuple[int, ...]) -> tuple[int, ...]:
    seen = [False] * len(perm)
    lens = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        lens.append(length)
    return tuple(sorted(lens, reverse=True))


def _check_tensor_scale(n: int, d: int) -> None:
    if d ** n > TENSOR_SCALE:
        raise ValueError(f"tensor space d^n = {d}^{n} exceeds the oracle scale {TENSOR_SCALE}")


def _digit_table(n: int, d: int) -> np.ndarray:
    idx = np.arange(d ** n)
    digits = np.empty((d ** n, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        digits[:, k] = idx % d
        idx = idx // d
    return digits


def _perm_class_sums(n: int, d: int) -> dict[tuple[int, ...], np.ndarray]:
    """For each cycle type, the sum of tensor-factor permutation matrices."""
    key = (n, d)
    with _lock:
        if key in _class_sum_cache:
            return _class_sum_cache[key]
    _check_tensor_scale(n, d)
    if n > PERM_SCALE:
        raise ValueError(f"permutation sweep over {n}! elements exceeds the oracle scale")
    dim = d ** n
    digits = _digit_table(n, d)
    ar = np.arange(dim)
    sums: dict[tuple[int, ...], np.ndarray] = {}
    for perm in itertools.permutations(range(n)):
        ct = _cycle_type(perm)
        place = np.array([d ** (n - 1 - perm[k]) for k in range(n)], dtype=np.int64)
        tgt = digits @ place
        mat = sums.get(ct)
        if mat is None:
            mat = sums.setdefault(ct, np.zeros((dim, dim)))
        mat[tgt, ar] += 1.0
    with _lock:
        _class_sum_cache.setdefault(key, sums)
    return _class_sum_cache[key]


def isotypic_projector(lam, n: int, d: int) -> np.ndarray:
    """Projector onto the lam-isotypic block of (C^d)^(x n).

    Character projection (dim_sym(lam)/n!) sum_pi chi_lam(type(pi)) P(pi);
    brute force on the full tensor space, so gated to oracle scale.
    """
    lam = as_partition(lam)
    if lam.n != n:
        raise ValueError(f"{lam} is not a partition of {n}")
    sums = _perm_class_sums(n, d)
    dim = d ** n
    out = np.zeros((dim, dim))
    for ct, mat in sums.items():
        chi = _mn_char(lam.parts, ct)
        if chi:
            out += chi * mat
    return (out * (dim_sym(lam) / factorial(n))).astype(complex)


def kron_power_apply(x: np.ndarray, n: int, b: np.ndarray) -> np.ndarray:
    """X^(x n) @ b without materializing the d^n-square Kronecker power."""
    d = x.shape[0]
    if n == 0:
        return b.copy()
    t = np.asarray(b, dtype=complex).reshape((d,) * n + (-1,))
    for k in range(n):
        t = np.moveaxis(np.tensordot(x, t, axes=(1, k)), 0, k)
    return t.reshape(d ** n, -1)


# ---------------------------------------------------------------------------
# The fixed orthonormal basis of Q_lam (Weyl module inside tensor space).
# ---------------------------------------------------------------------------

def semistandard_tableaux(lam, d: int) -> list[tuple[tuple[int, ...], ...]]:
    """All SSYT of shape lam with entries 0..d-1, lexicographic by rows."""
    lam = as_partition(lam)
    if lam.rows > d:
        return []
    rows: list[tuple[int, ...]] = []
    out: list[tuple[tuple[int, ...], ...]] = []

    def fill(i: int) -> None:
        if i == lam.rows:
            out.append(tuple(rows))
            return
        width = lam.parts[i]
        row = [0] * width

        def place(j: int) -> None:
            if j == width:
                rows.append(tuple(row))
                fill(i + 1)
                rows.pop()
                return
            lo = row[j - 1] if j > 0 else 0
            if i > 0:
                lo = max(lo, rows[i - 1][j] + 1)
            for v in range(lo, d):
                row[j] = v
                place(j + 1)

        place(0)

    fill(0)
    return out


def _perm_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _multiset_perms(counts: Counter) -> list[tuple[int, ...]]:
    total = sum(counts.values())
    out: list[tuple[int, ...]] = []
    word: list[int] = []

    def rec() -> None:
        if len(word) == total:
            out.append(tuple(word))
            return
        for v in sorted(counts):
            if counts[v]:
                counts[v] -= 1
                word.append(v)
                rec()
                word.pop()
                counts[v] += 1

    rec()
    return out


def basis_id(lam, d: int) -> str:
    return f"ysqr1:d{d}:{as_partition(lam)}"


def weyl_basis(lam, d: int) -> np.ndarray:
    """Orthonormal basis of the lam Weyl module inside (C^d)^(x n).

    Columns are the QR orthonormalization (in SSYT order) of the Young
    symmetrizer images of the SSYT-labeled weight words; the symmetrizer
    uses the column-reading standard tableau of shape lam.
    """
    lam = as_partition(lam)
    key = (lam.parts, d)
    with _lock:
        if key in _basis_cache:
            return _basis_cache[key]
    if lam.rows > d:
        raise ValueError(f"{lam} needs more than {d} rows")
    n = lam.n
    _check_tensor_scale(n, d)
    if n == 0:
        b = np.ones((1, 1), dtype=complex)
        with _lock:
            _basis_cache.setdefault(key, b)
        return b

    parts = lam.parts
    boxes = [(i, j) for j in range(parts[0]) for i in range(len(parts)) if parts[i] > j]
    pos = {box: p for p, box in enumerate(boxes)}
    row_positions = [[pos[(i, j)] for j in range(parts[i])] for i in range(len(parts))]
    col_positions = [[pos[(i, j)] for i in range(len(parts)) if parts[i] > j]
                     for j in range(parts[0])]

    col_group: list[tuple[np.ndarray, int]] = []
    for perms in itertools.product(*(tuple(itertools.permutations(range(len(cp))))
                                     for cp in col_positions)):
        mapping = np.arange(n)
        sign = 1
        for cp, perm in zip(col_positions, perms):
            sign *= _perm_sign(perm)
            for t, p in enumerate(cp):
                mapping[p] = cp[perm[t]]
        col_group.append((mapping, sign))

    place = np.array([d ** (n - 1 - k) for k in range(n)], dtype=np.int64)
    cols = []
    for tab in semistandard_tableaux(lam, d):
        word0 = [0] * n
        for i, row in enumerate(tab):
            for j, v in enumerate(row):
                word0[pos[(i, j)]] = v
        words = []
        per_row = [_multiset_perms(Counter(row)) for row in tab]
        for combo in itertools.product(*per_row):
            w = list(word0)
            for rp, vals in zip(row_positions, combo):
                for p, v in zip(rp, vals):
                    w[p] = v
            words.append(w)
        warr = np.array(words, dtype=np.int64)
        vec = np.zeros(d ** n)
        for mapping, sign in col_group:
            permuted = np.empty_like(warr)
            permuted[:, mapping] = warr
            np.add.at(vec, permuted @ place, float(sign))
        cols.append(vec)

    m = dim_gl(lam, d)
    assert len(cols) == m, "SSYT count disagrees with the Weyl dimension formula"
    mat = np.stack(cols, axis=1)
    q, r = np.linalg.qr(mat)
    if np.min(np.abs(np.diag(r))) < 1e-9 * np.max(np.abs(mat)):
        raise NumericalIntegrityError(f"symmetrizer columns degenerate for {lam}, d={d}")
    for c in range(m):
        col = q[:, c]
        lead = col[np.argmax(np.abs(col) > 1e-9)]
        if lead.real < 0:
            q[:, c] = -col
    b = q.astype(complex)
    with _lock:
        _basis_cache.setdefault(key, b)
    return b


@dataclass(frozen=True)
class IrrepMatrix:
    label: Partition
    d: int
    basis_id: str
    mat: np.ndarray


def irrep_matrix(lam, x: np.ndarray) -> IrrepMatrix:
    """q_lam(X) in the fixed basis, computed in tensor space.

    The defining (oracle) evaluation: restrict X^(x n) to the cached
    Weyl-module basis. `irrep_apply` is the fast equivalent.
    """
    lam = as_partition(lam)
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    if lam.rows > d:
        raise ValueError(f"{lam} needs more than {d} rows")
    b = weyl_basis(lam, d)
    mat = b.conj().T @ kron_power_apply(x, lam.n, b)
    return IrrepMatrix(lam, d, basis_id(lam, d), mat)


# ---------------------------------------------------------------------------
# Clebsch-Gordan block isometries.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CgDecomposition:
    source: Partition
    d: int
    blocks: tuple[tuple[Partition, np.ndarray], ...]

    def block(self, mu) -> np.ndarray:
        mu = as_partition(mu)
        for label, v in self.blocks:
            if label == mu:
                return v
        raise KeyError(f"{mu} is not a block of {self.source} + box at d={self.d}")


def _cg_seed(parts: tuple[int, ...], d: int) -> int:
    s = _CG_SEED_BASE
    for v in (d,) + parts:
        s = child_seed(s, v + 1)
    return s


def _nullspace(k: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    _, s, vh = np.linalg.svd(k, full_matrices=True)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * max(top, 1.0)))
    return vh[rank:].conj().T


def cg_isometries(lam, d: int) -> CgDecomposition:
    """Isometries V_mu embedding each Q_mu into Q_lam (x) C^d.

    Construction per the recorded recipe: solve the commutant of
    {q_lam(U_i) (x) U_i} for two generic unitaries as a nullspace
    problem, eigendecompose a random Hermitian commutant element to
    split the blocks, identify each block's mu by matching its trace on
    q_lam(D) (x) D for the prime diagonal D against Schur polynomial
    values, then rotate each block onto the fixed Q_mu basis with the
    (unique up to phase) intertwiner.
    """
    lam = as_partition(lam)
    key = (lam.parts, d)
    with _lock:
        if key in _cg_cache:
            return _cg_cache[key]

    m = dim_gl(lam, d)
    if m == 0:
        raise ValueError(f"{lam} needs more than {d} rows")
    md = m * d
    if md > CG_SOLVE_MAX:
        raise ValueError(
            f"commutant solve at dim {md} exceeds the supported scale {CG_SOLVE_MAX}")
    targets = add_box(lam, d)
    rng = make_rng(_cg_seed(lam.parts, d))
    gen_u = sample_haar_batch(d, 2, rng)
    q_lam_u = [irrep_matrix(lam, u).mat for u in gen_u]
    big_u = [np.kron(q, u) for q, u in zip(q_lam_u, gen_u)]

    eye = np.eye(md)
    stack = np.vstack([np.kron(a, eye) - np.kron(eye, a.T) for a in big_u])
    null = _nullspace(stack)
    if null.shape[1] != len(targets):
        raise NumericalIntegrityError(
            f"commutant dimension {null.shape[1]} != block count {len(targets)} for {lam}, d={d}")

    expected = sorted(dim_gl(mu, d) for mu in targets)
    groups: list[np.ndarray] | None = None
    for _ in range(5):
        coeff = rng.standard_normal(null.shape[1])
        h = sum(c * null[:, k].reshape(md, md) for k, c in enumerate(coeff))
        h = (h + h.conj().T) / 2
        w, v = np.linalg.eigh(h)
        spread = max(float(w[-1] - w[0]), 1.0)
        cuts = [0] + [i for i in range(1, md) if w[i] - w[i - 1] > 1e-6 * spread] + [md]
        cand = [v[:, cuts[i]:cuts[i + 1]] for i in range(len(cuts) - 1)]
        if sorted(g.shape[1] for g in cand) == expected:
            groups = cand
            break
    if groups is None:
        raise NumericalIntegrityError(
            f"commutant eigenvalue grouping failed after retries for {lam}, d={d}")

    primes = np.array([2, 3, 5, 7][:d], dtype=float)
    dmat = np.diag(primes).astype(complex)
    m_d = np.kron(irrep_matrix(lam, dmat).mat, dmat)
    target_traces = {mu: float(schur_polynomial(mu, primes)) for mu in targets}

    blocks: list[tuple[Partition, np.ndarray]] = []
    matched: set[Partition] = set()
    for g in groups:
        t = float(np.real(np.einsum('ij,ik,kj->', g.conj(), m_d, g)))
        hits = [mu for mu, s in target_traces.items()
                if abs(t - s) <= 1e-6 * max(1.0, abs(s)) and mu not in matched]
        if len(hits) != 1:
            raise NumericalIntegrityError(
                f"block identification ambiguous for {lam}, d={d}: trace {t}, hits {hits}")
        mu = hits[0]
        matched.add(mu)
        m_mu = dim_gl(mu, d)
        q_mu_u = [irrep_matrix(mu, u).mat for u in gen_u]
        eye_mu = np.eye(m_mu)
        pi_u = [g.conj().T @ a @ g for a in big_u]
        t_stack = np.vstack([np.kron(p, eye_mu) - np.kron(eye_mu, qm.T)
                             for p, qm in zip(pi_u, q_mu_u)])
        t_null = _nullspace(t_stack)
        if t_null.shape[1] != 1:
            raise NumericalIntegrityError(
                f"intertwiner space dimension {t_null.shape[1]} != 1 for {lam}->{mu}")
        t_mat = t_null[:, 0].reshape(m_mu, m_mu)
        scale = np.sqrt(np.trace(t_mat.conj().T @ t_mat).real / m_mu)
        t_mat = t_mat / scale
        if np.linalg.norm(t_mat.conj().T @ t_mat - eye_mu) > 1e-7:
            raise NumericalIntegrityError(f"intertwiner not unitary for {lam}->{mu}")
        lead = t_mat.reshape(-1)[int(np.argmax(np.abs(t_mat)))]
        t_mat = t_mat * (lead.conj() / abs(lead))
        blocks.append((mu, g @ t_mat))

    blocks.sort(key=lambda item: item[0], reverse=True)
    total = sum(v @ v.conj().T for _, v in blocks)
    if np.linalg.norm(total - eye) > 1e-8 * md:
        raise NumericalIntegrityError(f"CG completeness failed for {lam}, d={d}")
    check_u = sample_haar_batch(d, 5, rng)
    for u in check_u:
        big = np.kron(irrep_matrix(lam, u).mat, u)
        for mu, v in blocks:
            resid = np.linalg.norm(v.conj().T @ big @ v - irrep_matrix(mu, u).mat)
            if resid > 1e-7:
                raise NumericalIntegrityError(
                    f"CG intertwining residual {resid:.2e} for {lam}->{mu}, d={d}")

    decomp = CgDecomposition(lam, d, tuple(blocks))
    with _lock:
        _cg_cache.setdefault(key, decomp)
    return _cg_cache[key]


# ---------------------------------------------------------------------------
# Fast irrep evaluation through the CG chain.
# ---------------------------------------------------------------------------

def _batched_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.einsum('...ij,...kl->...ikjl', a, b)
    return out.reshape(a.shape[:-2] + (a.shape[-2] * b.shape[-2], a.shape[-1] * b.shape[-1]))


def irrep_apply_many(labels, d: int, xs: np.ndarray) -> dict[Partition, np.ndarray]:
    """q_lam(X) for several labels at once, sharing the CG chain.

    xs may carry leading batch axes. Matrices come out in the same fixed
    basis as irrep_matrix; the chain walk is just much cheaper per
    evaluation once the isometries are cached.
    """
    xs = np.asarray(xs, dtype=complex)
    memo: dict[tuple[int, ...], np.ndarray] = {}

    def ev(parts: tuple[int, ...]) -> np.ndarray:
        if parts in memo:
            return memo[parts]
        if not parts:
            val = np.ones(xs.shape[:-2] + (1, 1), dtype=complex)
        elif parts == (1,):
            val = xs
        else:
            parent = remove_box(Partition(parts))
            v = cg_isometries(parent, d).block(parts)
            big = _batched_kron(ev(parent.parts), xs)
            val = v.conj().T @ big @ v
        memo[parts] = val
        return val

    return {as_partition(lab): ev(as_partition(lab).parts) for lab in labels}


def irrep_apply(lam, d: int, x: np.ndarray) -> np.ndarray:
    """q_lam(X) via the CG chain; equal to irrep_matrix(lam, X).mat."""
    lam = as_partition(lam)
    return irrep_apply_many([lam], d, x)[lam]
