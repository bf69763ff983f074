"""Discretized Haar POVM families on irrep blocks.

A finite set S of Haar-sampled unitaries induces, for each label lam,
the sub-normalized measurement elements

    N(lam, U) = dim_gl(lam) / ((1+eta) |S| s_lam(lam_bar)) q_lam(U lam_bar U^dag)

plus a fail element completing the identity on the block. Whether that
family is a genuine POVM (fail element PSD) is certified by the class-A
or class-B membership test: the empirical twirl over S must approximate
the exact Haar twirl, a known scalar multiple of identity, within a
relative eta on every label in scope.
"""
from __future__ import annotations

import io
import os
import warnings
from dataclasses import dataclass
from math import ceil, log

import numpy as np

from .linalg import NumericalIntegrityError, make_rng, sample_haar_batch
from .partitions import (Partition, add_box, as_partition, dim_gl,
                         enumerate_partitions, normalized_diag)
from .schur_weyl import basis_id, irrep_apply_many, schur_polynomial

_USET_MAGIC = "USET"
_USET_VERSION = 1
_CHUNK = 4096


@dataclass(frozen=True)
class UnitarySet:
    """A finite recorded set of d x d unitaries with its generating seed."""
    d: int
    members: np.ndarray  # (count, d, d) complex
    seed: int
    count: int

    def __post_init__(self):
        mem = np.asarray(self.members, dtype=complex)
        if mem.shape != (self.count, self.d, self.d):
            raise ValueError(f"member array shape {mem.shape} does not match "
                             f"count={self.count}, d={self.d}")
        gram = mem.conj().transpose(0, 2, 1) @ mem
        dev = float(np.max(np.abs(gram - np.eye(self.d)))) if self.count else 0.0
        if dev > 1e-10:
            raise ValueError(f"member deviates from unitarity by {dev:.2e}")
        object.__setattr__(self, "members", mem)


def haar_unitary_set(d: int, count: int, seed: int) -> UnitarySet:
    """Sample count i.i.d. Haar unitaries from the recorded seed."""
    rng = make_rng(seed)
    return UnitarySet(d, sample_haar_batch(d, count, rng), seed, count)


def save_unitary_set(path: str | os.PathLike, s: UnitarySet) -> None:
    """Write the USET binary format: text header, then raw complex entries.

    Header line: 'USET 1 <d> <count> <seed>'. Body: count * d^2 complex
    numbers as little-endian float64 (re, im) pairs, row-major per matrix.
    """
    header = f"{_USET_MAGIC} {_USET_VERSION} {s.d} {s.count} {s.seed}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(s.members, dtype="<c16").tobytes())


def load_unitary_set(path: str | os.PathLike) -> UnitarySet:
    """Read the USET binary format back; bit-exact inverse of save."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 5 or header[0] != _USET_MAGIC:
            raise ValueError("not a USET file")
        if int(header[1]) != _USET_VERSION:
            raise ValueError(f"unsupported USET version {header[1]}")
        d, count, seed = int(header[2]), int(header[3]), int(header[4])
        body = fh.read()
    expect = count * d * d * 16
    if len(body) != expect:
        raise ValueError(f"USET body holds {len(body)} bytes, expected {expect}")
    members = np.frombuffer(body, dtype="<c16").reshape(count, d, d).copy()
    return UnitarySet(d, members, seed, count)


def required_set_size(n: int, d: int, r: int, eta: float, variant: str = "A") -> int:
    """Set size at which a Haar sample is eta-good with positive probability.

    ceil(2 b^(dr) ln2 / eta^2 * ln(2 b^(2dr))) with b = n+1 for class A
    and b = n+2 for class B. Inputs below the n >= d >= 2 regime of the
    guarantee are allowed but flagged with a warning.
    """
    if not 0.0 < eta <= 0.5:
        raise ValueError(f"eta must lie in (0, 1/2], got {eta!r}")
    if variant not in ("A", "B"):
        raise ValueError(f"variant must be 'A' or 'B', got {variant!r}")
    if not n >= d >= 2:
        warnings.warn(f"size formula guarantee assumes n >= d >= 2, got n={n}, d={d}",
                      stacklevel=2)
    base = (n + 1) if variant == "A" else (n + 2)
    power = float(base) ** (d * r)
    return ceil(2.0 * power * log(2.0) / eta ** 2 * log(2.0 * power * power))


def _validate_pair(lam: Partition, mu: Partition, d: int) -> None:
    if lam.n < 1 or lam.rows > d:
        raise ValueError(f"invalid source label {lam} for d={d}")
    if mu != lam and mu not in add_box(lam, d):
        raise ValueError(f"{mu} is neither {lam} nor {lam} plus one box")


def twirl_scalar(lam, mu, d: int) -> float:
    """The exact Haar twirl of q_mu(U lam_bar U^dag) is this multiple of I."""
    lam, mu = as_partition(lam), as_partition(mu)
    _validate_pair(lam, mu, d)
    spectrum = np.diagonal(normalized_diag(lam, d)).real
    return float(schur_polynomial(mu, spectrum)) / dim_gl(mu, d)


def _twirl_sums(s: UnitarySet, lam: Partition,
                mus: list[Partition]) -> dict[Partition, np.ndarray]:
    """Mean of q_mu(U lam_bar U^dag) over S for each mu, chunked over S."""
    lam_bar = normalized_diag(lam, s.d)
    sums: dict[Partition, np.ndarray] = {
        mu: np.zeros((dim_gl(mu, s.d),) * 2, dtype=complex) for mu in mus}
    for start in range(0, s.count, _CHUNK):
        block = s.members[start:start + _CHUNK]
        conj = block @ lam_bar @ block.conj().transpose(0, 2, 1)
        vals = irrep_apply_many(mus, s.d, conj)
        for mu in mus:
            sums[mu] += vals[mu].sum(axis=0)
    out = {}
    for mu in mus:
        m = sums[mu] / s.count
        out[mu] = (m + m.conj().T) / 2
    return out


def empirical_twirl(s: UnitarySet, lam, mu) -> np.ndarray:
    """(1/|S|) sum_U q_mu(U lam_bar U^dag), Hermitian in the fixed basis."""
    lam, mu = as_partition(lam), as_partition(mu)
    _validate_pair(lam, mu, s.d)
    return _twirl_sums(s, lam, [mu])[mu]


@dataclass(frozen=True)
class MembershipReport:
    """Outcome of the class-A or class-B eta-goodness test of a set."""
    variant: str
    n: int
    d: int
    r: int
    eta: float
    seed: int
    per_pair: dict[tuple[Partition, Partition], tuple[float, float, bool]]
    zero_pairs: dict[tuple[Partition, Partition], float]
    overall: bool


def check_membership(s: UnitarySet, n: int, d: int, r: int, eta: float,
                     variant: str = "A") -> MembershipReport:
    """Test whether S is eta-good for every label in scope.

    Class A tests pairs (lam, lam) over lam partitioning n with at most r
    rows; class B instead tests (lam, mu) for each mu = lam plus one box,
    capped at r rows. Each test checks that all eigenvalues of the
    empirical twirl lie inside [(1-eta)c, (1+eta)c] (tolerance 1e-10)
    where c is the exact twirl scalar. Pairs with c = 0 are asserted to
    have numerically vanishing empirical twirl instead.
    """
    if d != s.d:
        raise ValueError(f"set is over U({s.d}), asked to test d={d}")
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")
    if variant not in ("A", "B"):
        raise ValueError(f"variant must be 'A' or 'B', got {variant!r}")
    per_pair: dict[tuple[Partition, Partition], tuple[float, float, bool]] = {}
    zero_pairs: dict[tuple[Partition, Partition], float] = {}
    for lam in enumerate_partitions(n, r):
        mus = [lam] if variant == "A" else add_box(lam, r)
        twirls = _twirl_sums(s, lam, mus)
        for mu in mus:
            c = twirl_scalar(lam, mu, d)
            if c == 0.0:
                sup = float(np.max(np.abs(twirls[mu])))
                if sup > 1e-10:
                    raise NumericalIntegrityError(
                        f"twirl for rank-impossible pair ({lam},{mu}) is {sup:.2e}, not 0")
                zero_pairs[(lam, mu)] = sup
                continue
            w = np.linalg.eigvalsh(twirls[mu])
            lo, hi = float(w[0]), float(w[-1])
            ok = (lo >= (1.0 - eta) * c - 1e-10) and (hi <= (1.0 + eta) * c + 1e-10)
            per_pair[(lam, mu)] = (lo / c, hi / c, ok)
    overall = all(ok for _, _, ok in per_pair.values())
    return MembershipReport(variant, n, d, r, eta, s.seed, per_pair, zero_pairs, overall)


@dataclass(frozen=True)
class DiscretePovm:
    """The measurement family {N(lam,U)}_U plus fail element on block lam."""
    label: Partition
    eta: float
    set_ref: UnitarySet
    elements: np.ndarray  # (count, m, m)
    fail_element: np.ndarray
    basis_id: str


def build_povm(lam, s: UnitarySet, eta: float,
               membership: MembershipReport | None = None) -> DiscretePovm:
    """Construct the discretized family on block lam from the set S.

    Completeness is exact by construction. When a passing membership
    report is supplied the fail element is asserted PSD (min eigenvalue
    >= -1e-8), which is the content of the POVM-validity lemma; without
    one the family may fail positivity, as the S = {identity}
    counterexample shows.
    """
    lam = as_partition(lam)
    if lam.rows > s.d:
        raise ValueError(f"{lam} needs more than {s.d} rows")
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta!r}")
    d = s.d
    lam_bar = normalized_diag(lam, d)
    s_lam = float(schur_polynomial(lam, np.diagonal(lam_bar).real))
    coeff = dim_gl(lam, d) / ((1.0 + eta) * s.count * s_lam)
    pieces = []
    for start in range(0, s.count, _CHUNK):
        block = s.members[start:start + _CHUNK]
        conj = block @ lam_bar @ block.conj().transpose(0, 2, 1)
        pieces.append(irrep_apply_many([lam], d, conj)[lam])
    qs = np.concatenate(pieces, axis=0) if pieces else np.zeros((0, dim_gl(lam, d), dim_gl(lam, d)), complex)
    elements = coeff * qs
    fail = np.eye(dim_gl(lam, d), dtype=complex) - elements.sum(axis=0)
    fail = (fail + fail.conj().T) / 2
    if membership is not None and membership.overall:
        min_eig = float(np.linalg.eigvalsh(fail)[0])
        if min_eig < -1e-8:
            raise NumericalIntegrityError(
                f"fail element has eigenvalue {min_eig:.2e} despite verified membership")
    return DiscretePovm(lam, eta, s, elements, fail, basis_id(lam, d))
