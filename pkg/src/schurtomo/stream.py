"""Streaming Schur sampling on product states.

Simulates the copy-by-copy weak Schur measurement as a partition-valued
Markov chain. On input rho^(x n) the label path is Markov with
transition probability Pr[mu | lam] = s_mu(eig rho)/s_lam(eig rho) over
mu = lam + one box, so sampling never touches the exponentially large
tensor space; `physical_step_check` validates that shortcut against the
literal one-step isometry picture, and `tensor_oracle_distribution`
validates the marginal against brute-force isotypic projectors.
"""
from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass

import numpy as np

from .linalg import NumericalIntegrityError, state_eigenvalues
from .partitions import (Partition, add_box, as_partition, dim_gl, dim_sym,
                         enumerate_partitions)
from .schur_weyl import (cg_isometries, irrep_apply, isotypic_projector,
                         kron_power_apply, schur_polynomial)

_lock = threading.Lock()
_transition_cache: dict[tuple[tuple[int, ...], bytes, int], tuple[list[Partition], np.ndarray]] = {}


@dataclass(frozen=True)
class StreamOutcome:
    """One sampled run of the streaming measurement.

    path holds the labels after each copy; post_state is the normalized
    irrep block q_final(rho)/s_final (None when skipped for scale);
    max_register_dim is the largest simulated register dim_gl(label)*d
    seen along the path.
    """
    path: tuple[Partition, ...]
    final: Partition
    post_state: np.ndarray | None
    max_register_dim: int


def _transitions(lam: Partition, eigs: np.ndarray, d: int) -> tuple[list[Partition], np.ndarray]:
    key = (lam.parts, eigs.tobytes(), d)
    with _lock:
        hit = _transition_cache.get(key)
    if hit is not None:
        return hit
    children = add_box(lam, d)
    s_lam = schur_polynomial(lam, eigs) if lam.n else 1.0
    if s_lam <= 0.0:
        raise NumericalIntegrityError(f"vanishing Schur value on the sampled path at {lam}")
    probs = np.array([schur_polynomial(mu, eigs) for mu in children]) / s_lam
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-9:
        raise NumericalIntegrityError(f"transition probabilities sum to {total!r} at {lam}")
    probs = np.clip(probs / total, 0.0, None)
    result = (children, probs)
    with _lock:
        _transition_cache.setdefault(key, result)
    return result


def stream_sample(rho: np.ndarray, n: int, rng: np.random.Generator,
                  with_post_state: bool = True) -> StreamOutcome:
    """Sample one label path from n streamed copies of rho.

    The post-measurement state on the final irrep block is
    q_final(rho)/s_final(rho); pass with_post_state=False to skip its
    (n-dependent) computation when only the path is needed.
    """
    if n < 1:
        raise ValueError("need at least one copy")
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    eigs = state_eigenvalues(rho)
    lam = Partition(())
    path: list[Partition] = []
    max_dim = 0
    for _ in range(n):
        children, probs = _transitions(lam, eigs, d)
        lam = children[int(rng.choice(len(children), p=probs))]
        path.append(lam)
        max_dim = max(max_dim, dim_gl(lam, d) * d)
    post = None
    if with_post_state:
        s_final = schur_polynomial(lam, eigs)
        post = irrep_apply(lam, d, rho) / s_final
    return StreamOutcome(tuple(path), lam, post, max_dim)


def label_distribution(rho: np.ndarray, n: int) -> dict[Partition, float]:
    """Exact final-label distribution: p_lam = dim_sym(lam) s_lam(eig rho)."""
    if n < 1:
        raise ValueError("need at least one copy")
    rho = np.asarray(rho, dtype=complex)
    eigs = state_eigenvalues(rho)
    d = rho.shape[0]
    dist = {lam: dim_sym(lam) * float(schur_polynomial(lam, eigs))
            for lam in enumerate_partitions(n, d)}
    total = sum(dist.values())
    if abs(total - 1.0) > 1e-9:
        raise NumericalIntegrityError(f"label distribution sums to {total!r}")
    return dist


def tensor_oracle_distribution(rho: np.ndarray, n: int) -> dict[Partition, float]:
    """Brute-force final-label distribution: p_lam = Tr[Pi_lam rho^(x n)]."""
    if n < 1:
        raise ValueError("need at least one copy")
    rho = np.asarray(rho, dtype=complex)
    state_eigenvalues(rho)
    d = rho.shape[0]
    dist: dict[Partition, float] = {}
    for lam in enumerate_partitions(n, d):
        proj = isotypic_projector(lam, n, d)
        dist[lam] = float(np.trace(kron_power_apply(rho, n, proj)).real)
    return dist


@dataclass(frozen=True)
class StepReport:
    """Residuals of one physical measurement step against the fast path."""
    label: Partition
    block_probs: tuple[tuple[Partition, float, float], ...]  # (mu, measured, expected)
    max_prob_residual: float
    max_state_residual: float


def physical_step_check(lam, rho: np.ndarray, d: int, tol: float = 1e-7) -> StepReport:
    """Check one literal measurement step against the Schur-ratio fast path.

    Forms the two-register state (q_lam(rho)/s_lam) (x) rho, projects with
    the block isometries of lam + box, and compares block probabilities to
    s_mu/s_lam and conditional post-states to q_mu(rho)/s_mu. Raises
    NumericalIntegrityError when a residual exceeds tol.
    """
    lam = as_partition(lam)
    rho = np.asarray(rho, dtype=complex)
    eigs = state_eigenvalues(rho)
    s_lam = float(schur_polynomial(lam, eigs)) if lam.n else 1.0
    if s_lam <= 0.0:
        raise ValueError(f"state has vanishing weight on {lam}")
    q_lam = irrep_apply(lam, d, rho) if lam.n else np.ones((1, 1), dtype=complex)
    big = np.kron(q_lam / s_lam, rho)
    cg = cg_isometries(lam, d)
    rows: list[tuple[Partition, float, float]] = []
    max_prob = 0.0
    max_state = 0.0
    for mu, v in cg.blocks:
        block = v.conj().T @ big @ v
        prob = float(np.trace(block).real)
        s_mu = float(schur_polynomial(mu, eigs))
        expected = s_mu / s_lam
        rows.append((mu, prob, expected))
        max_prob = max(max_prob, abs(prob - expected))
        if expected > 1e-12:
            target = irrep_apply(mu, d, rho) / s_mu
            max_state = max(max_state, float(np.linalg.norm(block / prob - target)))
    report = StepReport(lam, tuple(rows), max_prob, max_state)
    if max_prob > tol or max_state > tol:
        raise NumericalIntegrityError(
            f"physical step residuals {max_prob:.2e}/{max_state:.2e} exceed {tol:.1e} at {lam}")
    return report


def final_label_counts(rho: np.ndarray, n: int, samples: int,
                       rng: np.random.Generator) -> dict[Partition, int]:
    """Final-label counts of many streaming runs, via layered multinomial splits.

    Distributionally identical to `samples` independent stream_sample
    calls, but costs one multinomial draw per (label, step) instead of
    one categorical draw per copy per run.
    """
    if n < 1 or samples < 0:
        raise ValueError("need n >= 1 and samples >= 0")
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    eigs = state_eigenvalues(rho)
    layer: dict[Partition, int] = {Partition(()): samples}
    for _ in range(n):
        nxt: dict[Partition, int] = {}
        for lam in sorted(layer, reverse=True):
            count = layer[lam]
            children, probs = _transitions(lam, eigs, d)
            if count == 0:
                continue
            split = rng.multinomial(count, probs / probs.sum())
            for mu, c in zip(children, split):
                if c:
                    nxt[mu] = nxt.get(mu, 0) + int(c)
        layer = nxt
    return layer


def distribution_csv(dist: dict[Partition, float]) -> str:
    """Render a label distribution as CSV text: partition, probability."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["partition", "probability"])
    for lam in sorted(dist, reverse=True):
        writer.writerow([str(lam), format(dist[lam], ".17g")])
    return buf.getvalue()
