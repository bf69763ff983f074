"""End-to-end tomography trials and their exact outcome distributions.

A trial streams n copies of rho through the label chain, then measures
the post-measurement irrep block with the discretized Haar family for
the sampled label, and turns the outcome into the estimate U lam_bar
U^dag (or the maximally mixed state on fail). Everything here runs on
d x d spectra: the probability of outcome U given label lam is
proportional to s_lam(eig(U lam_bar U^dag rho)), which equals the trace
of the product of the two irrep matrices without ever forming them.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .linalg import (NumericalIntegrityError, herm_eigendecompose, psd_sqrt,
                     state_eigenvalues)
from .partitions import Partition, as_partition, dim_gl, dim_sym, normalized_diag
from .povm import MembershipReport, UnitarySet
from .schur_weyl import isotypic_projector, kron_power_apply, schur_polynomial
from .stream import label_distribution, stream_sample

FAIL = "fail"

_METRICS = ("trace", "fidelity", "infidelity", "purified", "bures")
_TRIANGLE_METRICS = ("trace", "purified", "bures")


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clamped to [0,1]."""
    root = psd_sqrt(np.asarray(rho, dtype=complex))
    inner = root @ np.asarray(sigma, dtype=complex) @ root
    w, _ = herm_eigendecompose(inner)
    w = np.clip(w, 0.0, None)
    # Eigenvalues at rounding-noise scale would be amplified by the square
    # root (1e-16 -> 1e-8) and bias the sum; suppress anything far below
    # the dominant eigenvalue.
    w[w <= 1e-12 * w.max(initial=0.0)] = 0.0
    val = float(np.sum(np.sqrt(w)) ** 2)
    return min(max(val, 0.0), 1.0)


def distance(metric: str, rho: np.ndarray, sigma: np.ndarray) -> float:
    """Distance or similarity between two states under the named measure.

    trace: (1/2)||rho - sigma||_1. fidelity: F. infidelity: 1 - F.
    purified: sqrt(1 - F). bures: sqrt(2 (1 - sqrt(F))).
    """
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {_METRICS}")
    if metric == "trace":
        diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
        w, _ = herm_eigendecompose(diff)
        return float(0.5 * np.sum(np.abs(w)))
    f = fidelity(rho, sigma)
    if metric == "fidelity":
        return f
    if metric == "infidelity":
        return 1.0 - f
    if metric == "purified":
        return float(np.sqrt(max(1.0 - f, 0.0)))
    return float(np.sqrt(max(2.0 * (1.0 - np.sqrt(f)), 0.0)))


@dataclass(frozen=True)
class TrialResult:
    """One tomography trial: sampled label, measurement outcome, estimate."""
    final_label: Partition
    outcome: int | str  # index into S, or FAIL
    estimate: np.ndarray
    infidelity: float
    trace_dist: float
    max_register_dim: int
    seed: int
    set_verified: bool


def trial_record(result: TrialResult, index: int) -> str:
    """One JSONL line for a trial, floats at 17 significant digits."""
    out = f'"{FAIL}"' if result.outcome == FAIL else str(result.outcome)
    return (f'{{"trial": {index}, "seed": {result.seed}, '
            f'"label": "{result.final_label}", "outcome": {out}, '
            f'"infidelity": {result.infidelity:.17g}, '
            f'"trace_dist": {result.trace_dist:.17g}, '
            f'"max_register_dim": {result.max_register_dim}}}')


class TomographyEngine:
    """Shared per-experiment state: one (rho, S, eta, n) with cached
    conditional outcome distributions per label.

    The conditional distribution over outcomes given a final label does
    not depend on the trial, so repeated trials reuse it; estimates come
    straight from the recorded unitaries.
    """

    def __init__(self, rho: np.ndarray, s: UnitarySet, eta: float, n: int,
                 membership: MembershipReport | None = None):
        if not 0.0 <= eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {eta!r}")
        if n < 1:
            raise ValueError("need at least one copy")
        self.rho = np.asarray(rho, dtype=complex)
        self.d = self.rho.shape[0]
        if self.d != s.d:
            raise ValueError(f"state dimension {self.d} != set dimension {s.d}")
        self.s = s
        self.eta = eta
        self.n = n
        self.set_verified = bool(membership is not None and membership.overall
                                 and membership.n == n and membership.d == s.d
                                 and membership.eta <= eta)
        self.eigs = state_eigenvalues(self.rho)
        self._lock = threading.Lock()
        self._conditional: dict[Partition, np.ndarray] = {}
        self._estimates: dict[Partition, np.ndarray] = {}

    def outcome_weights(self, lam: Partition) -> np.ndarray:
        """Exact conditional outcome weights given the label, fail mass last.

        The fail entry is the signed complement 1 - sum_U Pr[U | lam]; for
        an unverified set it can be negative, which is precisely the
        family failing to be a POVM.
        """
        d = self.d
        lam_bar = normalized_diag(lam, d)
        spectrum = np.diagonal(lam_bar).real
        s_lam_bar = float(schur_polynomial(lam, spectrum))
        s_lam_rho = float(schur_polynomial(lam, self.eigs))
        coeff = dim_gl(lam, d) / ((1.0 + self.eta) * self.s.count * s_lam_bar * s_lam_rho)
        conj = self.s.members @ lam_bar @ self.s.members.conj().transpose(0, 2, 1)
        ev = np.linalg.eigvals(conj @ self.rho)
        if float(np.max(np.abs(ev.imag))) > 1e-8:
            raise NumericalIntegrityError("outcome spectrum is not numerically real")
        xs = -np.sort(-np.clip(ev.real, 0.0, None), axis=-1)
        probs = coeff * np.asarray(schur_polynomial(lam, xs), dtype=float)
        return np.append(probs, 1.0 - float(probs.sum()))

    def conditional_outcomes(self, lam: Partition) -> np.ndarray:
        """Pr[outcome | label] as a sampleable distribution, fail mass last."""
        with self._lock:
            hit = self._conditional.get(lam)
        if hit is not None:
            return hit
        weights = self.outcome_weights(lam)
        if float(weights.min()) < -1e-10:
            raise NumericalIntegrityError(
                f"negative outcome probability {float(weights.min()):.2e} at label {lam}")
        full = np.clip(weights, 0.0, None)
        full /= full.sum()
        with self._lock:
            self._conditional.setdefault(lam, full)
        return self._conditional[lam]

    def estimate_for(self, lam: Partition, outcome: int | str) -> np.ndarray:
        if outcome == FAIL:
            return np.eye(self.d, dtype=complex) / self.d
        key = lam
        with self._lock:
            ests = self._estimates.get(key)
        if ests is None:
            lam_bar = normalized_diag(lam, self.d)
            ests = self.s.members @ lam_bar @ self.s.members.conj().transpose(0, 2, 1)
            with self._lock:
                self._estimates.setdefault(key, ests)
            ests = self._estimates[key]
        return ests[outcome]

    def trial(self, rng: np.random.Generator, seed: int = 0) -> TrialResult:
        sample = stream_sample(self.rho, self.n, rng, with_post_state=False)
        lam = sample.final
        probs = self.conditional_outcomes(lam)
        idx = int(rng.choice(len(probs), p=probs))
        outcome: int | str = FAIL if idx == len(probs) - 1 else idx
        est = self.estimate_for(lam, outcome)
        return TrialResult(
            final_label=lam,
            outcome=outcome,
            estimate=est,
            infidelity=distance("infidelity", self.rho, est),
            trace_dist=distance("trace", self.rho, est),
            max_register_dim=sample.max_register_dim,
            seed=seed,
            set_verified=self.set_verified,
        )


def run_tomography(rho: np.ndarray, s: UnitarySet, eta: float, n: int,
                   rng: np.random.Generator,
                   membership: MembershipReport | None = None,
                   seed: int = 0) -> TrialResult:
    """One full trial; results are stamped with the set's verification state."""
    return TomographyEngine(rho, s, eta, n, membership).trial(rng, seed)


def direct_joint_distribution(rho: np.ndarray, s: UnitarySet, eta: float,
                              n: int) -> dict[tuple[Partition, int | str], float]:
    """Exact joint distribution of (final label, outcome), closed form.

    Pr[lam, U] = dim_sym(lam) * coeff(lam) * s_lam(eig(U lam_bar U^dag rho));
    the per-label fail mass completes each block. Sums to one.
    """
    engine = TomographyEngine(rho, s, eta, n)
    labels = label_distribution(rho, n)
    joint: dict[tuple[Partition, int | str], float] = {}
    for lam, p_lam in labels.items():
        if p_lam <= 0.0:
            for idx in range(s.count):
                joint[(lam, idx)] = 0.0
            joint[(lam, FAIL)] = 0.0
            continue
        weights = engine.outcome_weights(lam)
        for idx in range(s.count):
            joint[(lam, idx)] = p_lam * float(weights[idx])
        joint[(lam, FAIL)] = p_lam * float(weights[-1])
    total = sum(joint.values())
    if abs(total - 1.0) > 1e-9:
        raise NumericalIntegrityError(f"joint distribution sums to {total!r}")
    return joint


def tensor_joint_distribution(rho: np.ndarray, s: UnitarySet, eta: float,
                              n: int) -> dict[tuple[Partition, int | str], float]:
    """Brute-force oracle for the joint distribution on the full tensor space.

    Pr[lam, U] = Tr[M(lam,U) rho^(x n)] with M(lam,U) the projected,
    rescaled tensor power of U lam_bar U^dag. Exponential in n; use only
    at oracle scale.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    state_eigenvalues(rho)
    labels = label_distribution(rho, n)
    joint: dict[tuple[Partition, int | str], float] = {}
    for lam in labels:
        proj = isotypic_projector(lam, n, d)
        lam_bar = normalized_diag(lam, d)
        spectrum = np.diagonal(lam_bar).real
        s_lam_bar = float(schur_polynomial(lam, spectrum))
        coeff = dim_gl(lam, d) / ((1.0 + eta) * s.count * s_lam_bar)
        rho_n_proj = kron_power_apply(rho, n, proj)  # rho^(x n) Pi_lam
        total = 0.0
        for idx in range(s.count):
            u = s.members[idx]
            a = u @ lam_bar @ u.conj().T
            # Tr[Pi a^(x n) Pi rho^(x n)] = Tr[a^(x n) rho^(x n) Pi]
            # because Pi commutes with both tensor powers.
            p = coeff * float(np.trace(kron_power_apply(a, n, rho_n_proj)).real)
            joint[(lam, idx)] = p
            total += p
        joint[(lam, FAIL)] = float(np.trace(rho_n_proj).real) - total
    return joint


def median_select(estimates: list, epsilon: float, metric) -> object:
    """The estimate whose 2-epsilon ball contains the most estimates.

    metric may be one of the triangle-inequality metric names
    ('trace', 'purified', 'bures') or any callable pairwise distance.
    The ball count includes the candidate itself; ties break to the
    lowest index. With a majority of estimates within epsilon of an
    unknown truth, the winner is within 3 epsilon of it.
    """
    if not estimates:
        raise ValueError("need at least one estimate")
    if callable(metric):
        dist_fn = metric
    elif metric in _TRIANGLE_METRICS:
        dist_fn = lambda a, b: distance(metric, a, b)
    else:
        raise ValueError(f"metric must be callable or one of {_TRIANGLE_METRICS}, "
                         f"got {metric!r}")
    k = len(estimates)
    dmat = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dmat[i, j] = dmat[j, i] = float(dist_fn(estimates[i], estimates[j]))
    counts = (dmat <= 2.0 * epsilon + 1e-15).sum(axis=1)
    return estimates[int(np.argmax(counts))]


@dataclass(frozen=True)
class BatchStats:
    """Aggregate accuracy statistics of a batch of trials."""
    trials: int
    metric: str
    rates: dict[float, float]
    smd: float
    fail_rate: float

    def pac_rate(self, threshold: float) -> float:
        return self.rates[threshold]


def batch_stats(trials: list[TrialResult], thresholds: list[float],
                metric: str = "infidelity") -> BatchStats:
    """PAC rates at each threshold, square-mean distance, and fail rate."""
    if not trials:
        raise ValueError("need at least one trial")
    if metric == "infidelity":
        vals = np.array([t.infidelity for t in trials])
    elif metric == "trace":
        vals = np.array([t.trace_dist for t in trials])
    else:
        raise ValueError(f"metric must be 'infidelity' or 'trace', got {metric!r}")
    rates = {float(t): float(np.mean(vals <= t)) for t in thresholds}
    smd = float(np.sqrt(np.mean(vals ** 2)))
    fail_rate = sum(1 for t in trials if t.outcome == FAIL) / len(trials)
    return BatchStats(len(trials), metric, rates, smd, fail_rate)
