"""
Acceptance gate: eleven end-to-end checks of the provable properties the
package implements, each with an explicit runtime budget and a printed
one-line verdict.

Every expected value is either exact integer arithmetic, an independently
computed dense-tensor oracle, a closed-form bound evaluated at the same
parameters, or an empirical frequency compared at four standard errors.
"""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from schurtomo.linalg import make_rng, pseudo_inv_sqrt, psd_sqrt, sample_density
from schurtomo.measurement import (
    FinitePovm,
    RecursiveMeasurer,
    born_distribution,
    dilated_distribution,
    naimark_unitary,
)
from schurtomo.partitions import (
    Partition,
    dim_gl,
    dim_sym,
    enumerate_partitions,
)
from schurtomo.povm import (
    UnitarySet,
    build_povm,
    check_membership,
    haar_unitary_set,
    required_set_size,
)
from schurtomo.stream import (
    final_label_counts,
    label_distribution,
    stream_sample,
    tensor_oracle_distribution,
)
from schurtomo.tomography import (
    FAIL,
    TomographyEngine,
    direct_joint_distribution,
    distance,
    fidelity,
    median_select,
    tensor_joint_distribution,
)
from schurtomo.harness import lemma_grid

MIXED = np.eye(2) / 2
TILTED = np.diag([0.75, 0.25]).astype(complex)
PURE0 = np.diag([1.0, 0.0]).astype(complex)


@contextmanager
def budget(criterion, seconds):
    """Time a criterion body and print the verdict line on success."""
    start = time.perf_counter()
    info = {}
    yield info
    elapsed = time.perf_counter() - start
    detail = info.get("detail", "")
    print(f"PASS criterion {criterion:02d}: {detail} "
          f"[{elapsed:.1f}s < {seconds}s]")
    assert elapsed < seconds, f"criterion {criterion} exceeded {seconds}s"


def random_povm(dim, k, seed):
    """POVM from the whitened Gram family of k random vectors in C^dim."""
    rng = make_rng(seed)
    vecs = rng.normal(size=(k, dim)) + 1j * rng.normal(size=(k, dim))
    gram = np.einsum("xi,xj->xij", vecs, vecs.conj())
    w = pseudo_inv_sqrt(gram.sum(axis=0))
    return FinitePovm(dim, np.einsum("ij,xjk,kl->xil", w, gram, w))


class TestAcceptance:
    """The eleven acceptance criteria, in order."""

    def test_criterion_01_dimension_identity(self):
        with budget(1, 10) as info:
            checked = 0
            for d, n_max in ((2, 8), (3, 7)):
                for n in range(1, n_max + 1):
                    total = sum(dim_sym(lam) * dim_gl(lam, d)
                                for lam in enumerate_partitions(n, d))
                    assert total == d ** n, (d, n)
                    checked += 1
            info["detail"] = (f"dimension identity sum = d^n exact on "
                              f"{checked} (d, n) pairs")

    def test_criterion_02_label_distribution_oracle(self):
        with budget(2, 60) as info:
            worst = 0.0
            cases = 0
            for d, n_max in ((2, 6), (3, 4)):
                rng = make_rng(9000 + d)
                for idx in range(10):
                    r = idx % d + 1
                    rho = sample_density(d, r, rng)
                    for n in range(2, n_max + 1):
                        dist = label_distribution(rho, n)
                        oracle = tensor_oracle_distribution(rho, n)
                        for lam, p in oracle.items():
                            err = abs(dist[lam] - p)
                            worst = max(worst, err)
                            assert err <= 1e-7, (d, n, r, str(lam))
                        cases += 1
            info["detail"] = (f"streaming label law matches tensor oracle on "
                              f"{cases} cases, worst gap {worst:.2e} <= 1e-7")

    def test_criterion_03_joint_distribution_three_way(self):
        with budget(3, 300) as info:
            s = haar_unitary_set(2, 8, seed=0)
            eta = 0.3
            # Closed form against the dense tensor construction.
            worst_exact = 0.0
            for rho in (MIXED, TILTED):
                for n in (2, 3, 4):
                    direct = direct_joint_distribution(rho, s, eta, n)
                    oracle = tensor_joint_distribution(rho, s, eta, n)
                    for key, p in oracle.items():
                        err = abs(direct[key] - p)
                        worst_exact = max(worst_exact, err)
                        assert err <= 1e-8, key
            # Two-stage sampled pipeline against the exact joint law.
            n_samples = 100_000
            worst_z = 0.0
            for rho in (MIXED, TILTED):
                for n in (2, 3, 4):
                    joint = direct_joint_distribution(rho, s, eta, n)
                    engine = TomographyEngine(rho, s, eta, n)
                    rng = make_rng(1234 + n)
                    counts = final_label_counts(rho, n, n_samples, rng)
                    for lam in sorted(counts, key=str):
                        cond = engine.conditional_outcomes(lam)
                        draws = rng.multinomial(counts[lam], cond)
                        for x in range(9):
                            outcome = FAIL if x == 8 else x
                            p = joint.get((lam, outcome), 0.0)
                            f = draws[x] / n_samples
                            sigma = math.sqrt(max(p * (1 - p), 0.0)
                                              / n_samples)
                            tol = 4 * max(sigma, 1e-12)
                            gap = abs(f - p)
                            if sigma > 0:
                                worst_z = max(worst_z, gap / sigma)
                            assert gap <= tol, (str(lam), outcome)
            info["detail"] = (f"joint law: exact gap {worst_exact:.1e} <= "
                              f"1e-8, sampled pipeline worst z "
                              f"{worst_z:.2f} <= 4")

    def test_criterion_04_povm_validity(self):
        with budget(4, 600) as info:
            n, d, r, eta = 2, 2, 2, 0.4
            size = required_set_size(n, d, r, eta, "A")
            assert size == 6655
            passing = 0
            worst_eig = 0.0
            for seed in range(20):
                s = haar_unitary_set(d, size, seed=seed)
                report = check_membership(s, n, d, r, eta, "A")
                if not report.overall:
                    continue
                passing += 1
                for lam in enumerate_partitions(n, r):
                    povm = build_povm(lam, s, eta, membership=report)
                    low = float(np.linalg.eigvalsh(povm.fail_element).min())
                    worst_eig = min(worst_eig, low)
                    assert low >= -1e-9, (seed, str(lam))
            assert passing > 0
            # The single-identity set is not eta-good and its fail element
            # is far from positive.
            ident = UnitarySet(2, np.eye(2, dtype=complex)[None, :, :],
                               seed=0, count=1)
            assert not check_membership(ident, n, d, r, eta, "A").overall
            bad = build_povm((2,), ident, eta)
            assert np.linalg.eigvalsh(bad.fail_element).min() < -1e-3
            info["detail"] = (f"{passing}/20 seeds pass at |S|={size}; all "
                              f"fail elements PSD (min eig {worst_eig:.1e} "
                              f">= -1e-9); identity set rejected")

    def test_criterion_05_set_size_formula(self):
        with budget(5, 1) as info:
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                assert required_set_size(1, 2, 1, 0.5, "A") == 77
                ratios = []
                for n, d, r, eta, variant in ((3, 2, 1, 0.2, "A"),
                                              (3, 2, 1, 0.2, "B"),
                                              (2, 2, 2, 0.2, "A")):
                    small = required_set_size(n, d, r, eta, variant)
                    large = required_set_size(n, d, r, 2 * eta, variant)
                    ratio = small / large
                    ratios.append(ratio)
                    assert 3.9 <= ratio <= 4.1
            info["detail"] = (f"size formula pinned at 77; eta-halving "
                              f"ratios {', '.join(f'{x:.3f}' for x in ratios)}"
                              f" within [3.9, 4.1]")

    def test_criterion_06_infidelity_tail_bounds(self):
        with budget(6, 600) as info:
            cells = lemma_grid()
            assert len(cells) == 18
            worst_margin = math.inf
            for cell in cells:
                assert cell.membership_ok, (cell.r, cell.n)
                for delta, tail in cell.tails.items():
                    bound = cell.tail_bounds[delta]
                    worst_margin = min(worst_margin, bound - tail)
                    assert tail <= bound + 1e-12, (cell.r, cell.n, delta)
            info["detail"] = (f"exact infidelity tails under bounds on all "
                              f"18 cells x 3 deltas (min slack "
                              f"{worst_margin:.2f}, vacuous bounds pass)")

    def test_criterion_07_trace_moment_and_fail_bounds(self):
        with budget(7, 600) as info:
            cells = lemma_grid()
            worst_m2 = 0.0
            worst_fail = 0.0
            for cell in cells:
                assert cell.second_moment <= cell.second_moment_bound + 1e-12
                assert cell.fail_prob <= cell.fail_bound + 1e-12
                worst_m2 = max(worst_m2,
                               cell.second_moment / cell.second_moment_bound)
                worst_fail = max(worst_fail, cell.fail_prob / cell.fail_bound)
                assert cell.passed
            info["detail"] = (f"trace second moments and fail rates under "
                              f"bounds on all 18 cells (worst ratios "
                              f"{worst_m2:.3f}, {worst_fail:.3f})")

    def test_criterion_08_register_growth(self):
        with budget(8, 60) as info:
            # Absolute bound at every sampled trial (rank enters through
            # the exact-zero branching gate of low-rank spectra).
            for d in (2, 3):
                rng = make_rng(880 + d)
                for r in range(1, d + 1):
                    rho = sample_density(d, r, rng)
                    for n in (4, 6, 8):
                        for trial in range(10):
                            out = stream_sample(rho, n, make_rng(
                                7_700 + 997 * d + 101 * r + 13 * n + trial),
                                with_post_state=False)
                            assert out.max_register_dim <= d * (n + 1) ** (d * r)
                            if d == 2:
                                assert out.max_register_dim <= 2 * (n + 1)
            # Linear growth in n for a pure qubit input.
            ns = np.array([8, 16, 32, 64])
            dims = []
            for n in ns:
                out = stream_sample(PURE0, int(n), make_rng(4242),
                                    with_post_state=False)
                dims.append(out.max_register_dim)
            slope = np.polyfit(np.log(ns), np.log(dims), 1)[0]
            assert 0.9 <= slope <= 1.1
            info["detail"] = (f"register dims within d(n+1)^(dr) and 2(n+1) "
                              f"at d=2; pure-state growth exponent "
                              f"{slope:.3f} in [0.9, 1.1]")

    def test_criterion_09_measurement_executors(self):
        with budget(9, 300) as info:
            combos = [(2, 3), (2, 4), (3, 5), (3, 6), (4, 8),
                      (2, 8), (3, 8), (4, 6), (4, 7), (2, 5)]
            n_samples = 100_000
            worst_z = 0.0
            worst_perp = 0.0
            for i, (dim, k) in enumerate(combos):
                povm = random_povm(dim, k, seed=500 + i)
                rho = sample_density(dim, dim, make_rng(600 + i))
                target = born_distribution(rho, povm.elements)
                sigma = np.sqrt(np.maximum(target * (1 - target), 0.0)
                                / n_samples)
                tol = 4 * np.maximum(sigma, 1e-12)

                dil = naimark_unitary(povm)
                dil_probs = dilated_distribution(rho, dil)
                dil_freq = make_rng(700 + i).multinomial(
                    n_samples, dil_probs) / n_samples
                gap = np.abs(dil_freq - target)
                assert np.all(gap <= tol), ("naimark", dim, k)
                worst_z = max(worst_z, float((gap / np.maximum(sigma, 1e-12))
                                             .max()))

                rm = RecursiveMeasurer(povm, 3)
                rec_freq, perp_mass = self._hierarchical_frequencies(
                    rm, rho, n_samples, make_rng(800 + i))
                gap = np.abs(rec_freq - target)
                assert np.all(gap <= tol), ("recursive", dim, k)
                worst_z = max(worst_z, float((gap / np.maximum(sigma, 1e-12))
                                             .max()))
                assert perp_mass <= 1e-6, (dim, k)
                worst_perp = max(worst_perp, perp_mass)
            info["detail"] = (f"dilated and recursive samplers match the "
                              f"Born rule on 10 POVMs (worst z {worst_z:.2f}"
                              f" <= 4); orthogonal-residue mass "
                              f"{worst_perp:.1e} <= 1e-6")

    @staticmethod
    def _hierarchical_frequencies(rm, rho, n_samples, rng):
        """Counts from multinomial splitting down the refinement tree.

        Splitting a sample budget by the exact conditional law at each
        node is distributionally identical to running that many
        independent recursive walks. Returns frequencies and the exact
        orthogonal-residue mass accumulated along the tree.
        """
        nodes = {}
        for labels, elements, f_perp in rm.refined_sets():
            nodes[labels] = (elements, f_perp)
        k = rm.k
        total = rm.povm.outcomes
        counts = np.zeros(total)
        perp_mass = 0.0

        def recurse(path, state, n_here, offset, path_prob):
            nonlocal perp_mass
            elements, f_perp = nodes[path]
            p_perp = float(np.einsum("ij,ji->", f_perp, state).real)
            perp_mass += path_prob * max(p_perp, 0.0)
            size = elements.shape[0]
            if (path + (0,)) not in nodes:
                probs = np.einsum("xij,ji->x", elements, state).real
                probs = np.clip(probs, 0.0, None)
                probs = probs / probs.sum()
                if n_here > 0:
                    counts[offset:offset + size] += rng.multinomial(n_here,
                                                                    probs)
                return
            chunk = -(-size // k)
            child_probs = []
            child_ops = []
            for c in range(-(-size // chunk)):
                block = elements[c * chunk:(c + 1) * chunk]
                g = block.sum(axis=0)
                child_probs.append(float(np.einsum("ij,ji->", g,
                                                   state).real))
                child_ops.append(g)
            probs = np.clip(np.array(child_probs), 0.0, None)
            norm = probs.sum()
            draws = rng.multinomial(n_here, probs / norm) if n_here else \
                np.zeros(len(probs), dtype=int)
            for c, (g, p_c) in enumerate(zip(child_ops, probs)):
                if p_c <= 0.0:
                    continue
                root = psd_sqrt(g)
                child_state = root @ state @ root
                child_state = child_state / np.trace(child_state).real
                recurse(path + (c,), child_state, int(draws[c]),
                        offset + c * chunk, path_prob * p_c)

        recurse((), np.asarray(rho, dtype=complex), n_samples, 0, 1.0)
        return counts / n_samples, perp_mass

    def test_criterion_10_median_selection(self):
        with budget(10, 120) as info:
            # Constructed configurations: a strict majority inside the
            # eps-ball forces the winner inside 3 eps.
            rng = make_rng(1010)
            eps = 0.05
            for rep in range(1000):
                c = 2 + rep % 2
                truth = sample_density(2, 2, rng)
                estimates = []
                for _ in range(c + 1):
                    bump = rng.normal(scale=0.01, size=(2, 2))
                    cand = truth + (bump + bump.T) / 2
                    cand = cand / np.trace(cand).real
                    if distance("trace", truth, cand) >= eps:
                        cand = truth.copy()
                    estimates.append(cand)
                for j in range(c - 1):
                    far = sample_density(2, 1, rng)
                    estimates.append(0.8 * far + 0.2 * np.eye(2) / 2)
                order = rng.permutation(len(estimates))
                winner = median_select([estimates[int(o)] for o in order],
                                       eps, "trace")
                assert distance("trace", truth, winner) <= 3 * eps + 1e-12
            # Adversarial aggregation: 2c estimates, each independently
            # corrupted with probability 0.2; corrupted ones co-located
            # far from the truth and listed first so they win every tie.
            # The aggregate failure rate stays under (4 * 0.2)^c plus
            # Monte Carlo slack.
            reps = 10_000
            rates = {}
            adv = np.random.default_rng(99)
            for c in (2, 3):
                fails = 0
                for _ in range(reps):
                    n_bad = int(np.sum(adv.random(2 * c) < 0.2))
                    goods = [float(0.5 * eps * adv.random())
                             for _ in range(2 * c - n_bad)]
                    values = [10 * eps] * n_bad + goods
                    winner = median_select(values, eps,
                                           lambda a, b: abs(a - b))
                    if abs(winner) > 3 * eps:
                        fails += 1
                rate = fails / reps
                bound = 0.8 ** c
                slack = 3 * math.sqrt(bound * (1 - bound) / reps)
                assert rate <= bound + slack, (c, rate)
                rates[c] = rate
            info["detail"] = (f"3-eps guarantee on 1000 constructed configs;"
                              f" adversarial rates c=2: {rates[2]:.3f} <= "
                              f"0.64, c=3: {rates[3]:.3f} <= 0.512")

    def test_criterion_11_metric_inequalities(self):
        with budget(11, 30) as info:
            rng = make_rng(1111)
            worst = 0.0
            for _ in range(1000):
                d = int(rng.integers(2, 5))
                rho = sample_density(d, int(rng.integers(1, d + 1)), rng)
                sigma = sample_density(d, int(rng.integers(1, d + 1)), rng)
                f = fidelity(rho, sigma)
                t = distance("trace", rho, sigma)
                infid = 1.0 - f
                root_infid = 1.0 - math.sqrt(f)
                # Fuchs-van de Graaf, both sides.
                assert t - (1 - math.sqrt(f)) >= -1e-10
                assert math.sqrt(max(1 - f, 0.0)) - t >= -1e-10
                # Sandwich between infidelity and its square-root variant.
                assert infid - root_infid >= -1e-10
                assert 2 * root_infid - infid >= -1e-10
                worst = min(worst, t - (1 - math.sqrt(f)),
                            math.sqrt(max(1 - f, 0.0)) - t,
                            infid - root_infid, 2 * root_infid - infid)
            info["detail"] = (f"Fuchs-van de Graaf and infidelity sandwich "
                              f"on 1000 pairs, worst slack {worst:.1e} >= "
                              f"-1e-10")
