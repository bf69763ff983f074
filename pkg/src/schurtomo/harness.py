"""Experiment orchestration: configs, manifests, runs, verification suites.

Determinism contract: every random object in an experiment is derived
from the master seed. Trial i uses child seed splitmix64(master_seed, i);
the input state and the unitary set use two reserved indices far above
any realistic trial count. Replaying a manifest therefore reproduces the
JSONL output byte for byte, regardless of worker count.
"""
from __future__ import annotations

import itertools
import tempfile
import warnings
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .linalg import (child_seed, make_rng, psd_sqrt, sample_density,
                     sample_haar_batch)
from .measurement import (FinitePovm, RecursiveMeasurer, born_distribution,
                          dilated_distribution, naimark_unitary)
from .partitions import (Partition, add_box, dim_gl, dim_sym,
                         enumerate_partitions, normalized_diag, remove_box,
                         weak_composition_count)
from .povm import (UnitarySet, build_povm, check_membership, haar_unitary_set,
                   load_unitary_set, required_set_size, save_unitary_set,
                   twirl_scalar)
from .schur_weyl import (cg_isometries, irrep_matrix, isotypic_projector,
                         schur_polynomial)
from .stream import (distribution_csv, label_distribution, physical_step_check,
                     stream_sample, tensor_oracle_distribution)
from .tomography import (TomographyEngine, TrialResult, batch_stats,
                         direct_joint_distribution, distance, fidelity,
                         median_select, tensor_joint_distribution,
                         trial_record)

STATE_SEED_INDEX = 1 << 48
SET_SEED_INDEX = (1 << 48) + 1
SEED_DERIVATION = "splitmix64(master_seed, trial_index)"

_MODES = ("run", "dist", "povm-check", "verify")
_METRICS = ("infidelity", "trace")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    """All parameters of one experiment; validated on construction."""
    d: int = 2
    r: int = 1
    n: int = 4
    eta: float = 0.25
    set_size: int | str = "theorem1"
    trials: int = 1
    metric: str = "infidelity"
    thresholds: tuple[float, ...] = (0.1, 0.2, 0.5)
    master_seed: int = 0
    mode: str = "run"

    def __post_init__(self):
        if not 1 <= self.r <= self.d <= 4:
            raise ValueError(f"need 1 <= r <= d <= 4, got r={self.r}, d={self.d}")
        if self.n < 1:
            raise ValueError("need at least one copy")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta!r}")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.metric not in _METRICS:
            raise ValueError(f"metric must be one of {_METRICS}, got {self.metric!r}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if isinstance(self.set_size, str):
            if self.set_size != "theorem1":
                raise ValueError(f'set_size must be an integer or "theorem1", got {self.set_size!r}')
        elif self.set_size < 1:
            raise ValueError("set_size must be positive")
        if not self.thresholds or any(t <= 0 for t in self.thresholds):
            raise ValueError("thresholds must be a non-empty list of positive reals")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def resolved_set_size(self) -> int:
        if self.set_size == "theorem1":
            return required_set_size(self.n, self.d, self.r, self.eta, "A")
        return int(self.set_size)


_INT_KEYS = ("d", "r", "n", "trials", "master_seed")


def config_items(config: ExperimentConfig) -> dict[str, str]:
    """Flat key=value representation; parse_config inverts it exactly."""
    return {
        "d": str(config.d), "r": str(config.r), "n": str(config.n),
        "eta": repr(config.eta),
        "set_size": str(config.set_size),
        "trials": str(config.trials),
        "metric": config.metric,
        "thresholds": ",".join(repr(t) for t in config.thresholds),
        "master_seed": str(config.master_seed),
        "mode": config.mode,
    }


def parse_config(items: dict[str, str],
                 overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Build a config from string key=value pairs; overrides win.

    Unknown keys are ignored so a manifest (which carries extra keys)
    parses with the same function as a plain config file.
    """
    merged = dict(items)
    merged.update(overrides or {})
    kwargs: dict = {}
    for key in _INT_KEYS:
        if key in merged:
            kwargs[key] = int(merged[key])
    if "eta" in merged:
        kwargs["eta"] = float(merged["eta"])
    if "set_size" in merged:
        raw = merged["set_size"]
        kwargs["set_size"] = raw if raw == "theorem1" else int(raw)
    if "metric" in merged:
        kwargs["metric"] = merged["metric"]
    if "mode" in merged:
        kwargs["mode"] = merged["mode"]
    if "thresholds" in merged:
        kwargs["thresholds"] = tuple(float(t) for t in merged["thresholds"].split(","))
    return ExperimentConfig(**kwargs)


def load_kv_file(path: str | Path) -> dict[str, str]:
    """Read a flat UTF-8 key=value file, skipping blanks and # comments."""
    items: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, _, value = line.partition("=")
        items[key.strip()] = value.strip()
    return items


def write_kv_file(path: str | Path, items: dict[str, str]) -> None:
    text = "".join(f"{k}={v}\n" for k, v in items.items())
    Path(path).write_text(text, encoding="utf-8")


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run bit for bit."""
    config: ExperimentConfig
    version: str
    state_seed: int
    set_seed: int
    resolved_set_size: int
    membership_overall: bool
    wall_clock_s: float

    def items(self) -> dict[str, str]:
        out = dict(config_items(self.config))
        out.update({
            "version": self.version,
            "seed_derivation": SEED_DERIVATION,
            "state_seed": str(self.state_seed),
            "set_seed": str(self.set_seed),
            "resolved_set_size": str(self.resolved_set_size),
            "membership_overall": "true" if self.membership_overall else "false",
            "wall_clock_s": _fmt(self.wall_clock_s),
        })
        return out


def write_manifest(path: str | Path, manifest: RunManifest) -> None:
    write_kv_file(path, manifest.items())


def read_manifest(path: str | Path) -> ExperimentConfig:
    """Recover the config echoed into a manifest (extra keys ignored)."""
    return parse_config(load_kv_file(path))


def experiment_inputs(config: ExperimentConfig
                      ) -> tuple[np.ndarray, UnitarySet, int, int]:
    """Derive the input state and unitary set from the master seed."""
    state_seed = child_seed(config.master_seed, STATE_SEED_INDEX)
    set_seed = child_seed(config.master_seed, SET_SEED_INDEX)
    rho = sample_density(config.d, config.r, make_rng(state_seed))
    s = haar_unitary_set(config.d, config.resolved_set_size(), set_seed)
    return rho, s, state_seed, set_seed


def _summary_line(stats) -> str:
    pac = ", ".join(f'"{float(t)!r}": {_fmt(rate)}' for t, rate in stats.rates.items())
    return (f'{{"summary": {{"trials": {stats.trials}, "metric": "{stats.metric}", '
            f'"fail_rate": {_fmt(stats.fail_rate)}, "smd": {_fmt(stats.smd)}, '
            f'"pac": {{{pac}}}}}}}')


def run_experiment(config: ExperimentConfig, out_path: str | Path,
                   manifest_path: str | Path | None = None,
                   workers: int = 1) -> RunManifest:
    """Execute one experiment and persist results plus a manifest.

    mode=run writes one JSONL record per trial plus a trailing summary
    record; mode=dist writes the exact final-label distribution as CSV;
    mode=povm-check writes the membership report; mode=verify writes the
    full verification suite report. Identical configs produce identical
    result bytes for any worker count.
    """
    start = time.monotonic()
    out_path = Path(out_path)
    if manifest_path is None:
        manifest_path = out_path.with_name(out_path.name + ".manifest")

    if config.mode == "verify":
        report = verify_suite("all")
        out_path.write_text("\n".join(report.format_lines()) + "\n", encoding="utf-8")
        manifest = RunManifest(config, __version__, 0, 0, 0, report.passed,
                               time.monotonic() - start)
        write_manifest(manifest_path, manifest)
        return manifest

    rho, s, state_seed, set_seed = experiment_inputs(config)
    membership = check_membership(s, config.n, config.d, config.r, config.eta, "A")

    if config.mode == "dist":
        dist = label_distribution(rho, config.n)
        out_path.write_text(distribution_csv(dist), encoding="utf-8")
    elif config.mode == "povm-check":
        lines = [f"variant=A overall={'pass' if membership.overall else 'fail'}"]
        for (lam, mu), (lo, hi, ok) in sorted(membership.per_pair.items()):
            lines.append(f"pair=({lam})->({mu}) min_ratio={_fmt(lo)} "
                         f"max_ratio={_fmt(hi)} {'pass' if ok else 'fail'}")
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        engine = TomographyEngine(rho, s, config.eta, config.n, membership)

        def one_trial(index: int) -> TrialResult:
            seed = child_seed(config.master_seed, index)
            return engine.trial(make_rng(seed), seed=seed)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one_trial, range(config.trials)))
        else:
            results = [one_trial(i) for i in range(config.trials)]
        stats = batch_stats(results, list(config.thresholds), config.metric)
        lines = [trial_record(res, i) for i, res in enumerate(results)]
        lines.append(_summary_line(stats))
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest = RunManifest(config, __version__, state_seed, set_seed,
                           s.count, membership.overall, time.monotonic() - start)
    write_manifest(manifest_path, manifest)
    return manifest


def replay(manifest_path: str | Path, out_path: str | Path,
           workers: int = 1) -> RunManifest:
    """Re-run an experiment from its manifest; output bytes must match."""
    return run_experiment(read_manifest(manifest_path), out_path, workers=workers)


# ----------------------------------------------------------------------
# Concentration-bound grid shared by the verification suite and the
# acceptance tests: exact tail and second-moment computations against
# the proven finite-size bounds, on verified sets.
# ----------------------------------------------------------------------

GRID_SET_SIZE = 20_000
GRID_ETA = 0.25
GRID_SEED = 20_260_819
GRID_NS = tuple(range(2, 11))
GRID_RS = (1, 2)
GRID_DELTAS = (0.1, 0.3, 0.5)


@dataclass(frozen=True)
class GridCell:
    """Exact tail/moment numbers vs proven bounds for one (r, n) cell."""
    r: int
    n: int
    membership_ok: bool
    fail_prob: float
    fail_bound: float
    second_moment: float
    second_moment_bound: float
    tails: dict[float, float]
    tail_bounds: dict[float, float]
    passed: bool


def _batch_infidelity(rho: np.ndarray, ests: np.ndarray) -> np.ndarray:
    root = psd_sqrt(rho)
    inner = root @ ests @ root
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    fid = np.square(np.sqrt(w).sum(axis=-1))
    return 1.0 - np.clip(fid, 0.0, 1.0)


def _batch_trace_dist(rho: np.ndarray, ests: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(ests - rho)
    return 0.5 * np.abs(w).sum(axis=-1)


_GRID_CACHE: dict[tuple, list[GridCell]] = {}


def lemma_grid(set_size: int = GRID_SET_SIZE, eta: float = GRID_ETA,
               seed: int = GRID_SEED, ns: tuple[int, ...] = GRID_NS,
               rs: tuple[int, ...] = GRID_RS,
               deltas: tuple[float, ...] = GRID_DELTAS) -> list[GridCell]:
    """Exact concentration checks for d=2 over the (r, n) grid.

    For each cell a single Haar set is verified as eta-good (class B,
    which implies class A), then the exact joint outcome distribution
    yields Pr[fail], the success-conditioned second moment of the trace
    distance, and infidelity tail masses. Each is compared against its
    proven finite-size bound; a bound above one is vacuously satisfied
    and still counts, matching the statements being checked.
    """
    key = (set_size, eta, seed, tuple(ns), tuple(rs), tuple(deltas))
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]
    d = 2
    s = haar_unitary_set(d, set_size, seed)
    states = {1: sample_density(d, 1, make_rng(11)),
              2: sample_density(d, 2, make_rng(12))}
    maximally_mixed = np.eye(d, dtype=complex) / d
    cells: list[GridCell] = []
    for r in rs:
        rho = states[r]
        for n in ns:
            membership = check_membership(s, n, d, r, eta, variant="B")
            engine = TomographyEngine(rho, s, eta, n, membership)
            fail_infid = 1.0 - fidelity(rho, maximally_mixed)
            tails = {delta: 0.0 for delta in deltas}
            fail_prob = 0.0
            moment = 0.0
            success = 0.0
            for lam, p_lam in label_distribution(rho, n).items():
                if p_lam <= 0.0:
                    continue
                weights = engine.outcome_weights(lam)
                lam_bar = normalized_diag(lam, d)
                ests = s.members @ lam_bar @ s.members.conj().transpose(0, 2, 1)
                infid = _batch_infidelity(rho, ests)
                tdist = _batch_trace_dist(rho, ests)
                body, tail_w = weights[:-1], float(weights[-1])
                for delta in deltas:
                    mass = float(body[infid >= delta / 2].sum())
                    if fail_infid >= delta / 2:
                        mass += tail_w
                    tails[delta] += p_lam * mass
                moment += p_lam * float((body * np.square(tdist)).sum())
                success += p_lam * float(body.sum())
                fail_prob += p_lam * tail_w
            second_moment = moment / success
            fail_bound = 2 * eta / (1 + eta)
            second_bound = 8 * r * (d + eta * n) / ((1 - eta) * n)
            tail_bounds = {delta: (2 * eta + (n + 1) ** (3 * d * r)
                                   * (1 - delta / 2) ** n) / (1 + eta)
                           for delta in deltas}
            passed = (membership.overall
                      and fail_prob <= fail_bound + 1e-12
                      and second_moment <= second_bound + 1e-12
                      and all(tails[delta] <= tail_bounds[delta] + 1e-12
                              for delta in deltas))
            cells.append(GridCell(r, n, membership.overall, fail_prob,
                                  fail_bound, second_moment, second_bound,
                                  tails, tail_bounds, passed))
    _GRID_CACHE[key] = cells
    return cells


# ----------------------------------------------------------------------
# Verification suites
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: str
    bound: str
    passed: bool


@dataclass(frozen=True)
class VerifyReport:
    suite: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status} {self.suite}/{c.name}: {c.measured} ({c.bound})")
        return lines


class _Checks:
    def __init__(self):
        self.results: list[CheckResult] = []

    def add(self, name: str, measured: float | str, bound: str, passed: bool) -> None:
        shown = measured if isinstance(measured, str) else _fmt(measured)
        self.results.append(CheckResult(name, shown, bound, bool(passed)))


def _verify_partitions() -> list[CheckResult]:
    ck = _Checks()
    worst = 0
    for d, n_max in ((2, 8), (3, 7)):
        for n in range(1, n_max + 1):
            total = sum(dim_sym(lam) * dim_gl(lam, d)
                        for lam in enumerate_partitions(n, d))
            worst = max(worst, abs(total - d ** n))
    ck.add("dimension_identity", worst, "exact (0) for d=2 n<=8, d=3 n<=7", worst == 0)

    def paths(lam: Partition) -> int:
        if lam.n == 0:
            return 1
        total = 0
        for i in range(lam.rows):
            below = lam.parts[i + 1] if i + 1 < lam.rows else 0
            if lam.parts[i] - 1 >= below:
                shrunk = list(lam.parts)
                shrunk[i] -= 1
                total += paths(Partition(tuple(shrunk)))
        return total

    bad = [lam for lam in enumerate_partitions(6, 6) if paths(lam) != dim_sym(lam)]
    ck.add("young_lattice_paths", len(bad), "0 mismatches vs hook counts, n=6", not bad)

    grid_ok = all(weak_composition_count(n, k) ==
                  sum(1 for c in itertools.product(range(n + 1), repeat=k)
                      if sum(c) == n)
                  for n in range(0, 5) for k in range(1, 4))
    ck.add("weak_compositions", weak_composition_count(4, 2), "C(5,1)=5 at (4,2)",
           weak_composition_count(4, 2) == 5 and grid_ok)

    lam = Partition((3, 1))

    def one_box_above(mu: Partition) -> bool:
        padded = lam.parts + (0,) * (mu.rows - lam.rows)
        diffs = [a - b for a, b in zip(mu.parts, padded)]
        return sum(diffs) == 1 and all(dx in (0, 1) for dx in diffs)

    up_down = all(one_box_above(mu) for mu in add_box(lam, 4))
    ck.add("lattice_duality", "add/remove consistent" if up_down else "mismatch",
           "children differ by one box; canonical parent drops the last part",
           up_down and remove_box(Partition((3, 2))) == Partition((3, 1)))
    return ck.results


def _verify_repr() -> list[CheckResult]:
    ck = _Checks()
    rng = make_rng(101)
    worst = 0.0
    for lam in enumerate_partitions(4, 2):
        for u in sample_haar_batch(2, 5, rng):
            q = irrep_matrix(lam, u)
            s_val = schur_polynomial(lam, np.linalg.eigvals(u))
            worst = max(worst, abs(np.trace(q.mat) - s_val))
    ck.add("character_consistency", worst, "<= 1e-8", worst <= 1e-8)

    lam = Partition((2, 1))
    u, v = sample_haar_batch(2, 2, rng)
    qu, qv, quv = (irrep_matrix(lam, m).mat for m in (u, v, u @ v))
    dev = float(np.max(np.abs(quv - qu @ qv)))
    ck.add("homomorphism", dev, "<= 1e-8", dev <= 1e-8)

    total = sum(isotypic_projector(lam, 4, 2)
                for lam in enumerate_partitions(4, 2))
    dev = float(np.max(np.abs(total - np.eye(16))))
    ck.add("projector_completeness", dev, "<= 1e-10", dev <= 1e-10)

    a = sample_density(2, 2, rng)
    b = sample_density(2, 2, rng)
    lam = Partition((3, 1))
    lhs = np.trace(irrep_matrix(lam, a).mat @ irrep_matrix(lam, b).mat)
    rhs = schur_polynomial(lam, np.linalg.eigvals(a @ b))
    dev = abs(lhs - rhs)
    ck.add("product_character", dev, "<= 1e-8", dev <= 1e-8)

    cg = cg_isometries(Partition((2, 1)), 2)
    blocks = sorted(mu for mu, _ in cg.blocks)
    ck.add("cg_block_structure", " ; ".join(str(m) for m in blocks),
           "(2,1)+box = (2,2),(3,1)",
           blocks == sorted([Partition((2, 2)), Partition((3, 1))]))

    lam = Partition((3, 1))
    q = irrep_matrix(lam, normalized_diag(lam, 2)).mat
    low = float(np.linalg.eigvalsh((q + q.conj().T) / 2)[0])
    ck.add("spectral_positivity", low, ">= -1e-8", low >= -1e-8)
    return ck.results


def _verify_stream() -> list[CheckResult]:
    ck = _Checks()
    rho = np.eye(2, dtype=complex) / 2
    step = physical_step_check(Partition((2,)), rho, 2)
    expected = {Partition((3,)): 2 / 3, Partition((2, 1)): 1 / 3}
    dev = max(abs(measured - expected[mu]) for mu, measured, _ in step.block_probs)
    ck.add("physical_step", dev, "branch probs (2/3, 1/3) within 1e-9",
           dev <= 1e-9 and step.max_state_residual <= 1e-7)

    rng = make_rng(7)
    rho2 = sample_density(2, 2, rng)
    exact = label_distribution(rho2, 5)
    oracle = tensor_oracle_distribution(rho2, 5)
    dev = max(abs(exact[lam] - oracle[lam]) for lam in exact)
    ck.add("label_oracle", dev, "<= 1e-9 at d=2 n=5", dev <= 1e-9)

    n = 8
    regs = [stream_sample(rho2, n, make_rng(child_seed(3, i)),
                          with_post_state=False).max_register_dim
            for i in range(100)]
    bound = 2 * (n + 1)
    ck.add("register_bound", max(regs), f"<= 2(n+1) = {bound}", max(regs) <= bound)

    psi = np.zeros((2, 2), dtype=complex)
    psi[0, 0] = 1.0
    pure_reg = stream_sample(psi, n, make_rng(1), with_post_state=False).max_register_dim
    ck.add("pure_state_register", pure_reg, f"= {bound} for pure input",
           pure_reg == bound)
    return ck.results


def _verify_povm() -> list[CheckResult]:
    ck = _Checks()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sizes = (required_set_size(1, 2, 1, 0.5, "A"),
                 required_set_size(2, 2, 2, 0.4, "A"),
                 required_set_size(1, 2, 1, 0.5, "B"))
    ck.add("set_size_formula", ",".join(map(str, sizes)), "= 77,6655,254",
           sizes == (77, 6655, 254))

    c = twirl_scalar(Partition((2,)), Partition((2,)), 2)
    ck.add("twirl_scalar", c, "= sλ(diag)/dim ratio 1/3 at ((2),(2)) d=2",
           abs(c - 1 / 3) <= 1e-12)

    s = haar_unitary_set(2, 40, seed=5)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "set.uset"
        save_unitary_set(path, s)
        loaded = load_unitary_set(path)
    exact = (loaded.seed == s.seed and loaded.d == s.d
             and np.array_equal(loaded.members, s.members))
    ck.add("set_round_trip", "bit-exact" if exact else "mismatch",
           "save/load preserves every byte", exact)

    size = required_set_size(2, 2, 2, 0.4, "A")
    s2 = haar_unitary_set(2, size, seed=0)
    membership = check_membership(s2, 2, 2, 2, 0.4, "A")
    worst_fail = 0.0
    if membership.overall:
        for lam in enumerate_partitions(2, 2):
            povm = build_povm(lam, s2, 0.4, membership)
            worst_fail = min(worst_fail,
                             float(np.linalg.eigvalsh(povm.fail_element)[0]))
    ck.add("membership_and_validity", worst_fail,
           f"fail-element min eig >= -1e-9 on a passing set of {size}",
           membership.overall and worst_fail >= -1e-9)

    trivial = UnitarySet(2, np.eye(2, dtype=complex)[None], seed=0, count=1)
    povm = build_povm(Partition((2,)), trivial, 0.0)
    low = float(np.linalg.eigvalsh(povm.fail_element)[0])
    ck.add("identity_counterexample", low,
           "single-unitary set yields a negative fail element", low < -1e-3)
    return ck.results


def _verify_tomo() -> list[CheckResult]:
    ck = _Checks()
    rho = np.diag([0.75, 0.25]).astype(complex)
    s = haar_unitary_set(2, 4, seed=0)
    direct = direct_joint_distribution(rho, s, 0.2, 3)
    oracle = tensor_joint_distribution(rho, s, 0.2, 3)
    dev = max(abs(direct[key] - oracle[key]) for key in direct)
    ck.add("joint_oracle", dev, "<= 1e-9 at d=2 n=3 |S|=4", dev <= 1e-9)

    rng = make_rng(23)
    worst = 0.0
    for _ in range(200):
        a = sample_density(3, 3, rng)
        b = sample_density(3, 3, rng)
        fid = fidelity(a, b)
        tr = distance("trace", a, b)
        worst = min(worst, tr - (1 - np.sqrt(fid)), np.sqrt(1 - fid) - tr,
                    (1 - fid) - (1 - np.sqrt(fid)), 2 * (1 - np.sqrt(fid)) - (1 - fid))
    ck.add("metric_inequalities", worst, "slack >= -1e-10", worst >= -1e-10)

    eps = 0.05
    center = np.diag([0.6, 0.4]).astype(complex)
    cluster = [np.diag([0.6 + off, 0.4 - off]).astype(complex)
               for off in (-0.02, 0.0, 0.02)]
    outlier = np.diag([0.95, 0.05]).astype(complex)
    pick = median_select(cluster + [outlier], eps, "trace")
    within = distance("trace", pick, center) <= 3 * eps
    ck.add("median_mechanism", distance("trace", pick, center),
           "selected estimate within 3*eps", within)

    cells = lemma_grid()
    worst_margin = min(min(cell.fail_bound - cell.fail_prob,
                           cell.second_moment_bound - cell.second_moment)
                       for cell in cells)
    ok = all(cell.passed for cell in cells)
    ck.add("concentration_grid", worst_margin,
           "exact tails/moments within proven bounds on all cells", ok)
    return ck.results


def _verify_exec() -> list[CheckResult]:
    ck = _Checks()
    angles = [0.0, 2 * np.pi / 3, 4 * np.pi / 3]
    els = []
    for theta in angles:
        v = np.array([np.cos(theta / 2), np.sin(theta / 2)], dtype=complex)
        els.append((2 / 3) * np.outer(v, v.conj()))
    trine = FinitePovm(2, np.stack(els))
    mixed = np.eye(2, dtype=complex) / 2
    dist = dilated_distribution(mixed, naimark_unitary(trine))
    dev = float(np.max(np.abs(dist - 1 / 3)))
    ck.add("trine_uniformity", dev, "ancilla marginal = 1/3 each, <= 1e-12",
           dev <= 1e-12)

    plus = np.full((2, 2), 0.5, dtype=complex)
    proj = FinitePovm(2, np.stack([np.diag([1.0, 0j]), np.diag([0j, 1.0])]))
    dist = dilated_distribution(plus, naimark_unitary(proj))
    dev = float(np.max(np.abs(dist - 0.5)))
    ck.add("projective_plus", dev, "= (1/2, 1/2) within 1e-12", dev <= 1e-12)

    rng = make_rng(31)
    d_sys, k_out = 3, 5
    iso = sample_haar_batch(d_sys * k_out, 1, rng)[0][:, :d_sys]
    els = np.stack([b.conj().T @ b for b in iso.reshape(k_out, d_sys, d_sys)])
    povm = FinitePovm(d_sys, els)
    rho = sample_density(d_sys, 2, rng)
    born = born_distribution(rho, povm.elements)
    dil = dilated_distribution(rho, naimark_unitary(povm))
    dev = float(np.max(np.abs(born - dil)))
    ck.add("dilation_born", dev, "<= 1e-10", dev <= 1e-10)

    measurer = RecursiveMeasurer(povm, 2)
    worst_eig, worst_sum = 0.0, 0.0
    for _, elements, f_perp in measurer.refined_sets():
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(elements).min()))
        total = elements.sum(axis=0) + f_perp
        worst_sum = max(worst_sum, float(np.max(np.abs(total - np.eye(d_sys)))))
    ck.add("refinement_invariants", f"min_eig={_fmt(worst_eig)} sum_dev={_fmt(worst_sum)}",
           "positivity >= -1e-9, completeness within 1e-9",
           worst_eig >= -1e-9 and worst_sum <= 1e-9)

    shots = 20_000
    counts = np.bincount([measurer.measure(rho, rng) for _ in range(shots)],
                         minlength=k_out) / shots
    sig = np.sqrt(born * (1 - born) / shots)
    z = float(np.max(np.abs(counts - born) / sig))
    ck.add("recursive_sampling", z, "worst z-score <= 5 at 2e4 shots", z <= 5.0)
    return ck.results


_SUITES = {
    "partitions": _verify_partitions,
    "repr": _verify_repr,
    "stream": _verify_stream,
    "povm": _verify_povm,
    "tomo": _verify_tomo,
    "exec": _verify_exec,
}


def verify_suite(name: str) -> VerifyReport:
    """Run one module's invariant checks (or all of them) at desk scale."""
    if name == "all":
        checks: list[CheckResult] = []
        for suite, fn in _SUITES.items():
            checks.extend(CheckResult(f"{suite}.{c.name}", c.measured, c.bound,
                                      c.passed) for c in fn())
        return VerifyReport("all", tuple(checks))
    if name not in _SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from "
                         f"{', '.join([*_SUITES, 'all'])}")
    return VerifyReport(name, tuple(_SUITES[name]()))
