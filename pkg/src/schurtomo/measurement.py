"""Executing finite POVMs: Naimark dilation and recursive refinement.

Two independent ways to realize an arbitrary finite POVM as an actual
measurement process. The dilation route embeds the state into
system (x) ancilla, applies one unitary, and reads the ancilla in the
computational basis. The recursive route repeatedly measures a coarse
k-outcome POVM and refines inside the observed chunk, so the largest
measurement ever performed has k+1 outcomes. Both must reproduce Born
statistics; they cross-check each other and the main pipeline's
block-level families.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log2

import numpy as np

from .linalg import (NumericalIntegrityError, herm_eigendecompose, psd_sqrt,
                     pseudo_inv_sqrt)

_PERP = -1


@dataclass(frozen=True)
class FinitePovm:
    """A finite POVM: PSD elements on C^dim summing to identity."""
    dim: int
    elements: np.ndarray  # (outcomes, dim, dim)

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.ndim != 3 or el.shape[1:] != (self.dim, self.dim):
            raise ValueError(f"element array shape {el.shape} does not match dim={self.dim}")
        scale = max(float(np.max(np.abs(el))), 1.0)
        if float(np.max(np.abs(el - el.conj().transpose(0, 2, 1)))) > 1e-9 * scale:
            raise ValueError("POVM elements must be Hermitian")
        for idx in range(el.shape[0]):
            low = float(np.linalg.eigvalsh(el[idx])[0])
            if low < -1e-9 * scale:
                raise ValueError(f"element {idx} has negative eigenvalue {low:.2e}")
        total = el.sum(axis=0)
        if float(np.max(np.abs(total - np.eye(self.dim)))) > 1e-8:
            raise ValueError("POVM elements do not sum to identity")
        object.__setattr__(self, "elements", el)

    @property
    def outcomes(self) -> int:
        return self.elements.shape[0]


def born_distribution(rho: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Pr[x] = Tr[E_x rho] for a stack of measurement operators."""
    return np.einsum('xij,ji->x', np.asarray(elements, complex),
                     np.asarray(rho, complex)).real


@dataclass(frozen=True)
class Dilation:
    """Naimark dilation: one unitary on system (x) ancilla plus an anchor."""
    unitary: np.ndarray
    anchor: int
    ancilla_dim: int

    @property
    def ancilla_qubits(self) -> int:
        """Qubits needed to hold the ancilla register."""
        return max(1, ceil(log2(self.ancilla_dim))) if self.ancilla_dim > 1 else 0


def naimark_unitary(povm: FinitePovm, x0: int = 0) -> Dilation:
    """Extend the isometry V = sum_x sqrt(E_x) (x) |x> to a unitary.

    Index convention: composite basis |i, x> at row i*K + x. The columns
    of the output at ancilla index x0 are the columns of V; the rest are
    a deterministic Gram-Schmidt completion over standard basis vectors
    in index order. Measuring the ancilla after applying the unitary to
    rho (x) |x0><x0| reproduces Born statistics of the POVM.
    """
    d, k = povm.dim, povm.outcomes
    if not 0 <= x0 < k:
        raise ValueError(f"anchor {x0} out of range for {k} outcomes")
    v = np.zeros((d * k, d), dtype=complex)
    for x in range(k):
        root = psd_sqrt(povm.elements[x])
        for i in range(d):
            v[i * k + x, :] = root[i, :]
    basis = [v[:, j] for j in range(d)]
    for e_idx in range(d * k):
        if len(basis) == d * k:
            break
        cand = np.zeros(d * k, dtype=complex)
        cand[e_idx] = 1.0
        for b in basis:
            cand = cand - b * (b.conj() @ cand)
        norm = float(np.linalg.norm(cand))
        if norm > 1e-8:
            basis.append(cand / norm)
    if len(basis) != d * k:
        raise NumericalIntegrityError("orthonormal completion came up short")
    u = np.zeros((d * k, d * k), dtype=complex)
    for j in range(d):
        u[:, j * k + x0] = v[:, j]
    fill = iter(basis[d:])
    for j in range(d):
        for x in range(k):
            if x != x0:
                u[:, j * k + x] = next(fill)
    if float(np.max(np.abs(u.conj().T @ u - np.eye(d * k)))) > 1e-9:
        raise NumericalIntegrityError("dilation unitary fails unitarity")
    return Dilation(u, x0, k)


def dilated_distribution(rho: np.ndarray, dilation: Dilation) -> np.ndarray:
    """Ancilla computational-basis distribution after the dilation unitary."""
    k = dilation.ancilla_dim
    dk = dilation.unitary.shape[0]
    d = dk // k
    if rho.shape != (d, d):
        raise ValueError(f"state shape {rho.shape} does not match dilation on dim {d}")
    cols = dilation.unitary[:, [j * k + dilation.anchor for j in range(d)]]
    diag = np.einsum('aj,jk,ak->a', cols, np.asarray(rho, complex), cols.conj()).real
    return diag.reshape(d, k).sum(axis=0)


def dilated_measure(rho: np.ndarray, dilation: Dilation,
                    rng: np.random.Generator) -> int:
    """Sample one outcome from the dilated measurement."""
    probs = np.clip(dilated_distribution(rho, dilation), 0.0, None)
    return int(rng.choice(len(probs), p=probs / probs.sum()))


class RecursiveMeasurer:
    """Coarse-then-refine measurement of a finite POVM with branching k.

    The operator tree (chunk sums G_i, their square roots, and refined
    elements) depends only on the POVM, so it is built eagerly once;
    measuring a state just walks the tree. Every node's refined family
    is a POVM up to the projector complement F_perp of range(G_i), whose
    outcome probability is provably zero.
    """

    def __init__(self, povm: FinitePovm, k: int):
        if k < 2:
            raise ValueError("branching factor must be at least 2")
        self.povm = povm
        self.k = k
        self.nodes: dict[tuple[int, ...], dict] = {}
        self._build((), povm.elements, list(range(povm.outcomes)))

    def _build(self, path: tuple[int, ...], elements: np.ndarray,
               labels: list[int]) -> None:
        count = len(labels)
        node: dict = {"labels": labels, "elements": elements}
        eye = np.eye(self.povm.dim, dtype=complex)
        f_perp = eye - elements.sum(axis=0)
        f_perp = (f_perp + f_perp.conj().T) / 2
        node["f_perp"] = f_perp
        self.nodes[path] = node
        if count <= self.k:
            return
        size = ceil(count / self.k)
        chunks = [list(range(start, min(start + size, count)))
                  for start in range(0, count, size)]
        node["chunks"] = chunks
        node["coarse"] = []
        for ci, chunk in enumerate(chunks):
            g = elements[chunk].sum(axis=0)
            g = (g + g.conj().T) / 2
            root = psd_sqrt(g)
            inv_root = pseudo_inv_sqrt(g)
            refined = np.stack([inv_root @ elements[x] @ inv_root for x in chunk])
            refined = (refined + refined.conj().transpose(0, 2, 1)) / 2
            node["coarse"].append({"g": g, "root": root})
            self._build(path + (ci,), refined, [labels[x] for x in chunk])

    def refined_sets(self):
        """Yield (path, elements, f_perp) for every node of the tree."""
        for path, node in sorted(self.nodes.items()):
            yield path, node["elements"], node["f_perp"]

    def measure(self, rho: np.ndarray, rng: np.random.Generator) -> int:
        """Sample one outcome label by walking the coarse/refine tree."""
        state = np.asarray(rho, dtype=complex)
        path: tuple[int, ...] = ()
        while True:
            node = self.nodes[path]
            if "chunks" not in node:
                probs = born_distribution(state, node["elements"])
                p_perp = 1.0 - float(probs.sum())
                idx = self._draw(probs, p_perp, rng, path)
                return node["labels"][idx]
            coarse = node["coarse"]
            probs = np.array([float(np.einsum('ij,ji->', c["g"], state).real)
                              for c in coarse])
            p_perp = 1.0 - float(probs.sum())
            idx = self._draw(probs, p_perp, rng, path)
            root = coarse[idx]["root"]
            state = root @ state @ root
            tr = float(np.trace(state).real)
            if tr <= 0.0:
                raise NumericalIntegrityError(
                    f"post-measurement state lost its trace at node {path}")
            state = state / tr
            path = path + (idx,)

    @staticmethod
    def _draw(probs: np.ndarray, p_perp: float, rng: np.random.Generator,
              path: tuple[int, ...]) -> int:
        if p_perp > 1e-8:
            raise NumericalIntegrityError(
                f"orthogonal-residue probability {p_perp:.2e} at node {path}")
        full = np.clip(np.append(probs, max(p_perp, 0.0)), 0.0, None)
        idx = int(rng.choice(len(full), p=full / full.sum()))
        if idx == len(full) - 1:
            raise NumericalIntegrityError(
                f"sampled the provably-null orthogonal outcome at node {path}")
        return idx


def recursive_measure(rho: np.ndarray, povm: FinitePovm, k: int,
                      rng: np.random.Generator) -> int:
    """One-shot coarse/refine measurement (builds the tree each call)."""
    return RecursiveMeasurer(povm, k).measure(rho, rng)
