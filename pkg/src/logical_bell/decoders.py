"""Detector graphs and matching decoders.

The detector graph is derived mechanically: every single fault allowed by
the noise binding is injected once through the Pauli-frame simulator and
the flipped detectors and observables are recorded.  Faults that flip more
than two detectors are split by basis sector (Z-type detectors see X
errors, X-type detectors see Z errors); whatever still has more than two
detectors in a sector is tried against existing edges and otherwise counted
as undecomposable.

Two matchers share the graph: an exact minimum-weight perfect matching on
the defect-complete graph (bitmask DP for small defect sets, networkx
blossom beyond), and a pymatching backend for batch decoding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .builder import Experiment
from .stabilizer import NoiseBinding
from .stabilizer.frame import FrameSimulator, compile_program

BOUNDARY = -1


class DecompositionError(RuntimeError):
    """A fault flips detectors that cannot be split into graph edges."""


@dataclass
class Edge:
    u: int
    v: int  # BOUNDARY for boundary edges
    p: float
    obs: int  # bitmask over observables

    @property
    def weight(self) -> float:
        p = min(max(self.p, 1e-300), 1 - 1e-16)
        return math.log((1 - p) / p)


@dataclass
class DetectorGraph:
    n_detectors: int
    edges: list[Edge]
    detector_basis: list[str]
    observable_names: list[str]
    undecomposable: int = 0
    undecomposable_p: float = 0.0
    undetectable_logical_p: float = 0.0
    n_faults: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def to_pymatching(self):
        import pymatching

        m = pymatching.Matching()
        for e in self.edges:
            ids = {i for i in range(len(self.observable_names)) if (e.obs >> i) & 1}
            w = max(e.weight, 0.0)
            if e.v == BOUNDARY:
                m.add_boundary_edge(e.u, fault_ids=ids, weight=w, error_probability=e.p, merge_strategy="smallest-weight")
            else:
                m.add_edge(e.u, e.v, fault_ids=ids, weight=w, error_probability=e.p, merge_strategy="smallest-weight")
        if m.num_detectors < self.n_detectors:
            # detectors never flipped by any fault still need a node
            for k in range(m.num_detectors, self.n_detectors):
                m.add_boundary_edge(k, weight=1e6, merge_strategy="smallest-weight")
        return m

    def dump(self) -> str:
        """DIMACS-like edge list; the boundary is node n_detectors."""
        b = self.n_detectors
        lines = [f"c detector graph, boundary node {b}", f"p edge {b + 1} {len(self.edges)}"]
        for e in self.edges:
            v = b if e.v == BOUNDARY else e.v
            lines.append(f"e {e.u} {v} {e.weight:.12g} {e.p:.12g} {e.obs}")
        return "\n".join(lines) + "\n"


def _xor_p(a: float, b: float) -> float:
    return a * (1 - b) + b * (1 - a)


@dataclass(frozen=True)
class Fault:
    step: int  # noise step of the compiled program
    location: int
    component: int  # Pauli component code (or 1 for a classical flip)
    arity: int
    p: float
    detectors: tuple[int, ...]
    observables: int


def enumerate_faults(experiment: Experiment, binding: NoiseBinding, chunk: int = 1 << 14):
    """Yield a :class:`Fault` for every single fault allowed by ``binding``."""
    prog = compile_program(experiment.circuit, binding, experiment.final_checks)
    sim = FrameSimulator(prog)
    faults = []  # (sid, loc, comp, prob)
    for sid, st in enumerate(prog.noise_steps):
        probs = st.channel.probs
        for comp in range(1, len(probs)):
            if probs[comp] <= 0:
                continue
            for loc in range(st.size):
                faults.append((sid, loc, comp, probs[comp]))
    dmat = experiment.detector_matrix()
    omat = experiment.observable_matrix()
    for start in range(0, len(faults), chunk):
        part = faults[start:start + chunk]
        shots = len(part)
        forced: dict[int, tuple[list, list]] = {}
        for shot, (sid, loc, comp, _) in enumerate(part):
            cells, comps = forced.setdefault(sid, ([], []))
            cells.append(loc * shots + shot)
            comps.append(comp)
        forced_arr = {
            sid: (np.array(c, dtype=np.int64), np.array(k, dtype=np.int64)) for sid, (c, k) in forced.items()
        }
        rec, _, _ = sim.run(shots, np.random.default_rng(0), forced=forced_arr)
        r = rec.view(np.uint8)
        det = sparse.csc_matrix((dmat @ r) % 2)
        det.eliminate_zeros()
        obs = np.asarray((omat @ r) % 2)
        weights = 1 << np.arange(obs.shape[0])
        masks = weights @ obs
        for j, (sid, loc, comp, p) in enumerate(part):
            dets = tuple(int(x) for x in det.indices[det.indptr[j]:det.indptr[j + 1]])
            arity = prog.noise_steps[sid].channel.arity
            yield Fault(sid, loc, comp, arity, p, dets, int(masks[j]))


def build_detector_graph(experiment: Experiment, binding: NoiseBinding, strict: bool = False) -> DetectorGraph:
    """Detector graph with edge weight ln((1-p)/p); see module docstring for decomposition."""
    basis = [d.basis for d in experiment.detectors]
    names = experiment.observable_names
    # observable i is corrected by the detectors of the basis it anticommutes with
    obs_sector = {i: ("Z" if n == "zz" else "X") for i, n in enumerate(names)}
    combined: dict[tuple[tuple[int, ...], int], float] = {}
    n_faults = 0
    for f in enumerate_faults(experiment, binding):
        n_faults += 1
        if not f.detectors and not f.observables:
            continue
        key = (f.detectors, f.observables)
        combined[key] = _xor_p(combined.get(key, 0.0), f.p)

    simple: dict[tuple[int, int], list[tuple[int, float]]] = {}
    hyper = []
    undetectable = 0.0
    for (dets, mask), p in combined.items():
        if not dets:
            undetectable = _xor_p(undetectable, p)
            continue
        parts = _split_by_sector(dets, mask, basis, obs_sector)
        if parts is not None and all(len(dd) <= 2 for dd, _ in parts):
            for dd, mm in parts:
                simple.setdefault(_edge_key(dd), []).append((mm, p))
        else:
            hyper.append((dets, mask, p))

    undecomposable, undecomposable_p = 0, 0.0
    for dets, mask, p in hyper:
        parts = _split_with_known(dets, mask, simple)
        if parts is None:
            if strict:
                raise DecompositionError(f"fault flipping {dets} cannot be decomposed")
            undecomposable += 1
            undecomposable_p += p
            continue
        for dd, mm in parts:
            simple.setdefault(_edge_key(dd), []).append((mm, p))

    edges = []
    for key, entries in sorted(simple.items()):
        by_mask: dict[int, float] = {}
        for mask, p in entries:
            by_mask[mask] = _xor_p(by_mask.get(mask, 0.0), p)
        mask, p = max(by_mask.items(), key=lambda kv: (kv[1], -kv[0]))
        total = 0.0
        for q in by_mask.values():
            total = _xor_p(total, q)
        edges.append(Edge(key[0], key[1], total, mask))
    return DetectorGraph(
        len(basis), edges, basis, names, undecomposable, undecomposable_p, undetectable, n_faults
    )


def _edge_key(dets) -> tuple[int, int]:
    if len(dets) == 1:
        return (dets[0], BOUNDARY)
    return (min(dets), max(dets))


def _split_by_sector(dets, mask, basis, obs_sector):
    parts = []
    for sector in ("Z", "X"):
        dd = tuple(d for d in dets if basis[d] == sector)
        mm = 0
        for i, s in obs_sector.items():
            if s == sector and (mask >> i) & 1:
                mm |= 1 << i
        if dd:
            parts.append((dd, mm))
        elif mm:
            return None
    return parts


def _split_with_known(dets, mask, simple):
    """Partition ``dets`` into existing edges whose observable masks XOR to ``mask``."""
    dets = list(dets)
    if len(dets) > 6:
        return None

    def rec(rest, acc_mask):
        if not rest:
            return [] if acc_mask == mask else None
        first, others = rest[0], rest[1:]
        options = [((first,), (first, BOUNDARY), others)]
        for j, o in enumerate(others):
            options.append(((first, o), (min(first, o), max(first, o)), others[:j] + others[j + 1:]))
        for dd, key, remaining in options:
            for m, _ in simple.get(key, []):
                sub = rec(remaining, acc_mask ^ m)
                if sub is not None:
                    return [(dd, m)] + sub
        return None

    return rec(dets, 0)


# -- exact matching -----------------------------------------------------------

@dataclass
class MatchResult:
    pairs: list[tuple[int, int]]
    total_weight: float
    obs_mask: int
    failed: bool = False

    def flips(self, n_obs: int) -> list[int]:
        return [(self.obs_mask >> i) & 1 for i in range(n_obs)]


class ShortestPaths:
    """All-pairs shortest paths over detectors + boundary with path observable parity."""

    def __init__(self, graph: DetectorGraph):
        n = graph.n_detectors + 1
        b = graph.n_detectors
        rows, cols, w = [], [], []
        masks: dict[tuple[int, int], int] = {}
        best: dict[tuple[int, int], float] = {}
        for e in graph.edges:
            u, v = e.u, (b if e.v == BOUNDARY else e.v)
            key = (min(u, v), max(u, v))
            wt = max(e.weight, 0.0)
            if key in best and best[key] <= wt:
                continue
            best[key] = wt
            masks[key] = e.obs
        for (u, v), wt in best.items():
            rows += [u, v]
            cols += [v, u]
            # scipy drops explicit zeros, so nudge zero weights
            w += [wt or 1e-12, wt or 1e-12]
        mat = sparse.csr_matrix((w, (rows, cols)), shape=(n, n))
        self.dist, pred = dijkstra(mat, directed=False, return_predecessors=True)
        self.parity = np.zeros((n, n), dtype=np.int64)
        for s in range(n):
            order = np.argsort(self.dist[s], kind="stable")
            par = self.parity[s]
            for v in order:
                pv = pred[s, v]
                if pv < 0:
                    continue
                par[v] = par[pv] ^ masks[(min(pv, v), max(pv, v))]
        self.boundary = b


def decode_mwpm(graph: DetectorGraph, defects, paths: ShortestPaths | None = None, dp_limit: int = 12) -> MatchResult:
    """Exact minimum-weight perfect matching of ``defects`` (boundary may absorb any number)."""
    defects = sorted(set(int(d) for d in defects))
    if not defects:
        return MatchResult([], 0.0, 0)
    paths = paths or graph._cache.setdefault("paths", ShortestPaths(graph))
    b = paths.boundary
    k = len(defects)
    idx = np.array(defects)
    dist = paths.dist[np.ix_(idx, idx)]
    bd = paths.dist[idx, b]
    if k <= dp_limit:
        pairs, total = _dp_match(dist, bd)
    else:
        pairs, total = _blossom_match(dist, bd)
    if not np.isfinite(total):
        return MatchResult([], math.inf, 0, failed=True)
    mask = 0
    out = []
    for i, j in pairs:
        if j == BOUNDARY:
            mask ^= int(paths.parity[defects[i], b])
            out.append((defects[i], BOUNDARY))
        else:
            mask ^= int(paths.parity[defects[i], defects[j]])
            out.append((defects[i], defects[j]))
    return MatchResult(out, float(total), mask)


def _dp_match(dist: np.ndarray, bd: np.ndarray):
    k = len(bd)
    full = (1 << k) - 1
    best = {full: (0.0, None)}

    def solve(mask: int) -> float:
        if mask in best:
            return best[mask][0]
        i = 0
        while (mask >> i) & 1:
            i += 1
        m2 = mask | (1 << i)
        cand = (bd[i] + solve(m2), (i, BOUNDARY))
        for j in range(i + 1, k):
            if not (mask >> j) & 1:
                c = dist[i, j] + solve(m2 | (1 << j))
                if c < cand[0]:
                    cand = (c, (i, j))
        best[mask] = cand
        return cand[0]

    total = solve(0)
    pairs = []
    mask = 0
    while mask != full:
        _, (i, j) = best[mask]
        pairs.append((i, j))
        mask |= 1 << i
        if j != BOUNDARY:
            mask |= 1 << j
    return pairs, total


def _blossom_match(dist: np.ndarray, bd: np.ndarray):
    """Boundary copies joined by zero-weight edges, then networkx max-weight matching."""
    k = len(bd)
    finite = np.concatenate([dist[np.isfinite(dist)], bd[np.isfinite(bd)]])
    big = (finite.max() if len(finite) else 1.0) * (k + 1) + 1.0
    g = nx.Graph()
    for i in range(k):
        for j in range(i + 1, k):
            if np.isfinite(dist[i, j]):
                g.add_edge(i, j, weight=big - dist[i, j])
        if np.isfinite(bd[i]):
            g.add_edge(i, k + i, weight=big - bd[i])
        for j in range(i + 1, k):
            g.add_edge(k + i, k + j, weight=big)
    matching = nx.max_weight_matching(g, maxcardinality=True)
    pairs = []
    total = 0.0
    for u, v in sorted(tuple(sorted(e)) for e in matching):
        if u < k and v < k:
            pairs.append((u, v))
            total += dist[u, v]
        elif u < k:
            pairs.append((u, BOUNDARY))
            total += bd[u]
    if len({p for pr in pairs for p in pr if p != BOUNDARY}) != k:
        return pairs, math.inf
    return sorted(pairs), total


# -- batch decoding -------------------------------------------------------------

class MatchingDecoder:
    """Batch decoder over a detector graph; ``backend`` is "pymatching" or "exact"."""

    def __init__(self, graph: DetectorGraph, backend: str = "pymatching"):
        self.graph = graph
        self.backend = backend
        self.n_obs = len(graph.observable_names)
        if backend == "pymatching":
            self._m = graph.to_pymatching()
        elif backend == "exact":
            self._paths = ShortestPaths(graph)
        else:
            raise ValueError(f"unknown backend {backend!r}")

    def decode_batch(self, detections: np.ndarray) -> np.ndarray:
        """(shots, n_detectors) bool -> (shots, n_obs) predicted observable flips."""
        detections = np.asarray(detections, dtype=np.uint8)
        shots = detections.shape[0]
        out = np.zeros((shots, self.n_obs), dtype=np.uint8)
        nz = np.flatnonzero(detections.any(axis=1))
        if len(nz) == 0:
            return out
        if self.backend == "pymatching":
            out[nz] = self._m.decode_batch(detections[nz])
            return out
        for s in nz:
            res = decode_mwpm(self.graph, np.flatnonzero(detections[s]), self._paths)
            out[s] = res.flips(self.n_obs)
        return out


# -- Bacon-Shor repetition decoding ---------------------------------------------

def decode_bacon_shor(gauge_history: dict[str, np.ndarray]) -> dict[str, int]:
    """Majority-vote repetition decoding of Bacon-Shor stabilizer histories.

    ``gauge_history`` maps a basis to an array of shape (rounds, L-1) holding
    the stabilizer values reconstructed from gauge products in each round
    (the last row normally comes from the final transversal readout).  A Z
    stabilizer between rows r and r+1 flags X errors on those rows; the
    repetition code over rows is decoded by majority vote over rounds and
    then by the lighter of the two consistent row-flip patterns.  Returns,
    per basis, whether the row-0 (resp. column-0) logical representative
    must be flipped.
    """
    out = {}
    for basis, hist in gauge_history.items():
        hist = np.atleast_2d(np.asarray(hist, dtype=np.int64))
        syn = (2 * hist.sum(axis=0) > hist.shape[0]).astype(np.int64)
        flips = np.concatenate([[0], np.cumsum(syn) % 2])
        if 2 * flips.sum() > len(flips):
            flips ^= 1
        out[basis] = int(flips[0])
    return out


__all__ = [
    "BOUNDARY", "DecompositionError", "DetectorGraph", "Edge", "Fault", "MatchResult", "MatchingDecoder",
    "ShortestPaths", "build_detector_graph", "decode_bacon_shor", "decode_mwpm", "enumerate_faults",
]
