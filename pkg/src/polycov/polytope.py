"""Vertex enumeration for bounded row polyhedra and the product-vertex iterator.

The constraints never couple distinct rows of [A B], so the set's
vertices are exactly the Cartesian products of per-row vertices: L_j
vertices in dimension n+m per row instead of one enumeration in
dimension n(n+m).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from polycov.data import SystemPair
from polycov.feasible import FeasibleSet, RowPolyhedron, _row_feasible


@dataclass(frozen=True)
class VertexSet:
    """Per-row vertex lists; iteration over products is lexicographic in the row index."""

    per_row: list  # n arrays, each L_j x (n+m)
    n: int
    m: int

    @property
    def L(self) -> int:
        out = 1
        for v in self.per_row:
            out *= len(v)
        return out


def recession_directions(row: RowPolyhedron, tol: float = 1e-10):
    """Orthonormal basis of ker(G^T); empty iff the row polyhedron is bounded."""
    G = row.G
    _, sv, Vh = np.linalg.svd(G.T)
    d = row.dim
    smax = sv[0] if sv.size else 0.0
    if smax == 0.0:
        return np.eye(d)
    rank = int(np.sum(sv > tol * smax))
    return Vh[rank:]


def enumerate_row_vertices(row: RowPolyhedron, tol: float = 1e-9) -> np.ndarray:
    """All vertices of a bounded row polyhedron by exhaustive hyperplane subsets.

    Every d-subset of the bounding hyperplanes is intersected and the
    solutions filtered by feasibility; duplicates closer than tol (after
    normalizing by the row's bound magnitudes) are merged.  Exponential in
    d = n+m, which is fine at the intended problem sizes.
    """
    if recession_directions(row).shape[0] > 0:
        raise ValueError("row polyhedron is unbounded (ker G^T is nontrivial)")
    d = row.dim
    planes = []  # (normal, offset)
    for i in range(row.M):
        if np.isfinite(row.hi[i]):
            planes.append((row.G[:, i], row.hi[i]))
        if np.isfinite(row.lo[i]) and not np.isclose(row.lo[i], row.hi[i]):
            planes.append((row.G[:, i], row.lo[i]))
    scale = row.scale
    verts = []
    for combo in itertools.combinations(planes, d):
        A = np.array([p[0] for p in combo])
        b = np.array([p[1] for p in combo])
        try:
            v = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(v)) or np.max(np.abs(A @ v - b)) > 1e-7 * scale:
            continue
        if not row.contains_point(v, tol):
            continue
        if all(np.linalg.norm(v - w) > tol * scale for w in verts):
            verts.append(v)
    if not verts:
        if not _row_feasible(row):
            raise ValueError("row polyhedron is empty")
        raise RuntimeError("bounded nonempty row produced no vertices; check tolerances")
    verts.sort(key=tuple)
    return np.array(verts)


def enumerate_vertices(fset: FeasibleSet, tol: float = 1e-9) -> VertexSet:
    """Enumerate every row of a bounded feasible set."""
    if fset.bounded != "bounded":
        raise ValueError(f"vertex enumeration needs a bounded set, got {fset.bounded!r}")
    return VertexSet(per_row=[enumerate_row_vertices(r, tol) for r in fset.rows], n=fset.n, m=fset.m)


def product_vertices(vs: VertexSet):
    """Yield the L = prod L_j product vertices as SystemPair, lexicographically."""
    n, m = vs.n, vs.m
    for idx in itertools.product(*(range(len(v)) for v in vs.per_row)):
        sigma = np.array([vs.per_row[j][idx[j]] for j in range(n)])
        yield SystemPair(A=sigma[:, :n], B=sigma[:, n:])


def convex_combinations(vs: VertexSet, count: int, seed: int = 0):
    """Random members of the set as per-row convex combinations of vertices."""
    rng = np.random.default_rng(seed)
    n, m = vs.n, vs.m
    out = []
    for _ in range(count):
        sigma = np.zeros((n, n + m))
        for j, verts in enumerate(vs.per_row):
            w = rng.exponential(size=len(verts))
            w /= w.sum()
            sigma[j] = w @ verts
        out.append(SystemPair(A=sigma[:, :n], B=sigma[:, n:]))
    return out


def remove_redundant(row: RowPolyhedron, tol: float = 1e-9) -> RowPolyhedron:
    """Drop one-sided inequalities that do not change the feasible set.

    Each bound is tested by optimizing its direction over the other
    constraints (with itself relaxed); removed sides become +-inf.
    Equality entries (lo == hi) are kept as faces.
    """
    lo = row.lo.copy()
    hi = row.hi.copy()
    scale = row.scale
    d = row.dim

    def solve(c, A_ub, b_ub):
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d, method="highs")
        return res

    for i in range(row.M):
        if np.isclose(lo[i], hi[i]):
            continue
        g = row.G[:, i]
        for side in ("hi", "lo"):
            bound = hi[i] if side == "hi" else lo[i]
            if not np.isfinite(bound):
                continue
            rows_, rhs_ = [], []
            for k in range(row.M):
                if np.isfinite(hi[k]):
                    b = hi[k] + (1.0 + scale if (k == i and side == "hi") else 0.0)
                    rows_.append(row.G[:, k])
                    rhs_.append(b)
                if np.isfinite(lo[k]):
                    b = -lo[k] + (1.0 + scale if (k == i and side == "lo") else 0.0)
                    rows_.append(-row.G[:, k])
                    rhs_.append(b)
            A_ub, b_ub = np.array(rows_), np.array(rhs_)
            if side == "hi":
                res = solve(-g, A_ub, b_ub)
                if res.status == 0 and -res.fun <= hi[i] + tol * scale:
                    hi[i] = np.inf
            else:
                res = solve(g, A_ub, b_ub)
                if res.status == 0 and res.fun >= lo[i] - tol * scale:
                    lo[i] = -np.inf
    return RowPolyhedron(G=row.G, lo=lo, hi=hi, row_index=row.row_index)


def vertices_to_json_dict(vs: VertexSet) -> dict:
    return {"per_row": [v.tolist() for v in vs.per_row], "L": vs.L, "n": vs.n, "m": vs.m}


def vertices_from_json_dict(doc: dict) -> VertexSet:
    per_row = [np.asarray(v, dtype=float) for v in doc["per_row"]]
    return VertexSet(per_row=per_row, n=int(doc["n"]), m=int(doc["m"]))


def save_vertices(vs: VertexSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(vertices_to_json_dict(vs), fh, indent=1)


def load_vertices(path) -> VertexSet:
    with open(path) as fh:
        return vertices_from_json_dict(json.load(fh))
