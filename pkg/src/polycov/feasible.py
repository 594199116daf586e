"""Polyhedral set of data-consistent systems: H-representation, boundedness, membership.

Each row j of [A B] is constrained independently: with G stacking the
normalized instrument moments, row vector v must satisfy
lo_j <= G^T v <= hi_j entrywise, where lo_j/hi_j are the moment rows of
X_+ shifted by the cross-covariance bounds.  The full set is the
Cartesian product of the n row polyhedra.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from polycov.data import CrossCovBounds, CrossCovSummary, SystemPair

BOUNDED = "bounded"
UNBOUNDED = "unbounded"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class RowPolyhedron:
    """{ v in R^(n+m) : lo <= G^T v <= hi }, the constraint on one row of [A B].

    Entries of lo/hi may be -inf/+inf after redundancy removal.
    """

    G: np.ndarray  # (n+m) x M, shared by all rows of the same set
    lo: np.ndarray
    hi: np.ndarray
    row_index: int = 0

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape[0] != G.shape[1] or hi.shape[0] != G.shape[1]:
            raise ValueError("lo/hi length must equal the number of instrument columns of G")
        if np.any(lo > hi):
            raise ValueError("lo > hi in some entry")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    @property
    def M(self) -> int:
        return self.G.shape[1]

    @property
    def scale(self) -> float:
        vals = np.concatenate([self.lo[np.isfinite(self.lo)], self.hi[np.isfinite(self.hi)]])
        return max(1.0, float(np.max(np.abs(vals))) if vals.size else 0.0)

    def contains_point(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float).reshape(self.dim)
        w = self.G.T @ v
        slack = tol * self.scale
        return bool(np.all(w >= self.lo - slack) and np.all(w <= self.hi + slack))

    def one_sided(self):
        """Return (A_ub, b_ub) with finite rows of the system A_ub v <= b_ub."""
        rows, rhs = [], []
        for i in range(self.M):
            if np.isfinite(self.hi[i]):
                rows.append(self.G[:, i])
                rhs.append(self.hi[i])
            if np.isfinite(self.lo[i]):
                rows.append(-self.G[:, i])
                rhs.append(-self.lo[i])
        if not rows:
            return np.zeros((0, self.dim)), np.zeros(0)
        return np.array(rows), np.array(rhs)


@dataclass(frozen=True)
class FeasibleSet:
    n: int
    m: int
    rows: list
    bounded: str
    rank_tolerance: float = 1e-10
    diagnostics: dict = field(default_factory=dict)

    @property
    def G(self) -> np.ndarray:
        return self.rows[0].G


def build_feasible_set(summary: CrossCovSummary, bounds: CrossCovBounds, tol: float = 1e-10) -> FeasibleSet:
    """Assemble the H-representation and decide boundedness by the rank of G.

    G = col(Rxr_minus, Rur_minus); row j is constrained by
    Rxr_plus[j, :] - C_u[:, j] <= G^T v <= Rxr_plus[j, :] - C_l[:, j].
    Boundedness holds iff ker(G^T) = {0}; the singular-value surrogate
    reports "undetermined" inside the band [tol, 100*tol] relative to
    the largest singular value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, m, M = summary.n, summary.m, summary.M
    if bounds.M != M or bounds.n != n:
        raise ValueError(f"bounds are {bounds.M}x{bounds.n}, expected {M}x{n}")
    G = np.vstack([summary.Rxr_minus, summary.Rur_minus])
    rows = [
        RowPolyhedron(
            G=G,
            lo=summary.Rxr_plus[j, :] - bounds.C_u[:, j],
            hi=summary.Rxr_plus[j, :] - bounds.C_l[:, j],
            row_index=j,
        )
        for j in range(n)
    ]
    d = n + m
    sv = np.linalg.svd(G, compute_uv=False)
    smax = sv[0] if sv.size else 0.0
    if M < d or smax == 0.0:
        verdict, ratio = UNBOUNDED, 0.0
    else:
        ratio = float(sv[d - 1] / smax)
        if ratio < tol:
            verdict = UNBOUNDED
        elif ratio > 100 * tol:
            verdict = BOUNDED
        else:
            verdict = UNDETERMINED
    return FeasibleSet(
        n=n,
        m=m,
        rows=rows,
        bounded=verdict,
        rank_tolerance=tol,
        diagnostics={"singular_value_ratio": ratio},
    )


def contains(fset: FeasibleSet, sys: SystemPair, tol: float = 1e-9) -> bool:
    """Membership test: every row of [A B] satisfies its row polyhedron within tol."""
    if sys.n != fset.n or sys.m != fset.m:
        raise ValueError(f"system is {sys.n}x{sys.m}, set expects {fset.n}x{fset.m}")
    sigma = sys.sigma
    return all(row.contains_point(sigma[row.row_index], tol) for row in fset.rows)


def _row_feasible(row: RowPolyhedron) -> bool:
    A_ub, b_ub = row.one_sided()
    if A_ub.shape[0] == 0:
        return True
    res = linprog(np.zeros(row.dim), A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * row.dim, method="highs")
    return res.status == 0


def is_empty(fset: FeasibleSet) -> bool:
    """True iff some row polyhedron has no feasible point (per-row LP check)."""
    return any(not _row_feasible(row) for row in fset.rows)


def chebyshev_point(row: RowPolyhedron):
    """Point maximizing the smallest normalized slack; equality entries stay on their face.

    Returns (v, radius); radius 0 signals a degenerate (lower-dimensional or
    empty-interior) row, radius None an infeasible row.
    """
    A_ub, b_ub = row.one_sided()
    norms = np.linalg.norm(A_ub, axis=1) if A_ub.shape[0] else np.zeros(0)
    eq_mask = np.isclose(row.lo, row.hi)
    # slack coefficient: 0 for rows belonging to an equality pair
    coef = []
    for i in range(row.M):
        if np.isfinite(row.hi[i]):
            coef.append(0.0 if eq_mask[i] else np.linalg.norm(row.G[:, i]))
        if np.isfinite(row.lo[i]):
            coef.append(0.0 if eq_mask[i] else np.linalg.norm(row.G[:, i]))
    coef = np.asarray(coef)
    d = row.dim
    c = np.zeros(d + 1)
    c[-1] = -1.0  # maximize radius
    A = np.hstack([A_ub, coef.reshape(-1, 1)]) if A_ub.shape[0] else np.zeros((0, d + 1))
    res = linprog(
        c,
        A_ub=A,
        b_ub=b_ub,
        bounds=[(None, None)] * d + [(0, row.scale)],
        method="highs",
    )
    if res.status != 0:
        return None, None
    return res.x[:d], float(res.x[d])


def hit_and_run(row: RowPolyhedron, count: int, seed: int = 0, burn: int | None = None):
    """Hit-and-run samples from a (bounded) row polyhedron; deterministic per seed.

    Equality faces are respected by projecting directions onto the face.
    """
    v, radius = chebyshev_point(row)
    if v is None:
        raise ValueError("row polyhedron is empty")
    d = row.dim
    eq_cols = [i for i in range(row.M) if np.isclose(row.lo[i], row.hi[i])]
    P = np.eye(d)
    if eq_cols:
        Aeq = row.G[:, eq_cols].T
        P = P - np.linalg.pinv(Aeq) @ Aeq
    rng = np.random.default_rng(seed)
    if burn is None:
        burn = 10 * d
    A_ub, b_ub = row.one_sided()
    out = np.tile(v, (count, 1))  # degenerate rows fall back to the center
    k = 0
    for step in range(burn + count):
        u = P @ rng.standard_normal(d)
        nu = np.linalg.norm(u)
        if nu < 1e-14:
            continue
        u /= nu
        # allowed interval for v + t*u against A_ub (v + t u) <= b_ub
        t_lo, t_hi = -np.inf, np.inf
        Au = A_ub @ u
        slack = b_ub - A_ub @ v
        for a, s in zip(Au, slack):
            if a > 1e-14:
                t_hi = min(t_hi, s / a)
            elif a < -1e-14:
                t_lo = max(t_lo, s / a)
        if not np.isfinite(t_lo) or not np.isfinite(t_hi):
            raise ValueError("hit-and-run requires a bounded row polyhedron")
        v = v + rng.uniform(t_lo, t_hi) * u
        if step >= burn:
            out[k] = v
            k += 1
    return out


def to_json_dict(fset: FeasibleSet) -> dict:
    def clean(arr):
        return [None if not np.isfinite(x) else float(x) for x in arr]

    return {
        "n": fset.n,
        "m": fset.m,
        "G": fset.G.tolist(),
        "rows": [{"lo": clean(r.lo), "hi": clean(r.hi)} for r in fset.rows],
        "bounded": fset.bounded,
    }


def from_json_dict(doc: dict) -> FeasibleSet:
    G = np.asarray(doc["G"], dtype=float)
    rows = []
    for j, r in enumerate(doc["rows"]):
        lo = np.array([-np.inf if x is None else float(x) for x in r["lo"]])
        hi = np.array([np.inf if x is None else float(x) for x in r["hi"]])
        rows.append(RowPolyhedron(G=G, lo=lo, hi=hi, row_index=j))
    n = len(rows)
    m = G.shape[0] - n
    if m < 1:
        raise ValueError("set JSON has more rows than G allows")
    return FeasibleSet(n=n, m=m, rows=rows, bounded=doc["bounded"])


def save_set(fset: FeasibleSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(fset), fh, indent=1)


def load_set(path) -> FeasibleSet:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
