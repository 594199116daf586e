"""Independent verification oracles: spectral radius, Lyapunov certificates, H2/Hinf norms, inclusion reports.

These deliberately avoid the synthesis code paths: norms come from
Gramians and a bounded-real bisection guarded by a frequency grid, and
certificates are re-checked by direct eigenvalue evaluation at vertices
and random interior members.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polycov.data import SystemPair
from polycov.feasible import FeasibleSet, hit_and_run
from polycov.lmi import DecisionVar, LmiBlock, LmiProblem, solve_feasibility
from polycov.polytope import VertexSet, convex_combinations, product_vertices


@dataclass(frozen=True)
class ClosedLoop:
    """x(t+1) = A_cl x(t) + w(t), z(t) = C x(t) + D w(t); the disturbance enters the state directly."""

    A_cl: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_cl, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A_cl must be square")
        if C.shape[1] != A.shape[0] or D.shape != C.shape:
            raise ValueError("C and D must be p x n with n matching A_cl")
        object.__setattr__(self, "A_cl", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A_cl.shape[0]


def spectral_radius(A_cl) -> float:
    A = np.atleast_2d(np.asarray(A_cl, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _closed_loops(vertices: VertexSet, K):
    K = np.atleast_2d(np.asarray(K, dtype=float))
    out = []
    for sp in product_vertices(vertices):
        out.append(sp.A + sp.B @ K)
    return out, K


def verify_quadratic(K, P, vertices: VertexSet, samples: int = 100, seed: int = 0) -> dict:
    """Check (A+BK) P (A+BK)^T - P < 0 at every product vertex and random members.

    P must be symmetric positive definite.  The certified inequality uses
    P exactly in this orientation; the bounded-synthesis path passes
    P = Y, which the Schur complement of its LMI shows is the matrix
    satisfying this pattern (Y^{-1} certifies only the transposed
    pattern).
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if not np.allclose(P, P.T, atol=1e-10 * (1 + np.abs(P).max())):
        raise ValueError("P must be symmetric")
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise ValueError("P must be positive definite")
    K = np.atleast_2d(np.asarray(K, dtype=float))

    def worst_eig(sp: SystemPair) -> float:
        A_cl = sp.A + sp.B @ K
        V = A_cl @ P @ A_cl.T - P
        return float(np.linalg.eigvalsh(V)[-1])

    vertex_eigs = [worst_eig(sp) for sp in product_vertices(vertices)]
    combo_eigs = [worst_eig(sp) for sp in convex_combinations(vertices, samples, seed)]
    worst = max(vertex_eigs + combo_eigs)
    return {
        "passed": bool(worst < 0),
        "worst_max_eig": worst,
        "vertex_max_eigs": vertex_eigs,
        "combination_max_eigs": combo_eigs,
        "samples": samples,
        "seed": seed,
        "certificate_form": "(A+BK) P (A+BK)^T - P < 0 with the supplied P",
    }


def _dlyap(A: np.ndarray) -> np.ndarray:
    """Solve W - A W A^T = I (controllability Gramian of (A, I))."""
    n = A.shape[0]
    if n <= 20:
        lhs = np.eye(n * n) - np.kron(A, A)
        W = np.linalg.solve(lhs, np.eye(n).flatten()).reshape(n, n)
        return 0.5 * (W + W.T)
    W = np.eye(n)
    for _ in range(100000):
        W_next = A @ W @ A.T + np.eye(n)
        if np.max(np.abs(W_next - W)) <= 1e-12 * max(1.0, np.max(np.abs(W_next))):
            return 0.5 * (W_next + W_next.T)
        W = W_next
    raise RuntimeError("Gramian iteration did not converge")


def h2_norm(cl: ClosedLoop) -> float:
    """sqrt(trace(C W C^T) + trace(D D^T)) with W the closed-loop controllability Gramian."""
    if spectral_radius(cl.A_cl) >= 1.0:
        raise ValueError("closed loop is not stable; H2 norm undefined")
    W = _dlyap(cl.A_cl)
    return float(np.sqrt(np.trace(cl.C @ W @ cl.C.T) + np.trace(cl.D @ cl.D.T)))


def _frequency_grid_peak(cl: ClosedLoop, points: int) -> float:
    omega = np.linspace(0.0, np.pi, points)
    z = np.exp(1j * omega)
    n = cl.n
    Ms = z[:, None, None] * np.eye(n)[None] - cl.A_cl[None]
    X = np.linalg.solve(Ms, np.broadcast_to(np.eye(n), (points, n, n)))
    T = cl.C[None] @ X + cl.D[None]
    sv = np.linalg.svd(T, compute_uv=False)
    return float(np.max(sv[:, 0]))


def _bounded_real_feasible(cl: ClosedLoop, gamma: float) -> bool:
    """Analysis-form test for ||T||_inf < gamma with the gain absorbed into A_cl."""
    n = cl.n
    A, C, D = cl.A_cl, cl.C, cl.D
    const = np.block([[C.T @ C, C.T @ D], [D.T @ C, D.T @ D - gamma**2 * np.eye(n)]])
    S1 = np.zeros((2 * n, n))
    S1[:n] = np.eye(n)
    S2 = np.zeros((2 * n, n))
    S2[n:] = np.eye(n)
    P = DecisionVar("P", "symmetric", n, n)
    brl = LmiBlock(
        constant=const,
        terms=[
            ("P", S1 @ A.T, A @ S1.T),
            ("P", -S1, S1.T),
            ("P", 2.0 * S1 @ A.T, S2.T),
            ("P", S2, S2.T),
        ],
        sense="nsd",
        name="bounded real",
    )
    pd = LmiBlock(constant=np.zeros((n, n)), terms=[("P", np.eye(n), np.eye(n))], name="P > 0")
    res = solve_feasibility(LmiProblem(variables=[P], blocks=[brl, pd]))
    return res.status == "feasible"


def hinf_norm(cl: ClosedLoop, tol: float = 1e-4, grid_points: int = 4096) -> float:
    """Peak gain of T(q) = C (qI - A_cl)^{-1} + D for a stable closed loop.

    Bisection on a bounded-real feasibility test, bracketed from below by
    a dense frequency-grid evaluation so the result can never fall under
    the grid peak.
    """
    if spectral_radius(cl.A_cl) >= 1.0:
        raise ValueError("closed loop is not stable; Hinf norm undefined")
    if not np.any(cl.C):
        return float(np.linalg.svd(cl.D, compute_uv=False)[0]) if np.any(cl.D) else 0.0
    lb = _frequency_grid_peak(cl, grid_points)
    hi = max(lb, 1e-12) * (1.0 + 10.0 * tol)
    for _ in range(60):
        if _bounded_real_feasible(cl, hi):
            break
        hi *= 2.0
    else:
        raise RuntimeError("bounded-real bracketing failed")
    lo = lb
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _bounded_real_feasible(cl, mid):
            hi = mid
        else:
            lo = mid
    return max(lb, 0.5 * (lo + hi))


def scalar_strip_stability(row, K) -> dict:
    """Exact closed-loop range of a scalar strip {lo <= v.g <= hi} under gain K.

    The closed-loop value v . (1, K) is bounded over the strip only when
    (1, K) is orthogonal to the recession direction, i.e. collinear with
    g; then it sweeps an interval scaled from [lo, hi] and stability
    holds iff that interval stays inside the unit circle.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if row.dim != 2 or row.M != 1:
        raise ValueError("strip analysis needs a scalar row with a single instrument")
    g = row.G[:, 0]
    w = np.array([1.0, float(K[0, 0])])
    scale = max(1.0, float(np.linalg.norm(g)))
    resid = w - (w @ g) / (g @ g) * g  # component along the recession direction
    if np.linalg.norm(resid) > 1e-9 * scale * max(1.0, np.linalg.norm(w)):
        return {"bounded_closed_loop": False, "stable": False, "closed_loop_range": None}
    alpha = (w @ g) / (g @ g)
    ends = sorted([alpha * row.lo[0], alpha * row.hi[0]])
    return {
        "bounded_closed_loop": True,
        "stable": bool(max(abs(ends[0]), abs(ends[1])) < 1.0),
        "closed_loop_range": ends,
    }


def check_inclusion(
    vertices: VertexSet,
    K,
    criterion: str,
    perf=None,
    gamma: float | None = None,
    samples: int = 100,
    seed: int = 0,
    P=None,
    fset: FeasibleSet | None = None,
) -> dict:
    """Evaluate stability / hinf / h2 for every product vertex and sampled members.

    Vertex checks alone are necessary; set-wide claims need a common
    quadratic certificate (pass P), otherwise the report is flagged
    necessary_only.  Members are sampled by per-row hit-and-run when the
    H-representation is supplied, else by convex combinations of
    vertices.
    """
    if criterion not in ("stability", "hinf", "h2"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if criterion in ("hinf", "h2"):
        if perf is None or gamma is None:
            raise ValueError("hinf/h2 criteria need perf (C, D) and gamma")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    systems = list(product_vertices(vertices))
    n_vertices = len(systems)
    if fset is not None:
        rows_pts = [hit_and_run(row, samples, seed=seed + j) for j, row in enumerate(fset.rows)]
        for s in range(samples):
            sigma = np.array([rows_pts[j][s] for j in range(vertices.n)])
            systems.append(SystemPair(A=sigma[:, : vertices.n], B=sigma[:, vertices.n :]))
    else:
        systems.extend(convex_combinations(vertices, samples, seed))

    values, ok = [], []
    for sp in systems:
        A_cl = sp.A + sp.B @ K
        rho = spectral_radius(A_cl)
        if criterion == "stability":
            values.append(rho)
            ok.append(rho < 1.0)
        else:
            if rho >= 1.0:
                values.append(np.inf)
                ok.append(False)
                continue
            cl = ClosedLoop(A_cl=A_cl, C=perf.C, D=perf.D)
            v = hinf_norm(cl) if criterion == "hinf" else h2_norm(cl)
            values.append(v)
            ok.append(v <= gamma * (1.0 + 1e-6))
    report = {
        "criterion": criterion,
        "gamma": gamma,
        "passed": bool(all(ok)),
        "vertex_values": values[:n_vertices],
        "sample_values": values[n_vertices:],
        "worst_value": float(np.max(values)),
        "samples": samples,
        "seed": seed,
        "necessary_only": criterion == "stability" and P is None,
    }
    if criterion == "stability" and P is not None:
        cert = verify_quadratic(K, P, vertices, samples=samples, seed=seed)
        report["quadratic_certificate"] = cert
        report["passed"] = bool(report["passed"] and cert["passed"])
        report["necessary_only"] = False
    return report
