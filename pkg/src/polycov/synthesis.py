"""State-feedback synthesis over the data-consistent set.

Two regimes: the scalar single-instrument case with an unbounded set is
handled through the two boundary (hyperplane) systems, either directly or
via a small LMI pair; the bounded case instantiates one LMI block per
product vertex for quadratic stabilization and for common H2/Hinf
performance, recovering the gain as K = M Y^{-1}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from polycov.data import CrossCovBounds, CrossCovSummary
from polycov.feasible import BOUNDED, FeasibleSet, UNBOUNDED, is_empty
from polycov.lmi import DecisionVar, LmiBlock, LmiProblem, solve_feasibility
from polycov.polytope import VertexSet, enumerate_vertices, product_vertices

FEASIBLE = "feasible"
CONDITION_NOT_MET = "condition_not_met"  # a sufficient condition failed; no converse claim
NOT_INFORMATIVE = "not_informative"  # backed by an iff characterization
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PerformanceSpec:
    """Performance channel z(t) = C x(t) + D w(t) for the disturbance w entering the state directly."""

    C: np.ndarray
    D: np.ndarray
    gamma: float | None = None
    kind: str = "hinf"

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.shape != C.shape:
            raise ValueError(f"C is {C.shape}, D must match (disturbance feedthrough is p x n)")
        if self.kind not in ("hinf", "h2"):
            raise ValueError("kind must be 'hinf' or 'h2'")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass
class SynthesisResult:
    status: str
    K: np.ndarray | None = None
    certificates: dict = field(default_factory=dict)
    achieved_gamma: float | None = None
    diagnostics: dict = field(default_factory=dict)


def _scalar_moments(summary: CrossCovSummary, bounds: CrossCovBounds):
    if summary.n != 1 or summary.m != 1 or summary.M != 1:
        raise ValueError("scalar path requires n = m = 1 with a single instrument")
    if bounds.M != 1 or bounds.n != 1:
        raise ValueError("bounds must be 1x1 for the scalar path")
    g = float(summary.Rxr_minus[0, 0])
    h = float(summary.Rxr_plus[0, 0])
    u = float(summary.Rur_minus[0, 0])
    return g, h, u, float(bounds.C_l[0, 0]), float(bounds.C_u[0, 0])


def stabilize_scalar_unbounded(summary: CrossCovSummary, bounds: CrossCovBounds) -> SynthesisResult:
    """Boundary-system test for the scalar, single-instrument, unbounded set.

    The set is a strip between two parallel hyperplanes; if the two
    boundary closed-loop values (Rxr_plus - c)/Rxr_minus are both inside
    the unit circle, K = Rur_minus / Rxr_minus stabilizes every member.
    A failed check is reported as condition_not_met: the criterion is
    sufficient only.
    """
    g, h, u, c_l, c_u = _scalar_moments(summary, bounds)
    if abs(g) < 1e-12 * (1.0 + abs(h) + abs(u)):
        raise ValueError("instrument uncorrelated with the state (Rxr_minus ~ 0); boundary-system gain undefined")
    edge_lo = (h - c_u) / g
    edge_hi = (h - c_l) / g
    diag = {"boundary_systems": [edge_lo, edge_hi]}
    if abs(edge_lo) < 1.0 and abs(edge_hi) < 1.0:
        K = np.array([[u / g]])
        return SynthesisResult(status=FEASIBLE, K=K, certificates={}, diagnostics=diag)
    return SynthesisResult(status=CONDITION_NOT_MET, diagnostics=diag)


def stabilize_scalar_unbounded_lmi(
    summary: CrossCovSummary, bounds: CrossCovBounds, epsilon: float | None = None
) -> SynthesisResult:
    """LMI form of the boundary-system test over a scalar multiplier Theta.

    Feasibility of the pair [[g*Th, h*Th], [h*Th, g*Th]] > 0 for both
    boundary offsets h certifies the same sufficient condition; the gain
    Rur*Theta*(Rxr*Theta)^{-1} reduces to Rur/Rxr in the scalar case.
    """
    g, h, u, c_l, c_u = _scalar_moments(summary, bounds)
    theta = DecisionVar("Theta", "scalar")
    blocks = []
    for c in (c_l, c_u):
        hh = h - c
        blocks.append(
            LmiBlock(
                constant=np.zeros((2, 2)),
                terms=[
                    ("Theta", [[g], [hh]], [[1.0, 0.0]]),
                    ("Theta", [[hh], [g]], [[0.0, 1.0]]),
                ],
                name=f"boundary offset {c}",
            )
        )
    res = solve_feasibility(LmiProblem(variables=[theta], blocks=blocks), epsilon=epsilon)
    diag = {"solver": res.diagnostics, "min_eig_report": res.min_eig_report}
    if res.status == "feasible":
        th = float(res.assignment["Theta"][0, 0])
        K = np.array([[(u * th) / (g * th)]])
        return SynthesisResult(status=FEASIBLE, K=K, certificates={"Theta": np.array([[th]])}, diagnostics=diag)
    if res.status == "infeasible":
        return SynthesisResult(status=CONDITION_NOT_MET, diagnostics=diag)
    return SynthesisResult(status=INCONCLUSIVE, diagnostics=diag)


def _selector(dim, offset, width):
    S = np.zeros((dim, width))
    S[offset : offset + width, :] = np.eye(width)
    return S


def _collect_vertices(vertices: VertexSet):
    if any(len(v) == 0 for v in vertices.per_row):
        raise ValueError("vertex set has an empty row; the feasible set is empty")
    sigmas = [sp.sigma for sp in product_vertices(vertices)]
    if not sigmas:
        raise ValueError("vertex set is empty")
    return sigmas


def stabilize_quadratic(vertices: VertexSet, epsilon: float | None = None) -> SynthesisResult:
    """Common quadratic stabilization via one LMI block per product vertex.

    Feasibility of [[Y, (sigma Z)^T], [sigma Z, Y]] > 0 with
    Z = col(Y, M) at every vertex is necessary and sufficient, so an
    infeasible system certifies that the data are not informative for
    quadratic stabilization.  On success K = M Y^{-1} and P = Y satisfies
    (A+BK) P (A+BK)^T - P < 0 on the whole set.
    """
    n, m = vertices.n, vertices.m
    sigmas = _collect_vertices(vertices)
    Y = DecisionVar("Y", "symmetric", n, n)
    Mv = DecisionVar("M", "rectangular", m, n)
    S1 = _selector(2 * n, 0, n)
    S2 = _selector(2 * n, n, n)
    blocks = []
    for i, sigma in enumerate(sigmas):
        A, B = sigma[:, :n], sigma[:, n:]
        blocks.append(
            LmiBlock(
                constant=np.zeros((2 * n, 2 * n)),
                terms=[
                    ("Y", S1, S1.T),
                    ("Y", S2, S2.T),
                    ("Y", 2.0 * S2 @ A, S1.T),
                    ("M", 2.0 * S2 @ B, S1.T),
                ],
                name=f"vertex {i}",
            )
        )
    res = solve_feasibility(LmiProblem(variables=[Y, Mv], blocks=blocks), epsilon=epsilon)
    diag = {"L": len(sigmas), "solver": res.diagnostics, "min_eig_report": res.min_eig_report}
    if res.status == "feasible":
        Yv, Mval = res.assignment["Y"], res.assignment["M"]
        K = Mval @ np.linalg.inv(Yv)
        certs = {"Y": Yv, "M": Mval, "P": Yv}
        return SynthesisResult(status=FEASIBLE, K=K, certificates=certs, diagnostics=diag)
    if res.status == "infeasible":
        return SynthesisResult(status=NOT_INFORMATIVE, diagnostics=diag)
    return SynthesisResult(status=INCONCLUSIVE, diagnostics=diag)


def _hinf_problem(sigmas, n, m, C, D, gamma):
    p = C.shape[0]
    dim = 3 * n + p
    Y = DecisionVar("Y", "symmetric", n, n)
    Mv = DecisionVar("M", "rectangular", m, n)
    S1 = _selector(dim, 0, n)
    S2 = _selector(dim, n, n)
    S3 = _selector(dim, 2 * n, n)
    S4 = _selector(dim, 3 * n, p)
    const = np.zeros((dim, dim))
    const[n : 2 * n, n : 2 * n] = gamma * np.eye(n)
    const[n : 2 * n, 2 * n : 3 * n] = np.eye(n)
    const[2 * n : 3 * n, n : 2 * n] = np.eye(n)
    const[n : 2 * n, 3 * n :] = D.T
    const[3 * n :, n : 2 * n] = D
    const[3 * n :, 3 * n :] = gamma * np.eye(p)
    blocks = []
    for i, sigma in enumerate(sigmas):
        A, B = sigma[:, :n], sigma[:, n:]
        blocks.append(
            LmiBlock(
                constant=const,
                terms=[
                    ("Y", S1, S1.T),
                    ("Y", S3, S3.T),
                    ("Y", 2.0 * S3 @ A, S1.T),
                    ("M", 2.0 * S3 @ B, S1.T),
                    ("Y", 2.0 * S4 @ C, S1.T),
                ],
                name=f"hinf vertex {i}",
            )
        )
    return LmiProblem(variables=[Y, Mv], blocks=blocks)


def _h2_problem(sigmas, n, m, C, D, gamma):
    p = C.shape[0]
    Y = DecisionVar("Y", "symmetric", n, n)
    Mv = DecisionVar("M", "rectangular", m, n)
    P = DecisionVar("P", "symmetric", p, p)
    dim1 = 2 * n + p
    S1 = _selector(dim1, 0, n)
    S3 = _selector(dim1, 2 * n, p)
    const1 = np.zeros((dim1, dim1))
    const1[n : 2 * n, n : 2 * n] = np.eye(n)
    const1[n : 2 * n, 2 * n :] = D.T
    const1[2 * n :, n : 2 * n] = D
    blocks = [
        LmiBlock(
            constant=const1,
            terms=[
                ("Y", S1, S1.T),
                ("Y", 2.0 * S3 @ C, S1.T),
                ("P", S3, S3.T),
            ],
            name="h2 output block",
        )
    ]
    dim2 = 3 * n
    T1 = _selector(dim2, 0, n)
    T2 = _selector(dim2, n, n)
    const2 = np.zeros((dim2, dim2))
    const2[0:n, 2 * n :] = np.eye(n)
    const2[2 * n :, 0:n] = np.eye(n)
    const2[2 * n :, 2 * n :] = gamma * np.eye(n)
    for i, sigma in enumerate(sigmas):
        A, B = sigma[:, :n], sigma[:, n:]
        blocks.append(
            LmiBlock(
                constant=const2,
                terms=[
                    ("Y", T1, T1.T),
                    ("Y", T2, T2.T),
                    ("Y", 2.0 * T1 @ A, T2.T),
                    ("M", 2.0 * T1 @ B, T2.T),
                ],
                name=f"h2 vertex {i}",
            )
        )
    # trace P < gamma as a 1x1 block
    trace_terms = []
    for i in range(p):
        e = np.zeros((p, 1))
        e[i, 0] = 1.0
        trace_terms.append(("P", -e.T, e))
    blocks.append(LmiBlock(constant=[[gamma]], terms=trace_terms, name="trace bound"))
    return LmiProblem(variables=[Y, Mv, P], blocks=blocks)


def _solve_perf(problem_builder, sigmas, n, m, perf, gamma, epsilon=None):
    res = solve_feasibility(problem_builder(sigmas, n, m, perf.C, perf.D, gamma), epsilon=epsilon)
    diag = {"L": len(sigmas), "gamma": gamma, "solver": res.diagnostics, "min_eig_report": res.min_eig_report}
    if res.status == "feasible":
        Yv, Mval = res.assignment["Y"], res.assignment["M"]
        K = Mval @ np.linalg.inv(Yv)
        certs = {"Y": Yv, "M": Mval}
        if "P" in res.assignment:
            certs["P"] = res.assignment["P"]
        return SynthesisResult(status=FEASIBLE, K=K, certificates=certs, achieved_gamma=gamma, diagnostics=diag)
    status = NOT_INFORMATIVE if res.status == "infeasible" else INCONCLUSIVE
    return SynthesisResult(status=status, diagnostics=diag)


def _bisect_gamma(solve_at, lo=1e-6, hi=1e6, rel_tol=1e-3):
    res_hi = solve_at(hi)
    if res_hi.status != FEASIBLE:
        return res_hi
    res_lo = solve_at(lo)
    if res_lo.status == FEASIBLE:
        return res_lo
    best = res_hi
    while hi / lo > 1.0 + rel_tol:
        mid = float(np.sqrt(lo * hi))
        r = solve_at(mid)
        if r.status == FEASIBLE:
            best, hi = r, mid
        else:
            lo = mid
    best.diagnostics["gamma_bracket"] = [lo, hi]
    return best


def synth_hinf(
    vertices: VertexSet,
    perf: PerformanceSpec,
    minimize_gamma: bool = False,
    epsilon: float | None = None,
) -> SynthesisResult:
    """Common Hinf design at level gamma over all product vertices (iff condition).

    With minimize_gamma, bisects to within 1e-3 relative of the smallest
    feasible level inside [1e-6, 1e6].
    """
    n, m = vertices.n, vertices.m
    if perf.C.shape[1] != n:
        raise ValueError(f"performance C must have {n} columns")
    sigmas = _collect_vertices(vertices)

    def solve_at(g):
        return _solve_perf(_hinf_problem, sigmas, n, m, perf, g, epsilon=epsilon)

    if minimize_gamma:
        return _bisect_gamma(solve_at)
    if perf.gamma is None:
        raise ValueError("gamma required unless minimize_gamma is set")
    return solve_at(perf.gamma)


def synth_h2(
    vertices: VertexSet,
    perf: PerformanceSpec,
    minimize_gamma: bool = False,
    epsilon: float | None = None,
) -> SynthesisResult:
    """Common H2 design at level gamma over all product vertices (iff condition)."""
    n, m = vertices.n, vertices.m
    if perf.C.shape[1] != n:
        raise ValueError(f"performance C must have {n} columns")
    sigmas = _collect_vertices(vertices)

    def solve_at(g):
        return _solve_perf(_h2_problem, sigmas, n, m, perf, g, epsilon=epsilon)

    if minimize_gamma:
        return _bisect_gamma(solve_at)
    if perf.gamma is None:
        raise ValueError("gamma required unless minimize_gamma is set")
    return solve_at(perf.gamma)


class UnsupportedSynthesis(ValueError):
    """Requested objective cannot be posed for this set (e.g. performance on an unbounded set)."""


class EmptySetError(ValueError):
    """The data-consistent set is empty; synthesis refused."""


def synthesize_from_set(
    fset: FeasibleSet,
    objective: str,
    perf: PerformanceSpec | None = None,
    minimize_gamma: bool = False,
    vertices: VertexSet | None = None,
    epsilon: float | None = None,
) -> SynthesisResult:
    """Dispatch on boundedness and objective; the CLI entry point into synthesis."""
    if objective not in ("stab", "hinf", "h2"):
        raise ValueError(f"unknown objective {objective!r}")
    if is_empty(fset):
        raise EmptySetError("the set of data-consistent systems is empty")
    if fset.bounded != BOUNDED:
        if objective != "stab":
            raise UnsupportedSynthesis("Hinf/H2 synthesis needs a bounded set of systems")
        if fset.n == 1 and fset.m == 1 and fset.rows[0].M == 1 and fset.bounded == UNBOUNDED:
            # the boundary test only needs hi/g and lo/g, so any (Rxr_plus, C_l, C_u)
            # split with Rxr_plus - C_l = hi and Rxr_plus - C_u = lo reproduces the strip
            row = fset.rows[0]
            summary = CrossCovSummary(
                Rxr_plus=np.array([[row.hi[0]]]),
                Rxr_minus=row.G[:1, :],
                Rur_minus=row.G[1:, :],
            )
            bounds = CrossCovBounds(C_l=np.zeros((1, 1)), C_u=np.array([[row.hi[0] - row.lo[0]]]))
            return stabilize_scalar_unbounded(summary, bounds)
        raise UnsupportedSynthesis(
            f"set is {fset.bounded}; synthesis without vertices is only supported "
            "in the scalar single-instrument case"
        )
    vs = vertices if vertices is not None else enumerate_vertices(fset)
    if objective == "stab":
        return stabilize_quadratic(vs, epsilon=epsilon)
    if perf is None:
        raise ValueError("hinf/h2 objectives need a PerformanceSpec")
    if objective == "hinf":
        return synth_hinf(vs, perf, minimize_gamma=minimize_gamma, epsilon=epsilon)
    return synth_h2(vs, perf, minimize_gamma=minimize_gamma, epsilon=epsilon)


def result_to_json_dict(res: SynthesisResult) -> dict:
    def arr(x):
        return None if x is None else np.asarray(x).tolist()

    margins = {}
    rep = res.diagnostics.get("min_eig_report")
    if rep:
        margins = {
            "worst_block_min_eig": min(r["min_eig"] for r in rep),
            "required": max(r["required"] for r in rep),
        }
    return {
        "K": arr(res.K),
        "certificates": {k: arr(v) for k, v in res.certificates.items()},
        "gamma": res.achieved_gamma,
        "status": res.status,
        "margins": margins,
    }


def save_result(res: SynthesisResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result_to_json_dict(res), fh, indent=1)
