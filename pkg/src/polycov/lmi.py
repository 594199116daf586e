"""Affine matrix-inequality modeling and a dense interior-point feasibility solver.

A problem is a family of blocks, each an affine symmetric-matrix function
of named decision variables, required to be >= eps*I (or <= -eps*I).
Feasibility is decided by embedding the system into a margin-maximization
program  max t  s.t.  block(y) - t I >= 0  (plus a box on y and a cap on
t) and running a primal-dual path-following method on it.  Infeasibility
is only ever claimed when the dual iterate validates, on a separate code
path, as a certificate for the strict alternative: W >= 0, W != 0 with
<A_k, W> = 0 for every coefficient and <C, W> <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_KINDS = ("symmetric", "rectangular", "scalar")


@dataclass(frozen=True)
class DecisionVar:
    """A named unknown: symmetric d x d, rectangular p x q, or scalar."""

    name: str
    kind: str
    rows: int = 1
    cols: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if self.kind == "symmetric" and self.rows != self.cols:
            raise ValueError("symmetric variables must be square")
        if self.kind == "scalar" and (self.rows, self.cols) != (1, 1):
            raise ValueError("scalar variables are 1x1")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("dimensions must be positive")

    @property
    def n_params(self) -> int:
        if self.kind == "symmetric":
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def basis(self):
        """Matrices B_k with V = sum_k theta_k B_k over the free parameters."""
        p, q = self.rows, self.cols
        mats = []
        if self.kind == "symmetric":
            for i in range(p):
                for j in range(i, p):
                    B = np.zeros((p, p))
                    B[i, j] = 1.0
                    B[j, i] = 1.0
                    mats.append(B)
        else:
            for i in range(p):
                for j in range(q):
                    B = np.zeros((p, q))
                    B[i, j] = 1.0
                    mats.append(B)
        return mats

    def from_params(self, theta: np.ndarray) -> np.ndarray:
        V = np.zeros((self.rows, self.cols))
        for th, B in zip(theta, self.basis()):
            V += th * B
        return V


@dataclass(frozen=True)
class LmiBlock:
    """One block: sym(constant + sum_k L_k var_k^(T) R_k), with sense ">=eps" or "<=-eps".

    sym(X) = (X + X^T)/2 is applied to the total, so a one-sided
    off-diagonal placement must carry a factor 2 to survive
    symmetrization; diagonal placements of symmetric variables need no
    factor.
    """

    constant: np.ndarray
    terms: list  # (var_name, L, R, transpose) tuples
    sense: str = "psd"  # "psd": >= eps I, "nsd": <= -eps I
    name: str = ""

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.constant, dtype=float))
        if C.shape[0] != C.shape[1]:
            raise ValueError("block constant must be square")
        if self.sense not in ("psd", "nsd"):
            raise ValueError("sense must be 'psd' or 'nsd'")
        terms = []
        for t in self.terms:
            var, L, R = t[0], np.atleast_2d(np.asarray(t[1], float)), np.atleast_2d(np.asarray(t[2], float))
            transpose = bool(t[3]) if len(t) > 3 else False
            if L.shape[0] != C.shape[0] or R.shape[1] != C.shape[0]:
                raise ValueError(f"term for {var!r} has outer dimensions {L.shape[0]}x{R.shape[1]}, block is {C.shape[0]}")
            terms.append((var, L, R, transpose))
        object.__setattr__(self, "constant", C)
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self) -> int:
        return self.constant.shape[0]


@dataclass(frozen=True)
class LmiProblem:
    variables: list
    blocks: list
    epsilon: float | None = None  # base margin; eps_b = epsilon*(1+||constant_b||_F)

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        by_name = {v.name: v for v in self.variables}
        for blk in self.blocks:
            for var, L, R, transpose in blk.terms:
                if var not in by_name:
                    raise ValueError(f"block references undeclared variable {var!r}")
                v = by_name[var]
                shape = (v.cols, v.rows) if transpose else (v.rows, v.cols)
                if L.shape[1] != shape[0] or R.shape[0] != shape[1]:
                    raise ValueError(f"term for {var!r} has inner dimensions incompatible with {shape}")

    def var(self, name: str) -> DecisionVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)


def _sym(X):
    return 0.5 * (X + X.T)


def assemble_block(blk: LmiBlock, assignment: dict) -> np.ndarray:
    """Block value from a matrix-level assignment (independent of the solver path)."""
    X = blk.constant.copy()
    for var, L, R, transpose in blk.terms:
        V = np.atleast_2d(np.asarray(assignment[var], dtype=float))
        X = X + L @ (V.T if transpose else V) @ R
    return _sym(X)


def block_epsilons(problem: LmiProblem) -> np.ndarray:
    base = 1e-7 if problem.epsilon is None else float(problem.epsilon)
    if base <= 0:
        raise ValueError("epsilon must be positive")
    return np.array([base * (1.0 + np.linalg.norm(_sym(b.constant), "fro")) for b in problem.blocks])


def evaluate_blocks(problem: LmiProblem, assignment: dict) -> list:
    """Minimum-eigenvalue report per block, oriented so positive margins mean satisfied."""
    eps = block_epsilons(problem)
    report = []
    for blk, e in zip(problem.blocks, eps):
        X = assemble_block(blk, assignment)
        if blk.sense == "nsd":
            X = -X
        lam = float(np.linalg.eigvalsh(X)[0])
        report.append(
            {
                "name": blk.name,
                "dim": blk.dim,
                "min_eig": lam,
                "required": float(e),
                "satisfied": bool(lam >= e),
            }
        )
    return report


def format_problem(problem: LmiProblem) -> str:
    """Plain-text dump of the block system for debugging."""
    lines = []
    for v in problem.variables:
        lines.append(f"var {v.name}: {v.kind} {v.rows}x{v.cols}")
    for i, blk in enumerate(problem.blocks):
        sense = ">= eps*I" if blk.sense == "psd" else "<= -eps*I"
        lines.append(f"block {i} {blk.name!r} dim {blk.dim} {sense}")
        lines.append("  constant:\n" + np.array_str(_sym(blk.constant), precision=6))
        for var, L, R, transpose in blk.terms:
            tflag = "^T" if transpose else ""
            lines.append(f"  + L * {var}{tflag} * R with")
            lines.append("    L:\n" + np.array_str(L, precision=6))
            lines.append("    R:\n" + np.array_str(R, precision=6))
    return "\n".join(lines)


@dataclass
class FeasibilityResult:
    status: str  # "feasible" | "infeasible" | "inconclusive"
    assignment: dict
    min_eig_report: list
    diagnostics: dict = field(default_factory=dict)


def _vectorize(problem: LmiProblem):
    """Per-block constant (eps-shifted) and per-parameter coefficient matrices."""
    eps = block_epsilons(problem)
    offsets, total = {}, 0
    for v in problem.variables:
        offsets[v.name] = total
        total += v.n_params
    Cs, Corig, As = [], [], []
    for blk, e in zip(problem.blocks, eps):
        sgn = -1.0 if blk.sense == "nsd" else 1.0
        C = sgn * _sym(blk.constant)
        A = np.zeros((total, blk.dim, blk.dim))
        for var, L, R, transpose in blk.terms:
            v = problem.var(var)
            for k, B in enumerate(v.basis()):
                Bt = B.T if transpose else B
                A[offsets[var] + k] += sgn * _sym(L @ Bt @ R)
        Corig.append(C)
        Cs.append(C - e * np.eye(blk.dim))
        As.append(A)
    return Cs, Corig, As, offsets, total, eps


def _step_to_boundary(S, D):
    """Largest alpha with S + alpha*D > 0, for S > 0 (inf if D has no negative part)."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return 0.0
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(_sym(Li @ D @ Li.T))[0]
    if lam >= -1e-16:
        return np.inf
    return -1.0 / lam


def _all_pd(mats) -> bool:
    for S in mats:
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return False
    return True


def _max_margin_ipm(Cs, As, max_iter=100, gap_tol=1e-9):
    """max t s.t. C_b + sum_j y_j A_bj - t I >= 0 for every block.

    Returns (t, y, W_blocks, info).  The caller supplies box/cap blocks;
    the objective variable is the last coordinate.
    """
    K = As[0].shape[0]  # includes t as last coordinate
    dims = [C.shape[0] for C in Cs]
    nu = float(sum(dims))
    b = np.zeros(K)
    b[-1] = 1.0

    u = np.zeros(K)
    u[-1] = min(min(np.linalg.eigvalsh(C)[0] for C in Cs), 0.0) - 1.0

    def blocks_at(uv):
        return [_sym(C + np.tensordot(uv, A, axes=(0, 0))) for C, A in zip(Cs, As)]

    Z = blocks_at(u)
    W = [np.eye(d) for d in dims]
    info = {"iterations": 0, "converged": False, "gap": np.inf, "dual_residual": np.inf}
    normA = max(1.0, max(np.max(np.abs(A)) for A in As))

    for it in range(max_iter):
        gap = sum(np.tensordot(Zb, Wb) for Zb, Wb in zip(Z, W))
        mu = gap / nu
        r = np.array([sum(np.tensordot(A[j], Wb) for A, Wb in zip(As, W)) for j in range(K)]) + b
        res = np.max(np.abs(r))
        info.update(iterations=it, gap=float(gap), dual_residual=float(res))
        if gap <= gap_tol * (1.0 + abs(u[-1])) and res <= 1e-8 * normA:
            info["converged"] = True
            break

        try:
            Zinv = [np.linalg.inv(Zb) for Zb in Z]
        except np.linalg.LinAlgError:
            break

        # Schur matrix H[j,l] = sum_b tr(A_bj Zinv_b A_bl W_b)
        H = np.zeros((K, K))
        for Ab, Zi, Wb in zip(As, Zinv, W):
            M = np.einsum("ij,ljk,km->lim", Zi, Ab, Wb)  # Zi A_l W per l
            H += np.einsum("jab,lba->jl", Ab, M)
        H = _sym(H)

        def directions(sigma_mu, Corr):
            rhs = r.copy()
            for idx, (Ab, Zi, Wb) in enumerate(zip(As, Zinv, W)):
                T = sigma_mu * Zi - Wb - (Zi @ Corr[idx] if Corr is not None else 0.0)
                rhs += np.einsum("jab,ba->j", Ab, T)
            try:
                du = np.linalg.solve(H, rhs)
            except np.linalg.LinAlgError:
                du = np.linalg.lstsq(H + 1e-12 * normA**2 * np.eye(K), rhs, rcond=None)[0]
            dZ = [np.tensordot(du, A, axes=(0, 0)) for A in As]
            dW = []
            for idx, (Zi, Wb) in enumerate(zip(Zinv, W)):
                dWb = sigma_mu * Zi - Wb - Zi @ (dZ[idx] @ Wb)
                if Corr is not None:
                    dWb = dWb - Zi @ Corr[idx]
                dW.append(_sym(dWb))
            return du, dZ, dW

        # predictor
        du_a, dZ_a, dW_a = directions(0.0, None)
        ap = min(1.0, 0.98 * min(_step_to_boundary(Zb, dZb) for Zb, dZb in zip(Z, dZ_a)))
        ad = min(1.0, 0.98 * min(_step_to_boundary(Wb, dWb) for Wb, dWb in zip(W, dW_a)))
        gap_aff = sum(
            np.tensordot(Zb + ap * dZb, Wb + ad * dWb)
            for Zb, dZb, Wb, dWb in zip(Z, dZ_a, W, dW_a)
        )
        sigma = min(1.0, max(0.0, (gap_aff / gap)) ** 3) if gap > 0 else 0.1

        # corrector
        Corr = [dZb @ dWb for dZb, dWb in zip(dZ_a, dW_a)]
        du, dZ, dW = directions(sigma * mu, Corr)
        ap = min(1.0, 0.98 * min(_step_to_boundary(Zb, dZb) for Zb, dZb in zip(Z, dZ)))
        ad = min(1.0, 0.98 * min(_step_to_boundary(Wb, dWb) for Wb, dWb in zip(W, dW)))
        if not (np.all(np.isfinite(du)) and ap > 1e-14 and ad > 1e-14):
            break
        # keep both iterates strictly inside the cone despite rounding
        accepted = False
        for _ in range(30):
            u_new = u + ap * du
            Z_new = blocks_at(u_new)
            W_new = [_sym(Wb + ad * dWb) for Wb, dWb in zip(W, dW)]
            if _all_pd(Z_new) and _all_pd(W_new):
                accepted = True
                break
            ap *= 0.5
            ad *= 0.5
        if not accepted:
            break
        u, Z, W = u_new, Z_new, W_new
    return u[-1], u[:-1], W, info


def solve_feasibility(
    problem: LmiProblem,
    max_iter: int = 100,
    tol: float = 1e-9,
    epsilon: float | None = None,
) -> FeasibilityResult:
    """Decide strict feasibility of the block system.

    "feasible" returns an assignment whose re-evaluated blocks all clear
    their eps margin; "infeasible" is only reported with a validated dual
    certificate for the strict alternative; anything else is
    "inconclusive".
    """
    if epsilon is not None:
        problem = LmiProblem(variables=problem.variables, blocks=problem.blocks, epsilon=epsilon)
    Cs, Corig, As, offsets, total, eps = _vectorize(problem)
    scale = max(1.0, max(np.linalg.norm(C, "fro") for C in Corig))

    # freeze parameters with no influence on any block
    influence = np.array([max(np.max(np.abs(A[k])) for A in As) for k in range(total)])
    active = influence > 1e-14 * max(1.0, influence.max() if total else 1.0)
    act_idx = np.flatnonzero(active)

    diag = {
        "epsilon": eps.tolist(),
        "scale": scale,
        "frozen_parameters": int(total - act_idx.size),
    }

    def unpack(y_active):
        y = np.zeros(total)
        y[act_idx] = y_active
        out = {}
        for v in problem.variables:
            off = offsets[v.name]
            out[v.name] = v.from_params(y[off : off + v.n_params])
        return out

    if act_idx.size == 0:
        assignment = unpack(np.zeros(0))
        report = evaluate_blocks(problem, assignment)
        if all(rec["satisfied"] for rec in report):
            return FeasibilityResult("feasible", assignment, report, diag)
        # constant-only: an eigenvector of the worst block certifies strict infeasibility
        worst = min(rec["min_eig"] for rec in report)
        status = "infeasible" if worst <= 0 else "inconclusive"
        return FeasibilityResult(status, assignment, report, diag)

    t_cap = scale
    box = 1e6 * scale
    k = act_idx.size

    ipm_C = [C.copy() for C in Cs]
    # active-parameter coefficients plus the margin variable t with coefficient -I
    ipm_A = []
    for A in As:
        d = A.shape[1]
        ipm_A.append(np.concatenate([A[act_idx], -np.eye(d)[None]], axis=0))
    # y box blocks: box - y_i >= 0 and box + y_i >= 0 (no t coefficient)
    for j in range(k):
        for sgn in (-1.0, 1.0):
            C1 = np.array([[box]])
            A1 = np.zeros((k + 1, 1, 1))
            A1[j, 0, 0] = sgn
            ipm_C.append(C1)
            ipm_A.append(A1)
    # cap block: t_cap - t >= 0
    Ccap = np.array([[t_cap]])
    Acap = np.zeros((k + 1, 1, 1))
    Acap[k, 0, 0] = -1.0
    ipm_C.append(Ccap)
    ipm_A.append(Acap)

    t_star, y_active, W, info = _max_margin_ipm(ipm_C, ipm_A, max_iter=max_iter, gap_tol=tol * scale)
    diag["margin"] = float(t_star)
    diag["ipm"] = info

    assignment = unpack(y_active)
    report = evaluate_blocks(problem, assignment)
    if all(rec["satisfied"] for rec in report):
        return FeasibilityResult("feasible", assignment, report, diag)

    # certificate check for the strict alternative, on the matrix blocks only
    nmat = len(Cs)
    Wmat = [_sym(Wb) for Wb in W[:nmat]]
    s = sum(np.trace(Wb) for Wb in Wmat)
    if s > 1e-12:
        What = [Wb / s for Wb in Wmat]
        psd_ok = all(np.linalg.eigvalsh(Wb)[0] >= -1e-8 * max(1.0, np.linalg.eigvalsh(Wb)[-1]) for Wb in What)
        normA = max(1.0, max(np.linalg.norm(A[kk], "fro") for A in As for kk in act_idx))
        lin_viol = max(
            abs(sum(np.tensordot(A[kk], Wb) for A, Wb in zip(As, What)))
            for kk in act_idx
        )
        c_val = sum(np.tensordot(C, Wb) for C, Wb in zip(Corig, What))
        diag["certificate"] = {
            "psd_ok": bool(psd_ok),
            "linear_violation": float(lin_viol),
            "objective_value": float(c_val),
        }
        if psd_ok and lin_viol <= 1e-7 * normA and c_val <= 1e-7 * scale:
            return FeasibilityResult("infeasible", assignment, report, diag)
    return FeasibilityResult("inconclusive", assignment, report, diag)
