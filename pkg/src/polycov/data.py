"""Trajectory data, instrumental signals, cross-covariance summaries and noise-bound checks.

Conventions: states are columns of X (n x (N+1)), inputs columns of
U_minus (m x N).  The sample cross-covariance between an instrument row
r_i and a noise channel e_j is (1/sqrt(N)) * sum_t r_i(t) e_j(t), stored
entrywise as the (i, j) entry of an M x n matrix.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got ndim={a.ndim}")
    return a


@dataclass(frozen=True)
class TrajectoryData:
    """Input-state data: X holds x(0..N), U_minus holds u(0..N-1).

    E_minus is the (simulation-only) noise record e(0..N-1); when present
    the shifted data satisfy X_plus = A0 X_minus + B0 U_minus + E_minus
    exactly for the generating system.
    """

    n: int
    m: int
    X: np.ndarray
    U_minus: np.ndarray
    E_minus: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "X", _as_matrix(self.X, "X"))
        object.__setattr__(self, "U_minus", _as_matrix(self.U_minus, "U_minus"))
        if self.n < 1 or self.m < 1:
            raise ValueError("state and input dimensions must be positive")
        if self.X.shape[0] != self.n:
            raise ValueError(f"X has {self.X.shape[0]} rows, expected n={self.n}")
        if self.U_minus.shape[0] != self.m:
            raise ValueError(f"U_minus has {self.U_minus.shape[0]} rows, expected m={self.m}")
        if self.X.shape[1] != self.U_minus.shape[1] + 1:
            raise ValueError(
                f"X has {self.X.shape[1]} columns but U_minus has "
                f"{self.U_minus.shape[1]}; input length must be state length - 1"
            )
        if self.N < 1:
            raise ValueError("need at least one transition (N >= 1)")
        if self.E_minus is not None:
            E = _as_matrix(self.E_minus, "E_minus")
            if E.shape != (self.n, self.N):
                raise ValueError(f"E_minus must be {self.n}x{self.N}, got {E.shape}")
            object.__setattr__(self, "E_minus", E)

    @property
    def N(self) -> int:
        return self.X.shape[1] - 1

    @property
    def X_plus(self) -> np.ndarray:
        return self.X[:, 1:]

    @property
    def X_minus(self) -> np.ndarray:
        return self.X[:, :-1]


@dataclass(frozen=True)
class SystemPair:
    """A pair (A, B); sigma stacks them as the n x (n+m) matrix [A B]."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        return np.hstack([self.A, self.B])


@dataclass(frozen=True)
class InstrumentSet:
    """M instrumental signals; row i of R_minus is [r_i(0) ... r_i(N-1)]."""

    M: int
    R_minus: np.ndarray
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        R = _as_matrix(self.R_minus, "R_minus")
        if self.M != R.shape[0]:
            raise ValueError(f"M={self.M} but R_minus has {R.shape[0]} rows")
        object.__setattr__(self, "R_minus", R)

    @property
    def N(self) -> int:
        return self.R_minus.shape[1]


@dataclass(frozen=True)
class CrossCovBounds:
    """Entrywise bounds C_l <= (1/sqrt(N)) sum_t r_i(t) e_j(t) <= C_u, shape M x n."""

    C_l: np.ndarray
    C_u: np.ndarray

    def __post_init__(self):
        C_l = _as_matrix(self.C_l, "C_l")
        C_u = _as_matrix(self.C_u, "C_u")
        if C_l.shape != C_u.shape:
            raise ValueError(f"C_l shape {C_l.shape} != C_u shape {C_u.shape}")
        if np.any(C_l > C_u):
            i, j = np.argwhere(C_l > C_u)[0]
            raise ValueError(f"C_l > C_u at entry ({i}, {j})")
        object.__setattr__(self, "C_l", C_l)
        object.__setattr__(self, "C_u", C_u)

    @property
    def M(self) -> int:
        return self.C_l.shape[0]

    @property
    def n(self) -> int:
        return self.C_l.shape[1]


@dataclass(frozen=True)
class CrossCovSummary:
    """Normalized data moments: Rxr_plus, Rxr_minus (n x M) and Rur_minus (m x M).

    All three carry the 1/sqrt(N) scaling, so halfspace assembly against
    CrossCovBounds is a pure subtraction.
    """

    Rxr_plus: np.ndarray
    Rxr_minus: np.ndarray
    Rur_minus: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Rxr_plus", _as_matrix(self.Rxr_plus, "Rxr_plus"))
        object.__setattr__(self, "Rxr_minus", _as_matrix(self.Rxr_minus, "Rxr_minus"))
        object.__setattr__(self, "Rur_minus", _as_matrix(self.Rur_minus, "Rur_minus"))
        if self.Rxr_plus.shape != self.Rxr_minus.shape:
            raise ValueError("Rxr_plus and Rxr_minus must have equal shape")
        if self.Rur_minus.shape[1] != self.Rxr_plus.shape[1]:
            raise ValueError("Rur_minus column count must match Rxr_plus")

    @property
    def n(self) -> int:
        return self.Rxr_plus.shape[0]

    @property
    def m(self) -> int:
        return self.Rur_minus.shape[0]

    @property
    def M(self) -> int:
        return self.Rxr_plus.shape[1]


@dataclass(frozen=True)
class NoiseBoundReport:
    holds: bool
    slack_lower: np.ndarray  # statistic - C_l, nonnegative iff lower bounds hold
    slack_upper: np.ndarray  # C_u - statistic, nonnegative iff upper bounds hold
    statistic: np.ndarray  # (1/sqrt(N)) R_minus E_minus^T, M x n


def load_trajectory(path, n: int, m: int) -> TrajectoryData:
    """Read a trajectory CSV with header ``t,x1,...,xn,u1,...,um``.

    The final row (t = N) must leave the input cells empty.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        expected = ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, m + 1)]
        if [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: header {header} does not match {expected}")
        states, inputs = [], []
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows (N >= 1), got {len(rows)}")
    last = len(rows) - 1
    for k, row in enumerate(rows):
        if len(row) > 1 + n + m:
            raise ValueError(f"{path}: row {k} has {len(row)} cells, expected at most {1 + n + m}")
        try:
            t = int(float(row[0]))
            x = [float(c) for c in row[1 : 1 + n]]
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: row {k}: cannot parse state cells ({exc})") from None
        if t != k:
            raise ValueError(f"{path}: row {k} has t={t}, expected {k}")
        if len(x) != n:
            raise ValueError(f"{path}: row {k} has {len(x)} state cells, expected {n}")
        states.append(x)
        u_cells = [c.strip() for c in row[1 + n :]]
        if k < last:
            try:
                u = [float(c) for c in u_cells]
            except ValueError as exc:
                raise ValueError(f"{path}: row {k}: cannot parse input cells ({exc})") from None
            if len(u) != m:
                raise ValueError(f"{path}: row {k} has {len(u)} input cells, expected {m}")
            inputs.append(u)
        else:
            if any(u_cells):
                raise ValueError(
                    f"{path}: row {k} (t=N) must have empty input cells; "
                    "input length must be (state length - 1)"
                )
    X = np.array(states, dtype=float).T
    U = np.array(inputs, dtype=float).T
    return TrajectoryData(n=n, m=m, X=X, U_minus=U)


def save_trajectory(data: TrajectoryData, path, noise_path=None) -> None:
    """Write the trajectory CSV (and optionally a noise CSV with header t,e1,...,en)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(1, data.n + 1)] + [f"u{i}" for i in range(1, data.m + 1)])
        for t in range(data.N + 1):
            row = [t] + [repr(float(v)) for v in data.X[:, t]]
            row += [repr(float(v)) for v in data.U_minus[:, t]] if t < data.N else [""] * data.m
            w.writerow(row)
    if noise_path is not None:
        if data.E_minus is None:
            raise ValueError("trajectory carries no noise record")
        with open(noise_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"e{i}" for i in range(1, data.n + 1)])
            for t in range(data.N):
                w.writerow([t] + [repr(float(v)) for v in data.E_minus[:, t]])


def build_lagged_instruments(data: TrajectoryData, M: int, pre_samples=None) -> InstrumentSet:
    """Lagged-input instruments: the lag stack col(u(t), u(t-1), ...) truncated to M rows.

    Row k holds channel (k mod m) of u at lag (k div m).  Inputs at
    negative times come from ``pre_samples`` (m x (lags-1), column j is
    u(-(j+1))); they default to zero.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    m, N = data.m, data.N
    lags = -(-M // m)  # ceil
    if pre_samples is None:
        pre = np.zeros((m, lags - 1))
    else:
        pre = np.atleast_2d(np.asarray(pre_samples, dtype=float))
        if pre.shape != (m, lags - 1):
            raise ValueError(f"pre_samples must be {m}x{lags - 1}, got {pre.shape}")
    # extended input timeline u(-(lags-1)) ... u(N-1)
    ext = np.hstack([pre[:, ::-1], data.U_minus]) if lags > 1 else data.U_minus
    R = np.zeros((M, N))
    offset = lags - 1
    for k in range(M):
        lag, chan = divmod(k, m)
        R[k] = ext[chan, offset - lag : offset - lag + N]
    return InstrumentSet(M=M, R_minus=R, spec={"kind": "lagged_input", "lags": lags})


def cross_cov_summary(data: TrajectoryData, instr: InstrumentSet) -> CrossCovSummary:
    """Normalized moments (1/sqrt(N)) X_+ R_-^T, (1/sqrt(N)) X_- R_-^T, (1/sqrt(N)) U_- R_-^T."""
    if instr.N != data.N:
        raise ValueError(f"instrument length {instr.N} != data length {data.N}")
    s = 1.0 / math.sqrt(data.N)
    Rt = instr.R_minus.T
    return CrossCovSummary(
        Rxr_plus=s * (data.X_plus @ Rt),
        Rxr_minus=s * (data.X_minus @ Rt),
        Rur_minus=s * (data.U_minus @ Rt),
    )


def check_noise_bounds(E_minus, instr: InstrumentSet, bounds: CrossCovBounds) -> NoiseBoundReport:
    """Check the entrywise bounds on (1/sqrt(N)) sum_t r_i(t) e_j(t)."""
    E = _as_matrix(E_minus, "E_minus")
    if E.shape[1] != instr.N:
        raise ValueError(f"E_minus has {E.shape[1]} columns, instruments have {instr.N}")
    if bounds.M != instr.M or bounds.n != E.shape[0]:
        raise ValueError(
            f"bounds are {bounds.M}x{bounds.n}, expected {instr.M}x{E.shape[0]}"
        )
    stat = (instr.R_minus @ E.T) / math.sqrt(instr.N)
    slack_lower = stat - bounds.C_l
    slack_upper = bounds.C_u - stat
    holds = bool(np.all(slack_lower >= 0) and np.all(slack_upper >= 0))
    return NoiseBoundReport(holds=holds, slack_lower=slack_lower, slack_upper=slack_upper, statistic=stat)


def simulate(
    system: SystemPair,
    x0,
    U,
    noise_kind: str = "ball",
    noise_bound: float = 0.0,
    seed: int = 0,
) -> TrajectoryData:
    """Roll out x(t+1) = A x(t) + B u(t) + e(t) and record the drawn noise.

    noise_kind "ball" draws e(t) uniformly from {e : |e|^2 <= noise_bound};
    "uniform" draws each channel uniformly from [-noise_bound, noise_bound].
    Deterministic for a fixed seed; noise_bound 0 gives noiseless data.
    """
    U = _as_matrix(U, "U")
    n, m = system.n, system.m
    if U.shape[0] != m:
        raise ValueError(f"U has {U.shape[0]} rows, expected m={m}")
    N = U.shape[1]
    if N < 1:
        raise ValueError("need N >= 1 input samples")
    x0 = np.asarray(x0, dtype=float).reshape(n)
    rng = np.random.default_rng(seed)
    if noise_bound == 0.0:
        E = np.zeros((n, N))
    elif noise_kind == "ball":
        g = rng.standard_normal((n, N))
        norms = np.linalg.norm(g, axis=0)
        norms[norms == 0] = 1.0
        radii = math.sqrt(noise_bound) * rng.uniform(0.0, 1.0, size=N) ** (1.0 / n)
        E = g / norms * radii
    elif noise_kind == "uniform":
        E = rng.uniform(-noise_bound, noise_bound, size=(n, N))
    else:
        raise ValueError(f"unknown noise kind {noise_kind!r}")
    X = np.zeros((n, N + 1))
    X[:, 0] = x0
    for t in range(N):
        X[:, t + 1] = system.A @ X[:, t] + system.B @ U[:, t] + E[:, t]
    return TrajectoryData(n=n, m=m, X=X, U_minus=U, E_minus=E)


def load_bounds(path) -> CrossCovBounds:
    """Read bounds JSON {"M": int, "n": int, "C_l": [[...]], "C_u": [[...]]}."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        M, n = int(doc["M"]), int(doc["n"])
        C_l = np.asarray(doc["C_l"], dtype=float)
        C_u = np.asarray(doc["C_u"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed bounds file ({exc})") from None
    if C_l.shape != (M, n) or C_u.shape != (M, n):
        raise ValueError(f"{path}: bound matrices must be {M}x{n}")
    return CrossCovBounds(C_l=C_l, C_u=C_u)


def save_bounds(bounds: CrossCovBounds, path) -> None:
    doc = {
        "M": bounds.M,
        "n": bounds.n,
        "C_l": bounds.C_l.tolist(),
        "C_u": bounds.C_u.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_instrument_spec(path, data: TrajectoryData) -> InstrumentSet:
    """Build instruments from spec JSON.

    {"kind": "lagged_input", "lags": L} stacks all input channels for lags
    0..L-1 (M = L*m rows); {"kind": "explicit", "R_minus": [[...]]} uses the
    given matrix verbatim.
    """
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "lagged_input":
        lags = int(doc["lags"])
        if lags < 1:
            raise ValueError(f"{path}: lags must be >= 1")
        return build_lagged_instruments(data, M=lags * data.m)
    if kind == "explicit":
        R = np.asarray(doc["R_minus"], dtype=float)
        if R.ndim != 2 or R.shape[1] != data.N:
            raise ValueError(f"{path}: R_minus must have {data.N} columns")
        return InstrumentSet(M=R.shape[0], R_minus=R, spec={"kind": "explicit"})
    raise ValueError(f"{path}: unknown instrument kind {kind!r}")
