"""POCS / Landweber reconstruction in five equivalent forms.

Given samples ``w = V x + d`` the iteration ``x <- P_U P_W x`` alternates the
projection onto the input space ``U`` with the projection onto the affine
data set ``W = {u : P_V u = w}``.  The same sequence of iterates arises from

``original``
    literal alternating projections on ambient elements,
``data_explicit``
    ``x + V*(w - V x)`` written in the coordinates of ``U``,
``landweber``
    unit-step Landweber on the orthonormal-weighted matrix of ``V``,
``discrete_data``
    ``x + V*(w - V x)`` through the signal-level operators,
``discrete_time``
    ``c <- c + (w0 - V V* c)`` with ``w0 = w - V x0`` and a single final
    conversion ``x = x0 + V* c``.

Operators only need the coordinate interface of
:class:`~pocsrec.kernel_space.SamplingOperator` (``coord_matrix``,
``weights``, ``gram``, ``weighted_matrix``, ``to_signal``, ``coords_of``,
``sample``, ``adjoint_apply``), which the multichannel operator shares.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._csv import write_rows
from .errors import DimensionMismatchError

__all__ = [
    "FORMS",
    "Problem",
    "AmbientElement",
    "IterationState",
    "ConvergenceReport",
    "SemiConvergenceAnalysis",
    "project_V",
    "project_W",
    "initial_state",
    "step",
    "materialize",
    "iterate",
    "least_squares_oracle",
    "analyze_semiconvergence",
    "stop_discrepancy",
]

FORMS = ("original", "data_explicit", "landweber", "discrete_data", "discrete_time")
MAX_ITERS = 10_000
CHANGE_TOL = 1e-12
PINV_RCOND = 1e-10
NULL_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Problem:
    """Reconstruction problem: operator, observed samples, optional truth.

    Parameters
    ----------
    op : SamplingOperator or compatible
    w : array_like
        Observed samples ``<x, v_k> + d_k``.
    truth : signal, optional
        Ground truth for error curves.
    """

    op: object
    w: np.ndarray
    truth: object = None

    def __post_init__(self):
        w = np.asarray(getattr(self.w, "values", self.w), dtype=np.float64)
        if w.shape != (self.op.n_samples,):
            raise DimensionMismatchError(
                f"expected {self.op.n_samples} samples, got shape {w.shape}")
        object.__setattr__(self, "w", w)

    @property
    def truth_coords(self):
        return None if self.truth is None else self.op.coords_of(self.truth)

    def residual(self, a) -> float:
        """``||w - V u||`` in the weighted space."""
        r = self.w - self.op.coord_matrix @ a
        return float(np.sqrt(np.sum(r * r / self.op.weights)))


@dataclass(frozen=True, eq=False)
class AmbientElement:
    """Element ``u = (band part) + sum_k alpha_k v_k`` of the ambient space.

    ``coords`` are coordinates of the band part in the basis of ``U``.
    """

    coords: np.ndarray
    alpha: np.ndarray

    @classmethod
    def from_signal(cls, op, u):
        return cls(np.array(op.coords_of(u), dtype=np.float64), np.zeros(op.n_samples))

    def samples(self, op) -> np.ndarray:
        """``<u, v_k>`` (kernels are orthogonal with norms ``W``)."""
        return op.coord_matrix @ self.coords + self.alpha * op.weights

    def project_U(self, op) -> np.ndarray:
        return self.coords + op.coord_matrix.T @ self.alpha


def project_V(op, u: AmbientElement) -> np.ndarray:
    """Coefficients of ``P_V u`` in the kernel basis, ``<u, v_k>/||v_k||^2``."""
    return u.samples(op) / op.weights


def project_W(op, u: AmbientElement, w) -> AmbientElement:
    """``P_W u = u + (w - P_V u)`` for ``w`` given by its samples ``<w, v_k>``."""
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    if w.shape != (op.n_samples,):
        raise DimensionMismatchError("sample vector has the wrong length")
    return AmbientElement(u.coords, u.alpha + (w - u.samples(op)) / op.weights)


@dataclass(frozen=True, eq=False)
class IterationState:
    """Iterate of one of the five forms.

    ``coords`` holds the signal iterate in ``U`` coordinates (unused by
    ``discrete_time`` until :func:`materialize`); ``c`` holds the coefficient
    iterate of ``discrete_time``.
    """

    form: str
    n: int
    x0: np.ndarray
    coords: np.ndarray | None = None
    c: np.ndarray | None = None

    def coords_now(self, op) -> np.ndarray:
        if self.form == "discrete_time":
            return self.x0 + op.adjoint_coords(self.c)
        return self.coords

    def signal(self, op):
        return op.to_signal(self.coords_now(op))


def initial_state(problem: Problem, form: str, x0=None) -> IterationState:
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}")
    op = problem.op
    a0 = np.zeros(op.n_coords) if x0 is None else np.array(op.coords_of(x0), dtype=np.float64)
    if form == "discrete_time":
        return IterationState(form, 0, a0, c=np.zeros(op.n_samples))
    return IterationState(form, 0, a0, coords=a0.copy())


def _w0(problem, state):
    return problem.w - problem.op.coord_matrix @ state.x0


def step(state: IterationState, problem: Problem, w0=None) -> IterationState:
    """Advance one iteration of ``state.form``."""
    op = problem.op
    w = problem.w
    f = state.form
    if f == "original":
        u = AmbientElement(state.coords, np.zeros(op.n_samples))
        a = project_W(op, u, w).project_U(op)
        return replace(state, n=state.n + 1, coords=a)
    if f == "data_explicit":
        B = op.coord_matrix
        a = state.coords + B.T @ ((w - B @ state.coords) / op.weights)
        return replace(state, n=state.n + 1, coords=a)
    if f == "landweber":
        Vt = op.weighted_matrix
        wt = w / np.sqrt(op.weights)
        a = state.coords + Vt.T @ (wt - Vt @ state.coords)
        return replace(state, n=state.n + 1, coords=a)
    if f == "discrete_data":
        x = op.to_signal(state.coords)
        r = w - op.sample(x).values
        a = (x + op.adjoint_apply(r)).coords
        return replace(state, n=state.n + 1, coords=a)
    if f == "discrete_time":
        if w0 is None:
            w0 = _w0(problem, state)
        c = state.c + (w0 - op.gram @ state.c)
        return replace(state, n=state.n + 1, c=c)
    raise ValueError(f"unknown form {f!r}")


def materialize(state: IterationState, op):
    """``x0 + V* c`` for the discrete-time form (identity for the others)."""
    return op.to_signal(state.coords_now(op))


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Per-iteration diagnostics; index ``i`` refers to iterate ``n[i]``."""

    n: np.ndarray
    residual: np.ndarray
    err_l2: np.ndarray | None = None
    err_sobolev: np.ndarray | None = None
    stop_reason: str = "max_iters"

    @property
    def argmin(self) -> int | None:
        if self.err_l2 is None:
            return None
        return int(self.n[int(np.argmin(self.err_l2))])

    def to_csv(self, path):
        blank = np.full(self.n.shape, np.nan)
        e2 = blank if self.err_l2 is None else self.err_l2
        es = blank if self.err_sobolev is None else self.err_sobolev
        write_rows(path, ["n", "residual_D", "err_l2", "err_sobolev"],
                   [(int(k), r, a, b) for k, r, a, b in zip(self.n, self.residual, e2, es)])


def iterate(problem: Problem, form: str = "discrete_time", n_iters: int = MAX_ITERS, x0=None,
            tol: float = CHANGE_TOL, record: bool = True):
    """Run ``n_iters`` iterations of one form.

    Parameters
    ----------
    problem : Problem
    form : str
        One of :data:`FORMS`.
    n_iters : int
        Iteration budget.
    x0 : signal, optional
        Initial guess in ``U`` (default zero).
    tol : float
        Stop once the relative iterate change drops to ``tol`` (``0`` disables).
    record : bool
        Collect residual and error curves.

    Returns
    -------
    signal, ConvergenceReport, IterationState
    """
    op = problem.op
    state = initial_state(problem, form, x0)
    w0 = _w0(problem, state) if form == "discrete_time" else None
    truth = problem.truth_coords
    omega = getattr(op, "sobolev_weights", None)
    ns, res, e2, es = [], [], [], []

    def log(st):
        a = st.coords_now(op)
        ns.append(st.n)
        res.append(problem.residual(a))
        if truth is not None:
            e = a - truth
            e2.append(float(np.linalg.norm(e)))
            if omega is not None:
                es.append(float(np.linalg.norm(omega * e)))

    if record:
        log(state)
    reason = "max_iters"
    prev = state.coords_now(op) if tol > 0 else None
    for _ in range(n_iters):
        state = step(state, problem, w0)
        if record:
            log(state)
        if tol > 0:
            cur = state.coords_now(op)
            if np.linalg.norm(cur - prev) <= tol * max(np.linalg.norm(cur), 1e-300):
                reason = "converged"
                break
            prev = cur
    report = ConvergenceReport(
        np.array(ns, dtype=np.int64), np.array(res),
        np.array(e2) if truth is not None and record else None,
        np.array(es) if es else None, reason)
    return materialize(state, op), report, state


def least_squares_oracle(problem: Problem, x0=None, rcond: float = PINV_RCOND):
    """Least-squares solution closest to ``x0``.

    Minimizes ``||w - V u||`` over ``u`` in ``U`` via the SVD pseudoinverse of
    the weighted matrix, applied to ``w - V x0``.
    """
    op = problem.op
    a0 = np.zeros(op.n_coords) if x0 is None else np.asarray(op.coords_of(x0), dtype=np.float64)
    sw = np.sqrt(op.weights)
    r = (problem.w - op.coord_matrix @ a0) / sw
    return op.to_signal(a0 + np.linalg.pinv(op.weighted_matrix, rcond=rcond) @ r)


@dataclass(frozen=True, eq=False)
class SemiConvergenceAnalysis:
    """Singular-system prediction of Landweber error curves.

    With ``V = sum sigma_i psi_i phi_i^T`` the modal errors obey
    ``e_i(n) = mu_i^n e_i(0) + (1 - mu_i^n) d_i / sigma_i`` with
    ``mu_i = 1 - sigma_i^2``; null modes (``sigma_i = 0``) stay at ``e_i(0)``.
    """

    sigma: np.ndarray
    mu: np.ndarray
    e0: np.ndarray
    d: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray

    def modal_errors(self, n: int) -> np.ndarray:
        s = self.sigma
        out = self.e0.copy()
        pos = s > 0
        # mu^n and 1 - mu^n without cancellation
        lg = n * np.log1p(-s[pos] ** 2) if n else np.zeros(pos.sum())
        out[pos] = np.exp(lg) * self.e0[pos] - np.expm1(lg) * self.d[pos] / s[pos]
        return out

    def total_error(self, ns) -> np.ndarray:
        return np.array([np.linalg.norm(self.modal_errors(int(n))) for n in np.atleast_1d(ns)])

    def limit_modal(self) -> np.ndarray:
        out = self.e0.copy()
        pos = self.sigma > 0
        out[pos] = self.d[pos] / self.sigma[pos]
        return out


def analyze_semiconvergence(problem: Problem, x0=None, noise=None, truth=None,
                            rtol: float = NULL_RTOL) -> SemiConvergenceAnalysis:
    """Modal error model of the Landweber iteration.

    Parameters
    ----------
    problem : Problem
    x0 : signal, optional
        Initial guess (default zero).
    noise : array_like, optional
        Data noise ``d`` in sample units; defaults to ``w - V truth``.
    truth : signal, optional
        Ground truth; defaults to ``problem.truth``.
    """
    op = problem.op
    truth = problem.truth if truth is None else truth
    if truth is None:
        raise ValueError("ground truth is required")
    at = np.asarray(op.coords_of(truth), dtype=np.float64)
    a0 = np.zeros(op.n_coords) if x0 is None else np.asarray(op.coords_of(x0), dtype=np.float64)
    d = problem.w - op.coord_matrix @ at if noise is None else np.asarray(noise, dtype=np.float64)
    Vt = op.weighted_matrix
    U, s, Yt = np.linalg.svd(Vt, full_matrices=True)
    n = Yt.shape[0]
    sig = np.zeros(n)
    k = s.shape[0]
    sig[:k] = s
    cut = rtol * (s[0] if k else 0.0)
    sig[sig <= cut] = 0.0
    dt = d / np.sqrt(op.weights)
    dmod = np.zeros(n)
    r = min(k, n)
    dmod[:r] = U[:, :r].T @ dt
    return SemiConvergenceAnalysis(sig, 1.0 - sig ** 2, Yt @ (a0 - at), dmod, Yt.T, U)


def stop_discrepancy(report: ConvergenceReport, noise_level: float, tau: float = 1.02) -> int:
    """First iterate with residual at most ``tau * noise_level`` (last if none)."""
    hit = np.flatnonzero(report.residual <= tau * noise_level)
    return int(report.n[hit[0]]) if hit.size else int(report.n[-1])
