"""Sparse gradient-field recovery: FISTA for BPDN, CCS and DCS.

Unknowns are wavelet coefficients ``c`` of shape ``(2, N, N)``: ``c[0]``
synthesizes the x-gradient field on the square lenslet lattice, ``c[1]`` the
y-gradient field. Data fidelity only sees sampled lenslet cells; the
cross-derivative operator acts on the whole square.
"""
import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import wavelet


class SolverDivergence(RuntimeError):
    """A solver produced a non-finite iterate."""

    def __init__(self, iteration, what="objective"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


class LinOp:
    """Matrix-free linear operator between arrays of fixed shape."""

    def __init__(self, apply, apply_adjoint, in_shape, out_shape, name=""):
        self.apply = apply
        self.apply_adjoint = apply_adjoint
        self.in_shape = tuple(np.atleast_1d(in_shape))
        self.out_shape = tuple(np.atleast_1d(out_shape))
        self.name = name

    @property
    def in_dim(self):
        return int(np.prod(self.in_shape))

    @property
    def out_dim(self):
        return int(np.prod(self.out_shape))

    def __call__(self, x):
        return self.apply(x)

    @property
    def T(self):
        return LinOp(self.apply_adjoint, self.apply, self.out_shape, self.in_shape, self.name + ".T")

    def __matmul__(self, other):
        if isinstance(other, LinOp):
            return ComposedOp(self, other)
        return self.apply(other)

    def adjoint_error(self, trials=3, seed=0):
        """Largest relative mismatch of <A x, y> and <x, A^T y> over random probes."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(trials):
            x = rng.standard_normal(self.in_shape)
            y = rng.standard_normal(self.out_shape)
            Ax = self.apply(x)
            Aty = self.apply_adjoint(y)
            lhs = float(np.vdot(Ax, y))
            rhs = float(np.vdot(x, Aty))
            scale = np.linalg.norm(Ax) * np.linalg.norm(y) + np.linalg.norm(x) * np.linalg.norm(Aty)
            worst = max(worst, abs(lhs - rhs) / max(scale, 1e-300))
        return worst


class ComposedOp(LinOp):
    """``outer @ inner``; FISTA exploits a shared ``inner`` between A and B."""

    def __init__(self, outer, inner):
        if outer.in_shape != inner.out_shape:
            raise ValueError(f"shape mismatch: {outer.in_shape} vs {inner.out_shape}")
        self.outer = outer
        self.inner = inner
        super().__init__(
            lambda x: outer.apply(inner.apply(x)),
            lambda y: inner.apply_adjoint(outer.apply_adjoint(y)),
            inner.in_shape, outer.out_shape, f"{outer.name}@{inner.name}",
        )


def matrix_op(Amat):
    Amat = np.asarray(Amat, dtype=float)
    return LinOp(lambda x: Amat @ x, lambda y: Amat.T @ y, Amat.shape[1], Amat.shape[0], "matrix")


def identity_op(shape):
    return LinOp(lambda x: x, lambda y: y, shape, shape, "I")


@dataclass(frozen=True)
class SolverOpts:
    """Recovery settings.

    ``lam=None`` selects ``lam_frac * ||A^T b||_inf``. ``step=None`` derives
    the step from a power-iteration Lipschitz estimate.
    """

    lam: float = None
    lam_frac: float = 0.02
    delta: float = 0.5
    max_inner: int = 300
    max_outer: int = 30
    tol: float = 1e-6
    tol_constraint: float = 1e-4
    step: float = None

    def validate(self):
        for name in ("lam_frac", "delta", "tol", "tol_constraint"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")


def soft_threshold(v, t):
    if t < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _split(A, B):
    # factor A = P @ S and B = C @ S when both share S, so one synthesis per
    # iteration serves the data term and the constraint term
    if isinstance(A, ComposedOp) and (B is None or (isinstance(B, ComposedOp) and B.inner is A.inner)):
        return A.inner, A.outer, (B.outer if B is not None else None)
    return None, A, B


def lipschitz(A, B=None, delta=0.0, iters=50, rtol=1e-4, seed=0):
    """Largest eigenvalue of A^T A + delta B^T B by power iteration."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.in_shape)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = A.apply_adjoint(A.apply(x))
        if B is not None and delta:
            y = y + delta * B.apply_adjoint(B.apply(x))
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est


@dataclass
class FistaInfo:
    objective: np.ndarray
    n_iter: int
    lipschitz: float
    lam: float


def fista_bpdn(A, b, opts, extra_quad=None, x0=None, lip=None, full_output=False):
    """FISTA for min 1/2||A c - b||^2 + lam ||c||_1 [+ delta/2 ||B c + p||^2].

    ``extra_quad`` is ``(B, p, delta)``. Iteration stops when the relative
    change of c drops below ``opts.tol`` or after ``opts.max_inner`` steps.
    """
    opts.validate()
    b = np.asarray(b, dtype=float).reshape(A.out_shape)
    B, p, delta = extra_quad if extra_quad is not None else (None, None, 0.0)
    if B is not None:
        p = np.asarray(p, dtype=float).reshape(B.out_shape)
    S, P, C = _split(A, B)
    fwd = S.apply if S is not None else (lambda v: v)
    adj = S.apply_adjoint if S is not None else (lambda v: v)

    lam = opts.lam if opts.lam is not None else opts.lam_frac * np.abs(A.apply_adjoint(b)).max()
    if opts.step is not None:
        step = opts.step
        lip = 1.0 / step
    else:
        if lip is None:
            lip = 1.01 * lipschitz(A, B, delta)
        step = 1.0 / lip if lip > 0 else 1.0

    x = np.zeros(A.in_shape) if x0 is None else np.array(x0, dtype=float).reshape(A.in_shape)
    Fx = fwd(x)
    Fx_prev = Fx
    x_prev = x
    tau = 1.0
    beta = 0.0
    trace = []
    it = 0
    for it in range(1, opts.max_inner + 1):
        y = x + beta * (x - x_prev) if beta else x
        Fy = Fx + beta * (Fx - Fx_prev) if beta else Fx
        g = P.apply_adjoint(P.apply(Fy) - b)
        if C is not None:
            g = g + delta * C.apply_adjoint(C.apply(Fy) + p)
        x_new = soft_threshold(y - step * adj(g), step * lam)
        Fx_prev, Fx = Fx, fwd(x_new)

        r = P.apply(Fx) - b
        obj = 0.5 * float(np.vdot(r, r)) + lam * float(np.abs(x_new).sum())
        if C is not None:
            q = C.apply(Fx) + p
            obj += 0.5 * delta * float(np.vdot(q, q))
        if not np.isfinite(obj):
            raise SolverDivergence(it)
        trace.append(obj)

        nrm = np.linalg.norm(x_new)
        change = np.linalg.norm(x_new - x) / nrm if nrm > 0 else np.linalg.norm(x_new - x)
        tau_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tau * tau))
        beta = (tau - 1.0) / tau_new
        tau = tau_new
        x_prev, x = x, x_new
        if change < opts.tol:
            break
    if full_output:
        return x, FistaInfo(np.array(trace), it, lip, lam)
    return x


class SquareLayout:
    """Lenslets on the ``n_grid x n_grid`` square used for the wavelet embedding."""

    def __init__(self, n_grid, flat_cells, spec=wavelet.DEFAULT_SPEC):
        self.n_grid = int(n_grid)
        self.flat_cells = np.asarray(flat_cells, dtype=int)
        self.spec = spec
        spec.check_shape((self.n_grid, self.n_grid))

    @classmethod
    def from_lenslets(cls, lenslets, spec=wavelet.DEFAULT_SPEC):
        return cls(lenslets.n_grid, lenslets.flat_cells, spec)

    @property
    def M(self):
        return self.flat_cells.size

    @property
    def pupil(self):
        m = np.zeros(self.n_grid * self.n_grid, dtype=bool)
        m[self.flat_cells] = True
        return m.reshape(self.n_grid, self.n_grid)

    def gather(self, field2):
        """Per-lenslet values of a square field."""
        return np.asarray(field2).ravel()[self.flat_cells]


def make_synthesis_op(N, spec=wavelet.DEFAULT_SPEC):
    """W on both channels: coefficients (2, N, N) -> fields (2, N, N)."""
    spec.check_shape((N, N))
    shape = (2, N, N)

    def apply(c):
        return np.stack([wavelet.inverse(c[0], spec), wavelet.inverse(c[1], spec)])

    def adjoint(f):
        return np.stack([wavelet.forward(f[0], spec), wavelet.forward(f[1], spec)])

    return LinOp(apply, adjoint, shape, shape, "W")


def make_sampling_op(layout, keep_x, keep_y):
    """Psi on both channels: fields (2, N, N) -> stacked samples [b_x; b_y]."""
    N = layout.n_grid
    cx = layout.flat_cells[np.asarray(keep_x, dtype=int)]
    cy = layout.flat_cells[np.asarray(keep_y, dtype=int)] + N * N
    cells = np.concatenate([cx, cy])
    shape = (2, N, N)

    def apply(f):
        return f.reshape(-1)[cells]

    def adjoint(v):
        out = np.zeros(2 * N * N)
        out[cells] = v
        return out.reshape(shape)

    return LinOp(apply, adjoint, shape, cells.size, "Psi")


def curl_fields(f):
    """Forward-difference ``D_y f_x - D_x f_y`` on the valid (N-1)^2 region."""
    fx, fy = f[0], f[1]
    return (fx[1:, :-1] - fx[:-1, :-1]) - (fy[:-1, 1:] - fy[:-1, :-1])


def _curl_adjoint(r, N):
    out = np.zeros((2, N, N))
    out[0, 1:, :-1] += r
    out[0, :-1, :-1] -= r
    out[1, :-1, 1:] -= r
    out[1, :-1, :-1] += r
    return out


def make_curl_op(N):
    if N < 2:
        raise ValueError("N must be >= 2")
    return LinOp(curl_fields, lambda r: _curl_adjoint(r, N), (2, N, N), (N - 1, N - 1), "D")


def make_cross_derivative_op(N, layout=None, spec=None, synthesis=None):
    """B c = D_y(W c_x) - D_x(W c_y).

    Pass ``synthesis`` to share the W operator with a data operator so
    FISTA runs one synthesis per iteration.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if synthesis is None:
        if spec is None:
            spec = layout.spec if layout is not None else wavelet.DEFAULT_SPEC
        synthesis = make_synthesis_op(N, spec)
    return ComposedOp(make_curl_op(N), synthesis)


@dataclass
class RecoveryResult:
    """Recovered coefficients, square-embedded gradient fields and traces.

    For CCS the traces are per FISTA iteration and the constraint entries are
    NaN; for DCS they are per outer Bregman iteration.
    """

    c: np.ndarray
    f_x: np.ndarray
    f_y: np.ndarray
    objective: np.ndarray
    constraint: np.ndarray
    lam: float
    converged: bool = True
    inner_iters: list = field(default_factory=list)

    @property
    def n_iter(self):
        return len(self.objective)


def _problem(m, layout):
    if m.M != layout.M:
        raise ValueError(f"measurement has M={m.M}, layout has {layout.M} lenslets")
    S = make_synthesis_op(layout.n_grid, layout.spec)
    A = ComposedOp(make_sampling_op(layout, m.keep_x, m.keep_y), S)
    B = make_cross_derivative_op(layout.n_grid, synthesis=S)
    b = m.b
    if not np.all(np.isfinite(b)):
        raise ValueError("measurement contains non-finite values")
    return A, B, b


def _fixed_lam(A, b, opts):
    if opts.lam is not None:
        return opts
    return replace(opts, lam=opts.lam_frac * float(np.abs(A.apply_adjoint(b)).max()))


def constraint_residual(B, c):
    nc = np.linalg.norm(c)
    return float(np.linalg.norm(B.apply(c)) / nc) if nc > 0 else 0.0


def ccs_recover(m, layout, opts=SolverOpts()):
    """Independent l1 recovery of both gradient channels (no curl constraint)."""
    A, B, b = _problem(m, layout)
    opts = _fixed_lam(A, b, opts)
    c, info = fista_bpdn(A, b, opts, full_output=True)
    f = A.inner.apply(c)
    return RecoveryResult(
        c, f[0], f[1], info.objective, np.full(info.n_iter, np.nan), opts.lam,
        True, [info.n_iter],
    )


def dcs_recover(m, layout, opts=SolverOpts()):
    """Bregman iteration enforcing D_y f_x = D_x f_y on the recovered fields."""
    A, B, b = _problem(m, layout)
    opts = _fixed_lam(A, b, opts)
    delta = opts.delta
    lip = 1.01 * lipschitz(A, B, delta) if opts.step is None else None
    p = np.zeros(B.out_shape)
    c = np.zeros(A.in_shape)
    objective, constraint, inner = [], [], []
    converged = False
    for k in range(1, opts.max_outer + 1):
        c, info = fista_bpdn(A, b, opts, (B, p, delta), x0=c, lip=lip, full_output=True)
        inner.append(info.n_iter)
        Bc = B.apply(c)
        r = A.apply(c) - b
        obj = 0.5 * float(np.vdot(r, r)) + opts.lam * float(np.abs(c).sum())
        nc = np.linalg.norm(c)
        res = float(np.linalg.norm(Bc) / nc) if nc > 0 else 0.0
        if not (np.isfinite(obj) and np.isfinite(res)):
            raise SolverDivergence(k, "outer iterate")
        objective.append(obj)
        constraint.append(res)
        p = p + delta * Bc
        if res < opts.tol_constraint:
            converged = True
            break
    f = A.inner.apply(c)
    return RecoveryResult(
        c, f[0], f[1], np.array(objective), np.array(constraint), opts.lam, converged, inner,
    )


def write_trace_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "constraint_residual"])
        for i, (o, c) in enumerate(zip(result.objective, result.constraint), start=1):
            w.writerow([i, repr(float(o)), repr(float(c))])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    it = np.array([int(r["iteration"]) for r in rows])
    obj = np.array([float(r["objective"]) for r in rows])
    con = np.array([float(r["constraint_residual"]) for r in rows])
    return it, obj, con
