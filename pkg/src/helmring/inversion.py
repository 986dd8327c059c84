"""Reconstruction engine: joint outward march of impedance rows and potential.

Starting from measured impedance rows ``phi(a, k_j)`` and ``q(a) = 0``, each
spatial step advances

    phi'(r, k) = -i k phi^2 - i k (1 + q(r)) + i (n^2 - 1/4) / (k r^2)

per frequency, and the potential through the frequency integral of the
impedance defect

    q'(r) / (1 + q(r)) = (4/pi) * integral F(r, k) dk,
    F(r, k) = Re[ phi(r,k) - free_impedance(n,k,r) + 1 - sqrt(1+q(r)) ],

with F(r, 0) given its analytic limit ``1 - sqrt(1+q)``.  Two steppers are
provided: forward Euler (first order in h) and a Heun predictor for q with a
Crank-Nicolson solve for each phi row (second order in h).

Only k > 0 rows are marched; the conjugate symmetry phi(r,-k) =
conj(phi(r,k)) folds the negative frequencies into doubled quadrature
weights, and the imaginary part of the integrand is discarded (its
symmetric integral vanishes).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ImpedanceBlowupError
from .forward import ImpedanceData
from .quadrature import FoldedGrid, FrequencyGrid, fold_grid
from .specfun import _check_order, free_impedance, hankel_ratio

FOUR_OVER_PI = 4.0 / np.pi

# Guard threshold on the impedance defect |phi - free_impedance|, relative
# to max(1, |free_impedance|).  The defect of a bounded-contrast medium
# stays O(sqrt(1+q1)) wherever the impedance itself is O(1); at small k
# both phi and its per-step truncation error legitimately scale like the
# free impedance ~ 1/(k r), hence the local rescaling.  Crossing 1e3 can
# then only mean divergence, not physics.
BLOWUP_THRESHOLD = 1e3

_SCHEMES = ("euler", "heun-cn")


@dataclass
class ImpedanceState:
    """Impedance row phi(r, k_j) over the folded (k > 0) grid at one radius."""

    r: float
    phis: np.ndarray
    n: int


@dataclass(frozen=True)
class ReconstructionConfig:
    """March parameters: spatial step, frequency grid, stepper, geometry."""

    h: float
    grid: FrequencyGrid
    scheme: str
    n: int
    a: float
    b: float

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise DomainError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        _check_order(self.n)
        if not (0 < self.a < self.b):
            raise DomainError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        span = self.b - self.a
        if self.h > span / 100.0 + 1e-15:
            raise DomainError(f"h={self.h:g} too coarse; need h <= (b-a)/100")
        steps = round(span / self.h)
        if abs(steps * self.h - span) > self.h:
            raise DomainError(f"h={self.h:g} must divide b-a={span:g} to within one step")

    @property
    def steps(self) -> int:
        return round((self.b - self.a) / self.h)


@dataclass
class Diagnostics:
    max_abs_phi: float = 0.0
    max_abs_defect: float = 0.0
    terminal_defect: float = 0.0
    cn_root_flips: int = 0
    wall_time_s: float = 0.0
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"max_abs_phi": self.max_abs_phi,
                "max_abs_defect": self.max_abs_defect,
                "terminal_defect": self.terminal_defect,
                "cn_root_flips": self.cn_root_flips,
                "wall_time_s": self.wall_time_s,
                "warnings": "; ".join(self.warnings)}


@dataclass
class ReconstructionResult:
    """Radial grid, recovered potential and its slope, plus march diagnostics."""

    radii: np.ndarray
    q_hat: np.ndarray
    q_prime: np.ndarray
    diagnostics: Diagnostics
    scheme: str
    n: int

    def write_csv(self, path) -> None:
        """Rows ``r,q_hat,q_prime`` at 17 significant digits."""
        with open(path, "w") as f:
            f.write(f"# n={self.n} scheme={self.scheme}\n")
            for r, qh, qp in zip(self.radii, self.q_hat, self.q_prime):
                f.write(f"{r:.17g},{qh:.17g},{qp:.17g}\n")

    def write_diagnostics(self, path) -> None:
        with open(path, "w") as f:
            for key, val in self.diagnostics.as_dict().items():
                f.write(f"{key}={val}\n")

    @classmethod
    def read_csv(cls, path) -> "ReconstructionResult":
        raw = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return cls(radii=raw[:, 0], q_hat=raw[:, 1], q_prime=raw[:, 2],
                   diagnostics=Diagnostics(), scheme="?", n=-1)


def riccati_rhs(phi, q: float, r: float, k, n: int):
    """Right-hand side of the impedance evolution in r:

    ``phi' = -i k phi^2 + i k (1 + q) - i (n^2 - 1/4) / (k r^2)``.

    The sign of the last two terms is pinned by the requirement that the
    free impedance solves the q = 0 equation (e.g. psi = e^{ikr} gives
    phi = 1 identically, so the RHS must vanish at phi = 1, q = 0, n^2 =
    1/4); the finite-difference oracle in the tests enforces this.
    Broadcasting over ndarray ``phi``/``k`` is supported.
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr == 0.0):
        raise DomainError("Riccati RHS undefined at k = 0")
    if r <= 0:
        raise DomainError(f"radius must be positive, got {r}")
    return (-1j * k_arr * (np.asarray(phi) ** 2 - (1.0 + q))
            - 1j * (n * n - 0.25) / (k_arr * r * r))


def trace_integrand(phi, q: float, n: int, r: float, k):
    """Real part of the impedance defect driving the potential slope.

    ``F = Re[phi - free_impedance(n,k,r) + 1 - sqrt(1+q)]``; at k = 0 the
    analytic limit ``1 - sqrt(1+q)`` is returned (phi is ignored there).
    Even in k whenever phi respects the conjugate symmetry.
    """
    if q <= -1.0:
        raise DomainError(f"need q > -1, got q={q}")
    shift = 1.0 - np.sqrt(1.0 + q)
    k_arr = np.asarray(k, dtype=float)
    if k_arr.ndim == 0:
        if float(k_arr) == 0.0:
            return float(shift)
        return float(np.real(phi - free_impedance(n, float(k_arr), r)) + shift)
    out = np.full(k_arr.shape, shift)
    nz = k_arr != 0.0
    out[nz] += np.real(np.asarray(phi)[nz] - free_impedance(n, k_arr[nz], r))
    return out


def q_derivative(state: ImpedanceState, q: float, grid: FoldedGrid | FrequencyGrid) -> float:
    """Potential slope from the weighted impedance-defect sum.

    ``q'(r) = (1 + q) * (4/pi) * sum_j F(r, k_j) w_j`` over the folded grid
    (a k = 0 node contributes its analytic limit with its own weight).
    """
    folded = grid if isinstance(grid, FoldedGrid) else fold_grid(grid)
    if len(folded.nodes) != len(state.phis):
        raise DomainError("impedance state is not aligned with the grid")
    f_vals = trace_integrand(state.phis, q, state.n, state.r, folded.nodes)
    shift = 1.0 - np.sqrt(1.0 + q)
    total = float(np.dot(folded.weights, f_vals)) + folded.zero_weight * shift
    return (1.0 + q) * FOUR_OVER_PI * total


def _free_row(n: int, ks: np.ndarray, r: float) -> np.ndarray:
    # free impedance over the positive-k row, no argument checks (hot path)
    z = ks * r
    return hankel_ratio(n, z) / 1j + 1.0 / (2j * z)


def _q_slope(w: np.ndarray, w0: float, phis, free_row, q: float) -> float:
    shift = 1.0 - np.sqrt(1.0 + q)
    f_vals = np.real(phis) - np.real(free_row) + shift
    return (1.0 + q) * FOUR_OVER_PI * (float(np.dot(w, f_vals)) + w0 * shift)


def _check_guards(phis: np.ndarray, free_row: np.ndarray, r: float,
                  diag: Diagnostics) -> None:
    scale = np.maximum(1.0, np.abs(free_row))
    defect = np.abs(phis - free_row) / scale
    dmax = float(defect.max())
    diag.max_abs_defect = max(diag.max_abs_defect, dmax)
    diag.max_abs_phi = max(diag.max_abs_phi, float(np.abs(phis).max()))
    if not np.isfinite(dmax) or dmax > BLOWUP_THRESHOLD:
        raise ImpedanceBlowupError(
            f"scaled impedance defect reached {dmax:.3e} at r={r:.6f} "
            f"(threshold {BLOWUP_THRESHOLD:g}); Riccati march diverged")


def _validate_alignment(data: ImpedanceData, cfg: ReconstructionConfig) -> None:
    grid_nodes = cfg.grid.nodes[cfg.grid.nodes != 0.0]
    if len(grid_nodes) != len(data.frequencies) or not np.allclose(
            grid_nodes, data.frequencies, rtol=1e-12,
            atol=1e-12 * max(1.0, cfg.grid.omega)):
        raise DomainError("data frequencies do not match the grid nodes")
    if abs(data.a - cfg.a) > 1e-9:
        raise DomainError(f"data measured at r={data.a}, march starts at a={cfg.a}")


def _validate_initial_row(ks: np.ndarray, phis: np.ndarray, n: int, a: float,
                          diag: Diagnostics) -> None:
    # the measured row must approach the free impedance with an O(k) defect
    small = np.argsort(ks)[: max(1, min(3, len(ks)))]
    defect = np.abs(phis[small] - free_impedance(n, ks[small], a))
    bound = np.maximum(1.0, 4.0 * ks[small])
    if np.any(defect > bound):
        msg = (f"initial data defect |phi - free| = {float(defect.max()):.3g} at "
               f"k = {float(ks[small][int(np.argmax(defect))]):.3g} is inconsistent "
               "with the O(k) small-frequency behaviour; check n, a, b and the data")
        warnings.warn(msg)
        diag.warnings.append(msg)


def _cn_solve_row(phis, a_coef, rhs_expl, drift_next, h, flips):
    """One Crank-Nicolson step of the Riccati rows: solve the quadratic
    a x^2 + (2/h) x + c = 0 with a = i k and pick the root nearest the
    explicit-Euler predictor.  Ambiguous ties keep the predictor and are
    counted, as are selections of the non-regular branch."""
    two_over_h = 2.0 / h
    c_coef = -(two_over_h * phis + rhs_expl + drift_next)
    disc = two_over_h * two_over_h - 4.0 * a_coef * c_coef
    sq = np.sqrt(disc)
    sq = np.where(np.real(sq) >= 0.0, sq, -sq)  # |b + sq| maximal, b real > 0
    qq = -0.5 * (two_over_h + sq)
    root_far = qq / a_coef
    root_reg = c_coef / qq
    pred = phis + h * rhs_expl
    d_reg = np.abs(root_reg - pred)
    d_far = np.abs(root_far - pred)
    take_far = d_far < d_reg
    tie = np.abs(d_far - d_reg) <= 1e-12 * np.maximum(d_reg, 1.0)
    flips[0] += int(np.count_nonzero(take_far & ~tie))
    out = np.where(take_far, root_far, root_reg)
    if np.any(tie):
        out = np.where(tie, pred, out)
        flips[0] += int(np.count_nonzero(tie))
    return out


def _march(data: ImpedanceData, cfg: ReconstructionConfig, q_override=None):
    t0 = time.perf_counter()
    _validate_alignment(data, cfg)
    folded = fold_grid(cfg.grid)
    ks = folded.nodes
    w = folded.weights
    w0 = folded.zero_weight
    cn = cfg.n * cfg.n - 0.25

    pos_mask = data.frequencies > 0
    phis = data.values[pos_mask].astype(complex).copy()

    diag = Diagnostics()
    _validate_initial_row(ks, phis, cfg.n, cfg.a, diag)

    steps = cfg.steps
    h = (cfg.b - cfg.a) / steps
    radii = cfg.a + h * np.arange(steps + 1)
    q_hat = np.zeros(steps + 1)
    q_prime = np.zeros(steps + 1)

    def q_at(idx, marched):
        if q_override is None:
            return marched
        return float(q_override(radii[idx]))

    heun = cfg.scheme == "heun-cn"
    flips = [0]

    q_cur = q_at(0, 0.0)
    q_hat[0] = q_cur
    free_here = _free_row(cfg.n, ks, radii[0])
    for ell in range(steps):
        r = radii[ell]
        r_next = radii[ell + 1]
        _check_guards(phis, free_here, r, diag)

        qp_here = _q_slope(w, w0, phis, free_here, q_cur)
        q_prime[ell] = qp_here
        free_next = _free_row(cfg.n, ks, r_next)
        rhs_expl = (-1j * ks * (phis * phis - (1.0 + q_cur))
                    - 1j * cn / (ks * r * r))

        if not heun:
            phis = phis + h * rhs_expl
            q_next = q_cur + h * qp_here
        else:
            q_tilde = q_at(ell + 1, q_cur + h * qp_here)
            drift_next = 1j * ks * (1.0 + q_tilde) - 1j * cn / (ks * r_next * r_next)
            a_coef = 1j * ks
            phis = _cn_solve_row(phis, a_coef, rhs_expl, drift_next, h, flips)
            qp_next = _q_slope(w, w0, phis, free_next, q_tilde)
            q_next = q_cur + 0.5 * h * (qp_here + qp_next)

        q_cur = q_at(ell + 1, q_next)
        if not np.isfinite(q_cur) or q_cur <= -1.0:
            raise ImpedanceBlowupError(
                f"marched potential reached q={q_cur:.3g} <= -1 at "
                f"r={r_next:.6f}; reconstruction diverged")
        q_hat[ell + 1] = q_cur
        free_here = free_next

    _check_guards(phis, free_here, radii[-1], diag)
    q_prime[steps] = _q_slope(w, w0, phis, free_here, q_cur)
    diag.terminal_defect = float((np.abs(phis - free_here)
                                  / np.maximum(1.0, np.abs(free_here))).max())
    diag.cn_root_flips = flips[0]
    diag.wall_time_s = time.perf_counter() - t0
    state = ImpedanceState(r=radii[-1], phis=phis, n=cfg.n)
    return ReconstructionResult(radii=radii, q_hat=q_hat, q_prime=q_prime,
                                diagnostics=diag, scheme=cfg.scheme, n=cfg.n), state


def euler_march(data: ImpedanceData, cfg: ReconstructionConfig,
                q_override=None) -> ReconstructionResult:
    """First-order march: forward Euler for both phi rows and q."""
    cfg = ReconstructionConfig(h=cfg.h, grid=cfg.grid, scheme="euler",
                               n=cfg.n, a=cfg.a, b=cfg.b)
    return _march(data, cfg, q_override)[0]


def heun_cn_march(data: ImpedanceData, cfg: ReconstructionConfig,
                  q_override=None) -> ReconstructionResult:
    """Second-order march: Heun for q, Crank-Nicolson for each phi row."""
    cfg = ReconstructionConfig(h=cfg.h, grid=cfg.grid, scheme="heun-cn",
                               n=cfg.n, a=cfg.a, b=cfg.b)
    return _march(data, cfg, q_override)[0]


def reconstruct(data: ImpedanceData, cfg: ReconstructionConfig,
                q_override=None) -> ReconstructionResult:
    """Dispatch on ``cfg.scheme``; folds the grid to k > 0 and handles the
    k = 0 limit node automatically."""
    return _march(data, cfg, q_override)[0]


def evolve_impedance(data: ImpedanceData, cfg: ReconstructionConfig,
                     q_true) -> tuple[ReconstructionResult, ImpedanceState]:
    """March the phi rows with the potential supplied, not estimated.

    Used for consistency studies: with exact data and the true q the evolved
    rows must track the forward solver's phi(r, k).
    """
    return _march(data, cfg, q_override=q_true)
