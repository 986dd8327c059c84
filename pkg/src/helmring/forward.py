"""Forward solver: synthesize multi-frequency impedance data at the inner radius.

The rescaled field ``psi(r) = sqrt(r) u_n(r)`` satisfies

    psi'' + k^2 (1 + q(r)) psi - (n^2 - 1/4) psi / r^2 = 0,

with the outgoing-wave boundary values

    psi(b)  = sqrt(b) H_n(k b),
    psi'(b) = k sqrt(b) H_n'(k b) + H_n(k b) / (2 sqrt(b)),

and is integrated inward from r = b with classical RK4.  The impedance
``phi(r, k) = psi'(r) / (i k psi(r))`` evaluated at the inner radius is the
synthetic measurement consumed by the inversion march.

Data at negative frequencies is always produced by conjugate reflection of
the positive-frequency values, never by direct evaluation.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, NonvanishingFieldError, StepResolutionError

# Minimum number of RK4 steps regardless of frequency, so the synthetic data
# is always resolved far beyond the inversion's spatial grid.
STEP_FLOOR = 2000

# Relative |psi| threshold treated as a trajectory passing through zero.
# The field provably has no zeros, so tripping this signals a solver bug.
_PSI_COLLAPSE_REL = 1e-10


@dataclass(frozen=True)
class RadialPotential:
    """A compactly supported radial potential q(r) on the annulus [a, b].

    ``q`` must be vectorized (accept and return ndarrays), vanish outside
    [a, b] and satisfy -1 < q0 <= q(r) <= q1.
    """

    q: Callable
    a: float
    b: float
    q0: float
    q1: float
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise DomainError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if not (-1.0 < self.q0 <= self.q1):
            raise DomainError(f"need -1 < q0 <= q1, got q0={self.q0}, q1={self.q1}")

    def __call__(self, r):
        return self.q(r)


def _windowed(fn, a, b):
    def q(r):
        r = np.asarray(r, dtype=float)
        inside = (r > a) & (r < b)
        vals = np.where(inside, fn(np.where(inside, r, a)), 0.0)
        return vals if vals.ndim else float(vals)

    return q


def zero_potential(a: float = 1.0, b: float = 3.0) -> RadialPotential:
    return RadialPotential(q=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                           a=a, b=b, q0=0.0, q1=0.0, name="zero")


def gaussian_bump(center: float = 2.0, sharpness: float = 32.0,
                  a: float = 1.0, b: float = 3.0) -> RadialPotential:
    """q(r) = exp(-sharpness (r - center)^2), windowed to [a, b].

    With the defaults the tails at the annulus edges are ~1e-14, i.e. the
    potential is compactly supported at working precision.
    """
    fn = lambda r: np.exp(-sharpness * (r - center) ** 2)
    return RadialPotential(q=_windowed(fn, a, b), a=a, b=b, q0=0.0, q1=1.0,
                           name="gaussian")


def cosine_potential(a_p: float, b_p: float, center: float = 2.0,
                     a: float = 1.0, b: float = 3.0) -> RadialPotential:
    """Two-scale cosine profile, C^2-matched to zero at both annulus edges.

    q(r) = (1/10)[cos(a_p pi (r-c)) + 1] - (a_p^2 / (10 b_p^2))[1 - cos(b_p pi (r-c))]

    For odd a_p and even b_p the value, slope and curvature all vanish at
    r = c -/+ 1, which is why the annulus [c-1, c+1] is its natural support.
    """
    amp2 = a_p ** 2 / (10.0 * b_p ** 2)

    def fn(r):
        t = (r - center) * np.pi
        return 0.1 * (np.cos(a_p * t) + 1.0) - amp2 * (1.0 - np.cos(b_p * t))

    return RadialPotential(q=_windowed(fn, a, b), a=a, b=b,
                           q0=-2.0 * amp2, q1=0.2, name=f"cosine-{a_p}-{b_p}")


def square_well(lo: float = 1.5, hi: float = 2.5, height: float = 1.0,
                a: float = 1.0, b: float = 3.0) -> RadialPotential:
    """Discontinuous well: q = height on [lo, hi], zero elsewhere."""
    fn = lambda r: np.where((r >= lo) & (r <= hi), height, 0.0)
    q0 = min(0.0, height)
    q1 = max(0.0, height)
    return RadialPotential(q=_windowed(fn, a, b), a=a, b=b, q0=q0, q1=q1,
                           name="square")


@dataclass(frozen=True)
class FieldState:
    """psi, psi' at one radius for one mode and frequency."""

    psi: complex
    dpsi: complex
    r: float
    k: float
    n: int

    @property
    def impedance(self) -> complex:
        return self.dpsi / (1j * self.k * self.psi)


@dataclass
class ImpedanceData:
    """Impedance samples phi_n(r_eval, k_j) over a symmetric frequency grid."""

    n: int
    a: float
    b: float
    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.frequencies.shape != self.values.shape:
            raise DomainError("frequency/value length mismatch")
        if np.any(self.frequencies == 0.0):
            raise DomainError("impedance data must exclude k = 0")
        if np.any(np.diff(self.frequencies) <= 0):
            raise DomainError("frequencies must be strictly increasing")

    def write_csv(self, path) -> None:
        """Rows ``k,re_phi,im_phi`` ascending in k, 17 significant digits."""
        with open(path, "w") as f:
            f.write(f"# n={self.n} a={self.a:.17g} b={self.b:.17g}\n")
            for k, v in zip(self.frequencies, self.values):
                f.write(f"{k:.17g},{v.real:.17g},{v.imag:.17g}\n")

    @classmethod
    def read_csv(cls, path) -> "ImpedanceData":
        with open(path) as f:
            header = f.readline()
        m = re.match(r"#\s*n=(\S+)\s+a=(\S+)\s+b=(\S+)", header)
        if not m:
            raise DomainError(f"malformed impedance CSV header: {header!r}")
        raw = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return cls(n=int(m.group(1)), a=float(m.group(2)), b=float(m.group(3)),
                   frequencies=raw[:, 0], values=raw[:, 1] + 1j * raw[:, 2])


def boundary_state(n: int, k: float, b: float) -> FieldState:
    """Outgoing-wave values of (psi, psi') at the outer radius.

    The derivative uses the analytically differentiated form
    ``psi'(b) = k sqrt(b) H_n'(kb) + H_n(kb) / (2 sqrt(b))``; the q = 0
    round trip in the tests pins this choice.  Negative k states are the
    conjugates of positive ones (a constant rescaling of the field, which
    the impedance ratio never sees).
    """
    if k == 0:
        raise DomainError("boundary state undefined at k = 0")
    if b <= 0:
        raise DomainError(f"outer radius must be positive, got {b}")
    kp = abs(k)
    z = kp * b
    h = special.hankel1(n, z)
    hp = special.hankel1(n - 1, z) - (n / z) * h if n > 0 else -special.hankel1(1, z)
    sq = math.sqrt(b)
    psi = sq * h
    dpsi = kp * sq * hp + h / (2.0 * sq)
    if k < 0:
        psi, dpsi = np.conj(psi), np.conj(dpsi)
    return FieldState(psi=complex(psi), dpsi=complex(dpsi), r=b, k=k, n=n)


def default_step_count(k: float, span: float) -> int:
    """Default RK4 step count for one inward integration over ``span``.

    Scales like 40 points per unit phase over 2*pi, with the floor raised so
    the per-step phase ``|k| span / steps`` never exceeds 0.1 rad.
    """
    k = abs(k)
    return max(STEP_FLOOR,
               math.ceil(40.0 * k * span / (2.0 * math.pi)),
               math.ceil(10.0 * k * span))


def _rk4_inward(pot: RadialPotential, n: int, ks: np.ndarray, steps: int,
                r_stop: float) -> tuple[np.ndarray, np.ndarray]:
    """March (psi, psi') from b down to r_stop for an array of k > 0."""
    b = pot.b
    span = b - r_stop
    kmax = float(np.max(ks))
    if kmax * span / steps > 0.1 + 1e-12:
        raise StepResolutionError(
            f"{steps} steps leave {kmax * span / steps:.3f} rad per step at "
            f"k={kmax:g}; need k*span/steps <= 0.1")

    z = ks * b
    h0 = special.hankel1(n, z)
    hp0 = special.hankel1(n - 1, z) - (n / z) * h0 if n > 0 else -special.hankel1(1, z)
    sq = math.sqrt(b)
    psi = sq * h0
    dpsi = ks * sq * hp0 + h0 / (2.0 * sq)

    c_n = n * n - 0.25
    k2 = ks * ks
    dr = -span / steps  # marching inward
    run_max = np.abs(psi)

    def w_of(r):
        # psi'' = w(r) psi
        return c_n / (r * r) - k2 * (1.0 + float(pot.q(r)))

    r = b
    w_here = w_of(r)
    for _ in range(steps):
        r_mid = r + 0.5 * dr
        r_next = r + dr
        w_mid = w_of(r_mid)
        w_next = w_of(r_next)

        k1p = dpsi
        k1d = w_here * psi
        p2 = psi + 0.5 * dr * k1p
        k2p = dpsi + 0.5 * dr * k1d
        k2d = w_mid * p2
        p3 = psi + 0.5 * dr * k2p
        k3p = dpsi + 0.5 * dr * k2d
        k3d = w_mid * p3
        p4 = psi + dr * k3p
        k4p = dpsi + dr * k3d
        k4d = w_next * p4

        psi = psi + (dr / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        dpsi = dpsi + (dr / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        r = r_next
        w_here = w_next

        amp = np.abs(psi)
        run_max = np.maximum(run_max, amp)
        if np.any(amp < _PSI_COLLAPSE_REL * run_max):
            j = int(np.argmin(amp / run_max))
            raise NonvanishingFieldError(
                f"|psi| collapsed to {amp[j]:.3e} (relative "
                f"{amp[j] / run_max[j]:.3e}) at r={r:.6f}, k={ks[j]:g}; "
                "the field has no zeros, so this indicates a solver bug")
    return psi, dpsi


def integrate_inward(pot: RadialPotential, n: int, k: float, steps: int,
                     r_stop: float | None = None) -> FieldState:
    """Integrate the field from the outer radius down to ``r_stop``.

    Raises StepResolutionError when ``|k| (b - r_stop) / steps > 0.1`` and
    NonvanishingFieldError if |psi| collapses along the trajectory.
    """
    if k == 0:
        raise DomainError("cannot integrate at k = 0")
    r_stop = pot.a if r_stop is None else float(r_stop)
    if not (0 < r_stop < pot.b):
        raise DomainError(f"r_stop must lie in (0, b), got {r_stop}")
    kp = abs(k)
    psi, dpsi = _rk4_inward(pot, n, np.array([kp]), steps, r_stop)
    psi, dpsi = complex(psi[0]), complex(dpsi[0])
    if k < 0:
        psi, dpsi = psi.conjugate(), dpsi.conjugate()
    return FieldState(psi=psi, dpsi=dpsi, r=r_stop, k=k, n=n)


def _step_buckets(ks: np.ndarray, span: float) -> list[tuple[int, np.ndarray]]:
    """Group frequencies into batches sharing one (rounded-up) step count."""
    wanted = np.array([default_step_count(k, span) for k in ks])
    # round up to coarse levels so vectorized batches stay few
    bucket = 512 * np.ceil(wanted / 512).astype(int)
    out = []
    for lvl in np.unique(bucket):
        idx = np.nonzero(bucket == lvl)[0]
        out.append((int(max(wanted[idx].max(), lvl)), idx))
    return out


def generate_data(pot: RadialPotential, n: int, grid, steps: int | None = None,
                  r_eval: float | None = None, workers: int = 1) -> ImpedanceData:
    """Synthesize impedance data on the nonzero nodes of a frequency grid.

    One independent inward integration per frequency (vectorized in
    batches); negative-frequency values are conjugate reflections of the
    positive ones.  ``steps=None`` selects the default per-frequency step
    count; an explicit ``steps`` applies to every frequency.  ``workers``
    fans the batches out over a thread pool; results are assembled in
    frequency order either way.
    """
    nodes = np.asarray(grid.nodes if hasattr(grid, "nodes") else grid, dtype=float)
    nodes = nodes[nodes != 0.0]
    r_eval = pot.a if r_eval is None else float(r_eval)
    span = pot.b - r_eval

    kpos = np.unique(np.abs(nodes))
    if steps is None:
        buckets = _step_buckets(kpos, span)
    else:
        buckets = [(int(steps), np.arange(len(kpos)))]

    values_pos = np.empty(len(kpos), dtype=complex)

    def run_bucket(item):
        m, idx = item
        ks = kpos[idx]
        try:
            psi, dpsi = _rk4_inward(pot, n, ks, m, r_eval)
        except (StepResolutionError, NonvanishingFieldError) as exc:
            raise type(exc)(f"{exc} [while generating k in {ks[0]:g}..{ks[-1]:g}]") from exc
        return idx, dpsi / (1j * ks * psi)

    if workers > 1 and len(buckets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, vals in pool.map(run_bucket, buckets):
                values_pos[idx] = vals
    else:
        for item in buckets:
            idx, vals = run_bucket(item)
            values_pos[idx] = vals

    lookup = {k: v for k, v in zip(kpos, values_pos)}
    values = np.array([lookup[k] if k > 0 else np.conj(lookup[-k]) for k in nodes])
    order = np.argsort(nodes)
    return ImpedanceData(n=n, a=r_eval, b=pot.b,
                         frequencies=nodes[order], values=values[order])
