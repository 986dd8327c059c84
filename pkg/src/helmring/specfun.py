"""Cylinder functions and the impedance of the free outgoing wave.

Conventions used throughout the package:

* ``H_n`` always denotes the first-kind Hankel function ``H_n = J_n + i Y_n``
  (the outgoing cylindrical wave).
* Arguments live in the closed upper half-plane, ``Im z >= 0``, ``z != 0``.
  Values on the negative real axis are the limits from above.
* Negative real frequencies are never evaluated directly: every consumer
  folds ``k < 0`` onto ``k > 0`` through the conjugate symmetry
  ``f(-k) = conj(f(k))``.

Evaluation is delegated to scipy.special (cephes for positive real
arguments, AMOS for complex ones); identities such as the Wronskian
``z (J_n Y_n' - J_n' Y_n) = 2/pi`` are enforced by the test suite rather
than re-derived here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

# Design cap on the order: experiments use n <= 4; well beyond ~64 the
# small-argument magnitudes leave the double-precision range.
MAX_ORDER = 64

_ABS_Z_MIN = 1e-8
_ABS_Z_MAX = 1e6


@dataclass(frozen=True)
class CylinderFunctionValue:
    """Values of J_n, Y_n and their derivatives at a single argument."""

    n: int
    z: complex
    j: complex
    y: complex
    jp: complex
    yp: complex

    @property
    def h(self) -> complex:
        """First-kind Hankel function H_n = J_n + i Y_n."""
        return self.j + 1j * self.y

    @property
    def hp(self) -> complex:
        """Derivative H_n' = J_n' + i Y_n'."""
        return self.jp + 1j * self.yp


def _check_order(n: int) -> int:
    if not isinstance(n, (int, np.integer)):
        raise DomainError(f"order must be an integer, got {n!r}")
    if n < 0 or n > MAX_ORDER:
        raise DomainError(f"order must lie in [0, {MAX_ORDER}], got {n}")
    return int(n)


def eval_cylinder(n: int, z: complex) -> CylinderFunctionValue:
    """Evaluate J_n, Y_n and their derivatives at ``z`` with Im z >= 0.

    Relative accuracy is 1e-12 or better for real positive arguments in
    [1e-3, 1e4]; derivatives follow the recurrence
    ``C_n' = (C_{n-1} - C_{n+1}) / 2``.

    Raises
    ------
    DomainError
        If ``z == 0`` (Y_n and H_n are singular there), if ``Im z < 0``,
        or if ``|z|`` lies outside the supported range [1e-8, 1e6].
    """
    n = _check_order(n)
    z = complex(z)
    if z == 0:
        raise DomainError("cylinder functions are singular at z = 0")
    if z.imag < 0:
        raise DomainError(f"Im z must be non-negative, got z = {z}")
    az = abs(z)
    if az < _ABS_Z_MIN or az > _ABS_Z_MAX:
        raise DomainError(f"|z| = {az:g} outside supported range "
                          f"[{_ABS_Z_MIN:g}, {_ABS_Z_MAX:g}]")

    if z.imag == 0.0 and z.real > 0.0:
        # real positive axis: cephes path, cast up to complex
        x = z.real
        j = complex(special.jv(n, x))
        y = complex(special.yv(n, x))
        jp = complex(special.jvp(n, x))
        yp = complex(special.yvp(n, x))
    else:
        j = complex(special.jv(n, z))
        y = complex(special.yv(n, z))
        jp = complex(special.jvp(n, z))
        yp = complex(special.yvp(n, z))
    return CylinderFunctionValue(n=n, z=z, j=j, y=y, jp=jp, yp=yp)


def hankel_ratio(n: int, z):
    """H_n'(z) / H_n(z) for real positive ``z`` (scalar or ndarray).

    Uses ``H_n' = H_{n-1} - (n/z) H_n`` (and ``H_0' = -H_1``).  Where the
    scipy evaluation overflows (very small z combined with large n) the
    leading small-argument behaviour ``-n/z`` is substituted; for n = 0 the
    logarithmic form is used instead.  Both fallbacks are only ever needed
    far below z ~ 1e-8 where the ratio is dominated by these terms.
    """
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        h = special.hankel1(n, z)
        if n == 0:
            hp = -special.hankel1(1, z)
        else:
            hp = special.hankel1(n - 1, z) - (n / z) * h
        ratio = hp / h
    bad = ~np.isfinite(ratio)
    if np.any(bad):
        zb = z[bad] if z.ndim else z
        if n == 0:
            # H_0 ~ 1 + (2i/pi) log(gamma z / 2), H_0' ~ 2i/(pi z)
            log_term = np.log(zb / 2.0) + np.euler_gamma
            fallback = (2j / np.pi) / (zb * (1.0 + (2j / np.pi) * log_term))
        else:
            fallback = -n / zb + 0j
        if z.ndim:
            ratio[bad] = fallback
        else:
            ratio = fallback
    return ratio


def free_impedance(n: int, k, r: float):
    """Impedance of the potential-free outgoing wave sqrt(r) H_n(k r).

    Evaluates ``H_n'(kr)/(i H_n(kr)) + 1/(2 i k r)``, i.e. the value the
    measured impedance approaches when the potential vanishes.  ``k`` may
    be a scalar or an ndarray of nonzero reals; negative entries are
    folded onto positive ones by conjugation, so ``free_impedance(n, -k, r)
    == conj(free_impedance(n, k, r))`` holds to the last bit.

    Raises
    ------
    DomainError
        If any entry of ``k`` is zero or ``r <= 0``.
    """
    n = _check_order(n)
    if r <= 0:
        raise DomainError(f"radius must be positive, got {r}")
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr == 0.0):
        raise DomainError("free impedance is undefined at k = 0")

    kp = np.abs(k_arr)
    z = kp * r
    val = hankel_ratio(n, z) / 1j + 1.0 / (2j * z)
    out = np.where(k_arr < 0, np.conj(val), val)
    if np.isscalar(k) or np.ndim(k) == 0:
        return complex(out)
    return out
