"""Invariant suite behind the `verify` subcommand.

Each check exercises one analytic property the solver relies on, at desk
scale (the full acceptance study lives in the test suite).  Checks return
structured results so callers can gate exit codes on them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import forward as fw
from . import inversion as iv
from . import quadrature as qd
from . import specfun as sf
from .quadrature import fold_grid


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def check_wronskian() -> tuple[bool, str]:
    zs = np.logspace(-3, 4, 1000)
    worst = 0.0
    for n in range(9):
        cj = sf.eval_cylinder
        for z in zs[::9]:
            v = cj(n, z)
            res = abs(z * (v.j * v.yp - v.jp * v.y) - 2 / math.pi) / (1 + abs(z))
            hres = abs(z * (v.j * v.hp - v.jp * v.h) - 2j / math.pi) / (1 + abs(z))
            worst = max(worst, res, hres)
    return worst <= 1e-12, f"worst scaled residual {worst:.2e} (bound 1e-12)"


def check_hankel_ratio_slope() -> tuple[bool, str]:
    lams = np.logspace(1, 4, 13)
    ok = True
    detail = []
    for n in (0, 1, 4):
        vals = [abs(sf.hankel_ratio(n, lam) + 1 / (2 * lam) - 1j) for lam in lams]
        slope = np.polyfit(np.log(lams), np.log(vals), 1)[0]
        detail.append(f"n={n}: {slope:+.3f}")
        ok = ok and abs(slope + 2.0) <= 0.1
    return ok, "large-argument slopes " + ", ".join(detail) + " (want -2 +/- 0.1)"


def check_conjugate_symmetry() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(0, 9))
        k = float(rng.uniform(0.01, 100.0))
        r = float(rng.uniform(0.1, 10.0))
        worst = max(worst, abs(sf.free_impedance(n, -k, r)
                               - np.conj(sf.free_impedance(n, k, r))))
    return worst == 0.0, f"max |f(-k) - conj(f(k))| = {worst:.1e} (want exact)"


def check_forward_free_roundtrip() -> tuple[bool, str]:
    pot0 = fw.zero_potential()
    worst = 0.0
    for n in (0, 4):
        for k in (0.5, 40.0, 160.0):
            st = fw.integrate_inward(pot0, n, k, fw.default_step_count(k, 2.0))
            worst = max(worst, abs(st.impedance - sf.free_impedance(n, k, 1.0)))
    return worst <= 1e-9, f"q=0 impedance defect {worst:.2e} (bound 1e-9)"


def check_rk4_order() -> tuple[bool, str]:
    pot = fw.gaussian_bump()
    ref = fw.integrate_inward(pot, 0, 20.0, 64000)
    steps = [1000, 2000, 4000, 8000]
    errs = [abs(fw.integrate_inward(pot, 0, 20.0, m).psi - ref.psi) / abs(ref.psi)
            for m in steps]
    slope = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
    return abs(slope - 4.0) <= 0.3, f"self-convergence order {slope:.2f} (want 4 +/- 0.3)"


def check_small_k_defect() -> tuple[bool, str]:
    pot = fw.gaussian_bump()
    ks = np.logspace(-2.3, -0.3, 9)
    defs = [abs(fw.integrate_inward(pot, 0, k, 2000).impedance
                - sf.free_impedance(0, k, 1.0)) for k in ks]
    slope = np.polyfit(np.log(ks), np.log(defs), 1)[0]
    return slope >= 0.9, f"small-k defect slope {slope:.2f} (want >= 0.9)"


def check_wkb_limit() -> tuple[bool, str]:
    pot = fw.gaussian_bump()
    d160 = abs(fw.integrate_inward(pot, 0, 160.0,
                                   fw.default_step_count(160.0, 2.0)).impedance - 1.0)
    d320 = abs(fw.integrate_inward(pot, 0, 320.0,
                                   fw.default_step_count(320.0, 2.0)).impedance - 1.0)
    return d160 <= 1e-4 and d320 < d160, \
        f"|phi(a,k)-1| = {d160:.2e} at k=160, {d320:.2e} at k=320"


def check_trapezoid_rule() -> tuple[bool, str]:
    g = qd.trapezoid_grid(2.0, 10 ** 4)
    rel = abs(g.integrate(g.nodes ** 2) - 16.0 / 3.0) / (16.0 / 3.0)
    wsum = abs(g.weights.sum() - 4.0)
    return rel <= 1e-7 and wsum <= 1e-12, \
        f"k^2 moment rel err {rel:.2e}, weight-sum defect {wsum:.1e}"


def check_graded_log() -> tuple[bool, str]:
    rule = qd.graded_log_panels(0.5, 40, 16)
    val = float(np.dot(rule.weights, rule.nodes * np.log(rule.nodes)))
    exact = -(2 * math.log(2) + 1) / 16
    rel = abs(val - exact) / abs(exact)
    return rel <= 1e-12, f"k log k rel err {rel:.2e} (bound 1e-12)"


def check_richardson_model() -> tuple[bool, str]:
    g = lambda k: 1.0 / (1.0 + k * k)
    base = qd.accelerated_grid(20.0, panel_width=2.0, panel_order=12)
    plain = abs(base.integrate(g(base.nodes)) - math.pi)
    comb = qd.richardson_combine(base, 1)
    err = abs(comb.integrate(g(comb.nodes)) - math.pi)
    ratio = plain / err
    return ratio >= 100.0, f"1/(1+k^2) at omega=20: error ratio {ratio:.0f} (want >= 100)"


def check_trace_identity() -> tuple[bool, str]:
    pot = fw.gaussian_bump()
    r = 2.1
    q = float(pot(r))
    truth = -64.0 * (r - 2.0) * q / (1.0 + q)
    base = qd.accelerated_grid(80.0, log_depth=24, log_order=8)
    grid = qd.richardson_combine(base, 1)
    data = fw.generate_data(pot, 0, grid, r_eval=r)
    folded = fold_grid(grid)
    state = iv.ImpedanceState(r=r, phis=data.values[data.frequencies > 0], n=0)
    val = iv.q_derivative(state, q, folded) / (1.0 + q)
    rel = abs(val - truth) / abs(truth)
    return rel <= 1e-2, f"q'/(1+q) at r=2.1: rel err {rel:.2e} (bound 1e-2)"


def check_null_reconstruction() -> tuple[bool, str]:
    grid = qd.trapezoid_grid(40.0, 128)
    data = fw.generate_data(fw.zero_potential(), 0, grid)
    cfg = iv.ReconstructionConfig(h=1e-3, grid=grid, scheme="heun-cn",
                                  n=0, a=1.0, b=3.0)
    res = iv.reconstruct(data, cfg)
    err = float(np.max(np.abs(res.q_hat)))
    return err <= 1e-6, f"||q_hat||_inf = {err:.2e} (bound 1e-6)"


def check_roundtrip_reduced() -> tuple[bool, str]:
    pot = fw.gaussian_bump()
    base = qd.accelerated_grid(40.0, log_depth=24, log_order=8)
    grid = qd.richardson_combine(base, 1)
    data = fw.generate_data(pot, 0, grid)
    cfg = iv.ReconstructionConfig(h=1.0 / 2000, grid=grid, scheme="heun-cn",
                                  n=0, a=1.0, b=3.0)
    res = iv.reconstruct(data, cfg)
    err = float(np.max(np.abs(res.q_hat - pot(res.radii))))
    return err <= 5e-4, f"gaussian round trip err {err:.2e} (bound 5e-4)"


ALL_CHECKS = [
    ("specfun-wronskian", check_wronskian),
    ("specfun-hankel-ratio-slope", check_hankel_ratio_slope),
    ("specfun-conjugate-symmetry", check_conjugate_symmetry),
    ("forward-free-roundtrip", check_forward_free_roundtrip),
    ("forward-rk4-order", check_rk4_order),
    ("forward-small-k-defect", check_small_k_defect),
    ("forward-wkb-limit", check_wkb_limit),
    ("quadrature-trapezoid", check_trapezoid_rule),
    ("quadrature-graded-log", check_graded_log),
    ("quadrature-richardson-model", check_richardson_model),
    ("inversion-trace-identity", check_trace_identity),
    ("inversion-null-reconstruction", check_null_reconstruction),
    ("inversion-roundtrip-reduced", check_roundtrip_reduced),
]


def run_all(names=None) -> list[CheckResult]:
    results = []
    for name, fn in ALL_CHECKS:
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail,
                                   time.perf_counter() - t0))
    return results
