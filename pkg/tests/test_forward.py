import numpy as np
import pytest

from helmring.errors import (DomainError, NonvanishingFieldError,
                             StepResolutionError)
from helmring.forward import (ImpedanceData, RadialPotential, boundary_state,
                              cosine_potential, default_step_count,
                              gaussian_bump, generate_data, integrate_inward,
                              square_well, zero_potential)
from helmring.quadrature import trapezoid_grid
from helmring.specfun import free_impedance


@pytest.fixture(scope="module")
def gauss():
    return gaussian_bump()


class TestPotentials:
    def test_compact_support(self, gauss):
        r = np.array([0.5, 1.0, 3.0, 3.5])
        assert np.array_equal(gauss(r), np.zeros(4))

    def test_gaussian_peak(self, gauss):
        assert gauss(2.0) == 1.0

    def test_cosine_value_at_center(self):
        pot = cosine_potential(5, 6)
        assert abs(pot(2.0) - 0.2) <= 1e-15

    def test_cosine_c2_matching_at_edges(self):
        # value, slope and curvature vanish at the support edges
        pot = cosine_potential(9, 10)
        for r0 in (1.0, 3.0):
            eps = 1e-5
            inner = 1 if r0 == 1.0 else -1
            vals = [float(pot(r0 + inner * j * eps)) for j in range(4)]
            assert abs(vals[0]) <= 1e-14
            assert abs(vals[1]) <= 5e-9   # ~ q''' eps^3 if C2 holds
            assert abs(vals[2]) <= 5e-8

    def test_bounds_validated(self):
        with pytest.raises(DomainError):
            RadialPotential(q=lambda r: r, a=1.0, b=3.0, q0=-2.0, q1=1.0)
        with pytest.raises(DomainError):
            RadialPotential(q=lambda r: r, a=3.0, b=1.0, q0=0.0, q1=1.0)


class TestBoundaryState:
    def test_impedance_is_free_impedance(self):
        st = boundary_state(0, 1.0, 3.0)
        assert abs(st.impedance - free_impedance(0, 1.0, 3.0)) <= 1e-14

    def test_negative_k_is_conjugate(self):
        plus = boundary_state(0, 1.0, 3.0)
        minus = boundary_state(0, -1.0, 3.0)
        assert minus.psi == np.conj(plus.psi)
        assert minus.dpsi == np.conj(plus.dpsi)

    def test_large_argument_wkb(self):
        st = boundary_state(4, 160.0, 3.0)
        d = abs(st.impedance - 1.0)
        assert d <= 2.0 * 4 ** 2 / (160.0 * 3.0) ** 2 + 1e-5

    def test_zero_frequency_rejected(self):
        with pytest.raises(DomainError):
            boundary_state(0, 0.0, 3.0)


class TestIntegrateInward:
    def test_free_solution_round_trip(self):
        pot0 = zero_potential()
        for n in (0, 4):
            for k in (0.5, 40.0):
                st = integrate_inward(pot0, n, k, default_step_count(k, 2.0))
                assert abs(st.impedance - free_impedance(n, k, 1.0)) <= 1e-10

    def test_rk4_self_convergence_order(self, gauss):
        ref = integrate_inward(gauss, 0, 20.0, 64000)
        steps = [1000, 2000, 4000, 8000]
        errs = [abs(integrate_inward(gauss, 0, 20.0, m).psi - ref.psi)
                / abs(ref.psi) for m in steps]
        slope = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
        assert abs(slope - 4.0) <= 0.3

    def test_halving_reduces_error_16x(self, gauss):
        ref = integrate_inward(gauss, 0, 20.0, 32000)
        e1 = abs(integrate_inward(gauss, 0, 20.0, 1000).psi - ref.psi)
        e2 = abs(integrate_inward(gauss, 0, 20.0, 2000).psi - ref.psi)
        assert 10.0 <= e1 / e2 <= 24.0

    def test_wavelength_resolution_enforced(self, gauss):
        with pytest.raises(StepResolutionError):
            integrate_inward(gauss, 0, 300.0, 100)

    def test_negative_k_state_is_conjugate(self, gauss):
        plus = integrate_inward(gauss, 0, 7.0, 2000)
        minus = integrate_inward(gauss, 0, -7.0, 2000)
        assert minus.psi == np.conj(plus.psi)

    def test_interior_stop(self, gauss):
        st = integrate_inward(gauss, 0, 5.0, 2000, r_stop=2.0)
        assert st.r == 2.0

    def test_small_k_defect_slope(self, gauss):
        ks = np.logspace(-2.3, -0.3, 9)
        defs = [abs(integrate_inward(gauss, 0, k, 2000).impedance
                    - free_impedance(0, k, 1.0)) for k in ks]
        slope = np.polyfit(np.log(ks), np.log(defs), 1)[0]
        assert slope >= 0.9

    def test_wkb_limit_at_high_frequency(self, gauss):
        # q(a) = 0, so phi(a, k) -> 1 as k grows
        d160 = abs(integrate_inward(gauss, 0, 160.0,
                                    default_step_count(160.0, 2.0)).impedance - 1)
        d320 = abs(integrate_inward(gauss, 0, 320.0,
                                    default_step_count(320.0, 2.0)).impedance - 1)
        assert d160 <= 1e-4
        assert d320 <= d160 / 2

    def test_wkb_three_term_remainder_slope_interior(self, gauss):
        # at interior r: phi - sqrt(1+q) + q'/(4ik(1+q)) = O(k^-2)
        r = 2.1
        q = float(gauss(r))
        qp = -64.0 * (r - 2.0) * q
        ks = np.array([40.0, 80.0, 160.0, 320.0])
        rem = []
        for k in ks:
            st = integrate_inward(gauss, 0, k, default_step_count(k, 1.0),
                                  r_stop=r)
            rem.append(abs(st.impedance - np.sqrt(1 + q)
                           + qp / (4j * k * (1 + q))))
        slope = np.polyfit(np.log(ks), np.log(rem), 1)[0]
        assert abs(slope + 2.0) <= 0.3


class TestGenerateData:
    def test_free_data_matches_free_impedance(self):
        grid = trapezoid_grid(20.0, 64)
        data = generate_data(zero_potential(), 0, grid)
        free = free_impedance(0, data.frequencies, 1.0)
        assert np.max(np.abs(data.values - free)) <= 1e-10

    def test_conjugate_symmetry(self, gauss):
        grid = trapezoid_grid(20.0, 64)
        data = generate_data(gauss, 0, grid)
        sym = data.values[::-1] - np.conj(data.values)
        assert np.max(np.abs(sym)) <= 1e-10

    def test_data_at_outer_radius_has_zero_defect(self, gauss):
        # w(b, k) = phi(b, k) - free_impedance(n, k, b) = 0
        grid = trapezoid_grid(20.0, 32)
        data = generate_data(gauss, 0, grid, r_eval=3.0 - 1e-12)
        free = free_impedance(0, data.frequencies, data.a)
        assert np.max(np.abs(data.values - free)) <= 1e-8

    def test_explicit_steps_and_workers_are_deterministic(self, gauss):
        grid = trapezoid_grid(20.0, 64)
        d1 = generate_data(gauss, 0, grid, workers=1)
        d2 = generate_data(gauss, 0, grid, workers=4)
        assert np.array_equal(d1.values, d2.values)

    def test_zero_node_is_skipped(self, gauss):
        grid = trapezoid_grid(20.0, 65)  # odd count -> k = 0 node
        data = generate_data(gauss, 0, grid)
        assert len(data.frequencies) == 64
        assert not np.any(data.frequencies == 0.0)

    def test_error_tagged_with_frequency(self, gauss):
        grid = trapezoid_grid(300.0, 16)
        with pytest.raises(StepResolutionError, match="while generating"):
            generate_data(gauss, 0, grid, steps=100)


class TestImpedanceDataCSV:
    def test_round_trip_exact(self, tmp_path, gauss):
        grid = trapezoid_grid(20.0, 64)
        data = generate_data(gauss, 0, grid)
        path = tmp_path / "data.csv"
        data.write_csv(path)
        back = ImpedanceData.read_csv(path)
        assert back.n == data.n and back.a == data.a and back.b == data.b
        assert np.array_equal(back.frequencies, data.frequencies)
        assert np.array_equal(back.values, data.values)

    def test_header_format(self, tmp_path, gauss):
        grid = trapezoid_grid(5.0, 8)
        data = generate_data(gauss, 2, grid)
        path = tmp_path / "data.csv"
        data.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "# n=2 a=1 b=3"

    def test_rejects_zero_frequency(self):
        with pytest.raises(DomainError):
            ImpedanceData(n=0, a=1.0, b=3.0, frequencies=np.array([-1.0, 0.0, 1.0]),
                          values=np.zeros(3, dtype=complex))

    def test_rejects_unsorted(self):
        with pytest.raises(DomainError):
            ImpedanceData(n=0, a=1.0, b=3.0, frequencies=np.array([1.0, -1.0]),
                          values=np.zeros(2, dtype=complex))
