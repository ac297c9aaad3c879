"""Kernel tabulation, convolution, and definiteness classification."""

import numpy as np
import pytest

from aggdiff.kernels import (
    EXPLICIT,
    IMPLICIT,
    INDETERMINATE,
    MIDPOINT,
    NEGATIVE_DEFINITE,
    POSITIVE_DEFINITE,
    DefinitenessClass,
    classify_definiteness,
    convolve,
    select_stage_rule,
    tabulate_kernel,
)
from aggdiff.errors import ShapeError
from aggdiff.model import Gaussian, Grid, Quadratic, TabulatedInteraction


def brute_force_convolution(table, rho, dx):
    n = rho.size
    out = np.zeros(n)
    center = n - 1
    for i in range(n):
        for k in range(n):
            out[i] += table[i - k + center] * rho[k] * dx
    return out


class TestTabulate:
    def test_quadratic_offsets(self):
        g = Grid(1, 4.0, 4)  # dx = 1
        kt = tabulate_kernel(Quadratic(1.0), g)
        assert kt.at_offset(3) == pytest.approx(4.5)
        assert kt.at_offset(0) == 0.0
        assert kt.at_offset(-3) == kt.at_offset(3)

    def test_none_gives_zero_table(self):
        g = Grid(1, 1.0, 2)
        kt = tabulate_kernel(None, g)
        assert kt.is_zero

    def test_singular_cell_average_of_abs(self):
        # W(x) = |x| has (1/dx) * integral over the origin cell = dx/4.
        class AbsPotential:
            def radial(self, r2, dimension):
                return np.sqrt(np.asarray(r2))

        for dx in (0.5, 0.25):
            g = Grid(1, 4 * dx, 4)
            kt = tabulate_kernel(AbsPotential(), g, singular=True)
            assert kt.at_offset(0) == pytest.approx(dx / 4, rel=1e-9)
            # away from the singularity the average of |x| over a cell is exact
            assert kt.at_offset(2) == pytest.approx(2 * dx, rel=1e-9)

    def test_singular_quadratic_keeps_exact_tag(self):
        g = Grid(1, 2.0, 2)
        kt = tabulate_kernel(Quadratic(1.0), g, singular=True)
        assert kt.exact_form == "quadratic+"
        # cell average of x^2/2 over the origin cell is dx^2/24
        assert kt.at_offset(0) == pytest.approx(g.dx**2 / 24, rel=1e-9)

    def test_tabulated_wrong_length_rejected(self):
        g = Grid(1, 1.0, 2)
        with pytest.raises(ShapeError):
            tabulate_kernel(TabulatedInteraction((1.0, 2.0, 1.0)), g)

    def test_2d_pointwise_radial(self):
        g = Grid(2, 2.0, 2)
        kt = tabulate_kernel(Quadratic(1.0), g)
        assert kt.at_offset(1, 2) == pytest.approx(0.5 * (1.0 + 4.0))

    def test_2d_singular_symmetry(self):
        class AbsPotential:
            def radial(self, r2, dimension):
                return np.sqrt(np.asarray(r2))

        g = Grid(2, 1.0, 1)
        kt = tabulate_kernel(AbsPotential(), g, singular=True)
        assert np.allclose(kt.values, kt.values[::-1, ::-1])
        assert kt.values[1, 1] > 0  # finite at the singular offset

    def test_non_integrable_singularity_reports_offset(self):
        from aggdiff.errors import KernelError

        class NonIntegrable:
            def radial(self, r2, dimension):
                r = np.sqrt(np.asarray(r2, dtype=float))
                with np.errstate(divide="ignore"):
                    return np.where(r > 0, 1.0 / r, np.inf)

        g = Grid(1, 1.0, 2)
        with pytest.raises(KernelError) as info:
            tabulate_kernel(NonIntegrable(), g, singular=True)
        assert info.value.offset == 0.0


class TestConvolve:
    def test_offset_zero_only(self):
        g = Grid(1, 2.0, 2)
        vals = np.zeros(7)
        vals[3] = 2.5
        from aggdiff.kernels import make_kernel_1d

        kt = make_kernel_1d(vals, g.dx)
        rho = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.allclose(convolve(kt, rho), 2.5 * rho * g.dx)

    def test_zero_field(self):
        g = Grid(1, 2.0, 2)
        kt = tabulate_kernel(Quadratic(1.0), g)
        assert not convolve(kt, np.zeros(4)).any()

    def test_three_cell_hand_sum(self):
        # dx=1, W(x)=x^2/2, rho=(1,1,1): row sums of W over offsets
        from aggdiff.kernels import make_kernel_1d

        offsets = np.arange(-2, 3)
        kt = make_kernel_1d(0.5 * offsets.astype(float) ** 2, 1.0)
        out = convolve(kt, np.ones(3))
        assert np.allclose(out, [2.5, 1.0, 2.5])
        assert np.allclose(out, brute_force_convolution(kt.values, np.ones(3), 1.0))

    @pytest.mark.parametrize("m", [8, 32])
    def test_direct_matches_brute_force_and_fft(self, m):
        rng = np.random.default_rng(m)
        g = Grid(1, 2.0, m)
        kt = tabulate_kernel(Gaussian(0.5, -1.0), g)
        worst = 0.0
        for _ in range(100):
            rho = rng.random(g.n_cells)
            direct = convolve(kt, rho, method="direct")
            fft = convolve(kt, rho, method="fft")
            scale = np.abs(direct).max()
            worst = max(worst, np.abs(direct - fft).max() / scale)
        assert worst <= 1e-12
        brute = brute_force_convolution(kt.values, rho, g.dx)
        assert np.allclose(direct, brute, rtol=1e-12, atol=1e-14)

    def test_2d_matches_brute_force(self):
        rng = np.random.default_rng(3)
        g = Grid(2, 1.0, 2)
        kt = tabulate_kernel(Gaussian(0.7, 1.0), g)
        rho = rng.random((4, 4))
        out = convolve(kt, rho, method="direct")
        n, c = 4, 3
        brute = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        brute[i, j] += kt.values[i - k + c, j - l + c] * rho[k, l]
        brute *= g.cell_measure
        assert np.allclose(out, brute, rtol=1e-12)
        fft = convolve(kt, rho, method="fft")
        assert np.allclose(out, fft, rtol=1e-11, atol=1e-14)

    def test_grid_mismatch(self):
        g = Grid(1, 2.0, 2)
        kt = tabulate_kernel(Quadratic(1.0), g)
        with pytest.raises(ShapeError):
            convolve(kt, np.ones(6))

    def test_bilinear_symmetry(self):
        rng = np.random.default_rng(11)
        g = Grid(1, 3.0, 8)
        kt = tabulate_kernel(Gaussian(0.8, -1.0), g)
        for _ in range(20):
            a = rng.random(g.n_cells)
            b = rng.random(g.n_cells)
            lhs = float(a @ convolve(kt, b))
            rhs = float(b @ convolve(kt, a))
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)

    def test_table_symmetry(self):
        g = Grid(1, 3.0, 8)
        for pot in (Quadratic(-1.0), Gaussian(0.4, 1.0)):
            kt = tabulate_kernel(pot, g)
            assert np.array_equal(kt.values, kt.values[::-1])


class TestClassification:
    def test_attractive_quadratic_exact(self):
        g = Grid(1, 2.0, 4)
        dc = classify_definiteness(tabulate_kernel(Quadratic(1.0), g))
        assert dc.label == NEGATIVE_DEFINITE
        assert not dc.used_dft

    def test_repulsive_quadratic_exact(self):
        g = Grid(1, 2.0, 4)
        dc = classify_definiteness(tabulate_kernel(Quadratic(-1.0), g))
        assert dc.label == POSITIVE_DEFINITE
        assert not dc.used_dft

    def test_attractive_gaussian_negative_definite(self):
        g = Grid(1, 5.0, 64)
        dc = classify_definiteness(tabulate_kernel(Gaussian(0.5, -1.0), g))
        assert dc.label == NEGATIVE_DEFINITE
        assert dc.used_dft

    def test_repulsive_gaussian_positive_definite(self):
        g = Grid(1, 5.0, 32)
        dc = classify_definiteness(tabulate_kernel(Gaussian(0.5, 1.0), g))
        assert dc.label == POSITIVE_DEFINITE

    def test_2d_gaussian(self):
        g = Grid(2, 3.0, 8)
        dc = classify_definiteness(tabulate_kernel(Gaussian(0.5, -1.0), g))
        assert dc.label == NEGATIVE_DEFINITE

    def test_certified_kernel_quadratic_form(self):
        # A certified negative-definite kernel's quadratic form on
        # mass-neutral differences is non-positive, by brute force.
        rng = np.random.default_rng(5)
        g = Grid(1, 2.0, 8)
        kt = tabulate_kernel(Gaussian(0.5, -1.0), g)
        assert classify_definiteness(kt).label == NEGATIVE_DEFINITE
        n, c = g.n_cells, g.n_cells - 1
        for _ in range(50):
            a = rng.random(n)
            b = rng.random(n)
            b *= a.sum() / b.sum()  # equal mass
            d = a - b
            q = sum(
                kt.values[i - k + c] * d[i] * d[k]
                for i in range(n)
                for k in range(n)
            )
            assert q <= 1e-12 * np.abs(kt.values).max() * (d @ d)

    def test_indeterminate_example(self):
        # A two-sided kernel with mixed spectrum.
        vals = np.zeros(2 * 8 - 1)
        vals[7] = 1.0
        vals[6] = vals[8] = -1.0
        from aggdiff.kernels import make_kernel_1d

        dc = classify_definiteness(make_kernel_1d(vals, 0.25))
        assert dc.label == INDETERMINATE


class TestStageRule:
    def test_defaults_per_class(self):
        nd = DefinitenessClass(NEGATIVE_DEFINITE, ("exact", "quadratic+"))
        pd = DefinitenessClass(POSITIVE_DEFINITE, ("exact", "quadratic-"))
        ind = DefinitenessClass(INDETERMINATE, ("dft", -1.0, 1.0, 0.0))
        assert select_stage_rule(nd) == EXPLICIT
        assert select_stage_rule(pd) == IMPLICIT
        assert select_stage_rule(ind) == MIDPOINT

    def test_midpoint_override_never_warns(self):
        import warnings

        pd = DefinitenessClass(POSITIVE_DEFINITE, ("exact", "quadratic-"))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert select_stage_rule(pd, MIDPOINT) == MIDPOINT

    def test_guarantee_voiding_override_warns(self):
        pd = DefinitenessClass(POSITIVE_DEFINITE, ("exact", "quadratic-"))
        with pytest.warns(UserWarning):
            assert select_stage_rule(pd, EXPLICIT) == EXPLICIT
        ind = DefinitenessClass(INDETERMINATE, ("dft", -1.0, 1.0, 0.0))
        with pytest.warns(UserWarning):
            select_stage_rule(ind, IMPLICIT)
