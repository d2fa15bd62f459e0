"""The rational matrix model: exact p-adic arithmetic, shapes, and oracles."""

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdlcw.kernel import INF_LEVEL, UnsupportedElementError
from tdlcw.linear import (
    FactorizationError,
    LinearModel,
    NotPIntegralError,
    QMatrix,
    ShapeSubgroup,
    congruence_shape,
    eigenbasis,
    identity_matrix,
    iwahori_shape,
    mat_det,
    mat_inv,
    mat_mul,
    newton_valuations,
    project_matrix,
    scale_formula,
    ul_factor,
    validate_shape,
    vp,
)

INF = math.inf


def invertible_2x2():
    entry = st.integers(-6, 6)
    return st.tuples(entry, entry, entry, entry).filter(
        lambda e: e[0] * e[3] - e[1] * e[2] != 0
    ).map(lambda e: QMatrix.make([[e[0], e[1]], [e[2], e[3]]], 2))


class TestValuation:
    def test_basic_values(self):
        assert vp(8, 2) == 3
        assert vp(Fraction(3, 4), 2) == -2
        assert vp(Fraction(9, 5), 3) == 2
        assert vp(0, 2) == INF
        assert vp(7, 2) == 0

    @settings(max_examples=100, deadline=None)
    @given(
        a=st.fractions(min_value=-50, max_value=50).filter(lambda q: q != 0),
        b=st.fractions(min_value=-50, max_value=50).filter(lambda q: q != 0),
        p=st.sampled_from([2, 3, 5]),
    )
    def test_valuation_is_multiplicative(self, a, b, p):
        assert vp(a * b, p) == vp(a, p) + vp(b, p)
        assert vp(a + b, p) >= min(vp(a, p), vp(b, p)) if a + b != 0 else True


class TestMatrixArithmetic:
    @settings(max_examples=80, deadline=None)
    @given(x=invertible_2x2(), y=invertible_2x2())
    def test_mul_inv_det(self, x, y):
        assert mat_det(mat_mul(x.entries, y.entries)) == x.det * y.det
        assert x.mul(x.inv()).is_identity()

    def test_3x3_inverse(self):
        m = QMatrix.make([[2, 1, 0], [0, 1, 1], [1, 0, 1]], 2)
        assert m.mul(m.inv()).is_identity()

    def test_singular_rejected(self):
        with pytest.raises(ValueError):
            QMatrix.make([[1, 2], [2, 4]], 2)


class TestNewtonValuations:
    def test_diagonal(self):
        g = QMatrix.make([[4, 0], [0, 1]], 2)
        assert newton_valuations(g) == [2, 0]

    def test_conjugation_invariance(self):
        g = QMatrix.make([[2, 0], [0, 1]], 2)
        c = QMatrix.make([[1, 1], [0, 1]], 2)
        gc = c.mul(g).mul(c.inv())
        assert newton_valuations(gc) == newton_valuations(g)

    def test_irrational_eigenvalues(self):
        # x^2 - 2: eigenvalue valuations are each 1/2.
        g = QMatrix.make([[0, 1], [2, 0]], 2)
        assert newton_valuations(g) == [Fraction(1, 2), Fraction(1, 2)]

    def test_3x3(self):
        g = QMatrix.make([[4, 0, 0], [0, 2, 0], [0, 0, 1]], 2)
        assert newton_valuations(g) == [2, 1, 0]


class TestScaleFormula:
    def test_battery(self):
        assert scale_formula(QMatrix.make([[2, 0], [0, 1]], 2)) == 2
        assert scale_formula(QMatrix.make([[3, 0], [0, Fraction(1, 3)]], 3)) == 9
        assert scale_formula(identity_matrix(2, 2)) == 1
        g3 = QMatrix.make([[4, 0, 0], [0, 2, 0], [0, 0, 1]], 2)
        assert scale_formula(g3) == 16

    def test_elliptic_element_is_uniscalar(self):
        assert scale_formula(QMatrix.make([[0, 1], [-1, 0]], 2)) == 1


class TestEigenbasis:
    def test_orders_by_descending_valuation(self):
        g = QMatrix.make([[1, 0], [0, 4]], 2)
        basis, vals = eigenbasis(g)
        assert vals == (2, 0)
        d = mat_mul(mat_mul(mat_inv(basis.entries), g.entries), basis.entries)
        assert d[0][0] == 4 and d[1][1] == 1

    def test_non_diagonal(self):
        c = QMatrix.make([[1, 1], [1, 2]], 2)
        g = c.mul(QMatrix.make([[2, 0], [0, 1]], 2)).mul(c.inv())
        basis, vals = eigenbasis(g)
        assert vals == (1, 0)
        d = mat_mul(mat_mul(mat_inv(basis.entries), g.entries), basis.entries)
        assert d[0][1] == 0 and d[1][0] == 0

    def test_rejects_irrational_spectrum(self):
        with pytest.raises(UnsupportedElementError):
            eigenbasis(QMatrix.make([[0, 1], [2, 0]], 2))


class TestULFactor:
    @settings(max_examples=80, deadline=None)
    @given(x=invertible_2x2())
    def test_factors_multiply_back(self, x):
        try:
            u, low = ul_factor(x.entries)
        except FactorizationError:
            # Bruhat obstruction: the anti-diagonal pivot vanished.
            assert x.entries[1][1] == 0
            return
        assert mat_mul(u, low) == x.entries
        assert u[0][0] == 1 and u[1][1] == 1 and u[1][0] == 0
        assert low[0][1] == 0


class TestShapes:
    def test_validate_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            validate_shape(((-1, 0), (0, 0)))
        with pytest.raises(ValueError):
            validate_shape(((0, -2), (1, 0)))
        validate_shape(iwahori_shape(2))
        validate_shape(congruence_shape(3, 2))

    def test_contains(self):
        model = LinearModel(2, 2)
        iw = ShapeSubgroup(model.identity, iwahori_shape(2))
        assert iw.contains(QMatrix.make([[1, 2], [1, 1]], 2))
        assert not iw.contains(QMatrix.make([[1, 1], [0, 1]], 2))
        assert not iw.contains(QMatrix.make([[2, 0], [0, 1]], 2))

    def test_window_image_order_closed_form(self):
        model = LinearModel(2, 2)
        iw = ShapeSubgroup(model.identity, iwahori_shape(2))
        img = iw.window_image(2)
        assert img.order == iw.image_order(2)
        assert img.is_subgroup()
        cong = model.filtration(1)
        # Each of the 4 entries of x - I ranges over 2Z/8Z.
        assert cong.image_order(3) == cong.window_image(3).order == 4**4

    def test_reference_image_is_full_window(self):
        model = LinearModel(3, 2)
        assert model.reference().window_image(1).order == model.window(1).order

    def test_conjugated_basis_image(self):
        model = LinearModel(2, 2)
        c = QMatrix.make([[1, 1], [0, 1]], 2)
        iw = ShapeSubgroup(c, iwahori_shape(2))
        img = iw.window_image(2)
        window = model.window(2)
        b = project_matrix(c, 2)
        binv = window.inv(b)
        plain = ShapeSubgroup(model.identity, iwahori_shape(2)).window_image(2)
        assert img.elements == {
            window.mul(window.mul(b, x), binv) for x in plain.elements
        }

    def test_intersect_and_subset(self):
        model = LinearModel(2, 2)
        a = model.filtration(1)
        b = ShapeSubgroup(model.identity, iwahori_shape(2))
        both = a.intersect(b)
        assert both <= a and both <= b
        assert model.filtration(2) <= model.filtration(1)


class TestProjection:
    def test_project_matrix_with_denominators(self):
        x = QMatrix.make([[Fraction(1, 3), 0], [0, 1]], 2)
        window_code = project_matrix(x, 3)
        # 1/3 = 3^-1 mod 8 = 3
        assert LinearModel(2, 2).window(3).decode(window_code)[0] == 3

    def test_project_rejects_non_integral(self):
        with pytest.raises(NotPIntegralError):
            project_matrix(QMatrix.make([[Fraction(1, 2), 0], [0, 1]], 2), 2)

    def test_project_image(self):
        model = LinearModel(2, 2)
        img = model.filtration(1).window_image(2)
        down = model.project_image(img, 1)
        assert down.order == 1


class TestModelOracles:
    def test_con_oracle_diagonal(self):
        # Conjugation by diag(2,1) doubles the (0,1) entry, so the upper
        # unipotents contract; the lower ones contract under the inverse.
        model = LinearModel(2, 2)
        g = model.parse_element("2,0;0,1")
        assert model.con_oracle(g, model.parse_element("1,4;0,1"))
        assert not model.con_oracle(g, model.parse_element("1,0;1,1"))
        assert not model.con_oracle(g, model.parse_element("2,0;0,1/2"))
        assert model.con_oracle(g.inv(), model.parse_element("1,0;1,1"))

    def test_par_oracle(self):
        model = LinearModel(2, 2)
        g = model.parse_element("2,0;0,1")
        assert model.par_oracle(g, model.parse_element("1,1;0,1"))
        assert model.par_oracle(g, model.parse_element("3,0;0,5"))
        assert not model.par_oracle(g, model.parse_element("1,0;4,1"))

    def test_con_matches_trajectory_contraction(self):
        from tdlcw.tidy import trajectory_contracts

        model = LinearModel(2, 2)
        g = model.parse_element("2,0;0,1")
        rng = random.Random(3)
        for x in model.sample_con_elements(g, rng, 20):
            assert model.con_oracle(g, x)
            assert trajectory_contracts(model, g, x, K=4, N=12)

    def test_bounded_elements_have_trivial_dynamics(self):
        model = LinearModel(2, 2)
        for text in ["0,1;-1,0", "1,1;0,1", "3,2;2,3"]:
            g = model.parse_element(text)
            assert model.con_oracle(g, model.identity)
            assert not model.con_oracle(g, model.parse_element("1,2;0,1"))
            assert model.par_oracle(g, model.parse_element("1,2;0,1"))
            assert model.con_closure_image(g, 2).order == 1
            assert model.nub_image(g, 2).order == 1

    def test_con_closure_image_order(self):
        model = LinearModel(2, 2)
        g = model.parse_element("2,0;0,1")
        # Upper unipotent subgroup mod 2^K has order 2^K.
        for K in range(1, 4):
            assert model.con_closure_image(g, K).order == 2**K

    def test_proximity_level(self):
        model = LinearModel(2, 2)
        assert model.proximity_level(model.identity) == INF_LEVEL
        assert model.proximity_level(model.parse_element("1,0;4,1")) == 2
        assert model.proximity_level(model.parse_element("2,0;0,1")) == -1
        assert model.proximity_level(model.parse_element("1,1/2;0,1")) == -1


class TestSplitAndParts:
    def test_split_factors_exactly(self):
        model = LinearModel(2, 2)
        g = model.parse_element("2,0;0,1")
        U = ShapeSubgroup(model.identity, iwahori_shape(2))
        parts = model.u_parts_symbolic(U, g)
        x = model.parse_element("1,2;1,1")
        w_minus, w_plus = model.split(x, U, g, parts)
        assert w_minus.mul(w_plus) == x
        assert parts.u_minus.contains(w_minus)
        assert parts.u_plus.contains(w_plus)

    def test_parts_of_invariant_subgroup(self):
        model = LinearModel(2, 2)
        g = model.parse_element("0,1;-1,0")
        U = model.filtration(1)
        parts = model.u_parts_symbolic(U, g)
        assert parts.u_plus is U and parts.u_minus is U and parts.u_zero is U

    def test_net_schedule_satisfies_both_hypotheses(self):
        for p in (2, 3):
            model = LinearModel(p, 2)
            g = model.parse_element(f"{p},0;0,1")
            for n, U, u in model.net_schedule(g, 5):
                assert U.contains(u)
                assert U.contains(model.conjugate(g, u))
                assert model.proximity_level(u) == n + 1


def test_default_resolution_stays_under_the_enumeration_budget():
    from tdlcw.kernel import DEFAULT_CAP, MatrixWindow

    for p, n in [(2, 2), (3, 2), (2, 3)]:
        model = LinearModel(p, n)
        K = model.default_resolution
        assert MatrixWindow(n, p, K).order <= DEFAULT_CAP // 16
        assert MatrixWindow(n, p, K + 1).order > DEFAULT_CAP // 16


def test_unsupported_size_rejected():
    with pytest.raises(ValueError):
        LinearModel(2, 4)
