import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from avagrad_lab.core import (
    NonFiniteError,
    RngStream,
    Schedule,
    clamp_box,
    elementwise,
    map_scalar,
    mix_seed,
    norms,
    schedule_eval,
)


class TestElementwise:
    def test_add(self):
        assert np.array_equal(elementwise([1, 2], [3, 4], "add"), [4, 6])

    def test_div(self):
        assert np.array_equal(elementwise([1, 1], [2, 4], "div"), [0.5, 0.25])

    def test_mul_matches_arbitrary_precision_product(self):
        # exact binary values via Decimal: the correctly rounded double product
        getcontext().prec = 60
        expected = float(Decimal(0.1) * Decimal(0.1))
        out = elementwise([0.1], [0.1], "mul")
        assert out[0] == expected
        assert out[0] == 0.010000000000000002

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            elementwise([1, 2], [1], "add")

    def test_division_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            elementwise([1.0], [0.0], "div")

    def test_nonfinite_output(self):
        with pytest.raises(NonFiniteError):
            elementwise([1e308], [1e308], "mul")

    def test_nonfinite_input(self):
        with pytest.raises(NonFiniteError):
            elementwise([np.nan], [1.0], "add")

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            elementwise([1.0], [1.0], "pow")

    def test_mul_by_ones_is_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(size=rng.integers(1, 50))
            assert np.array_equal(elementwise(a, np.ones_like(a), "mul"), a)


class TestMapScalar:
    def test_sqrt(self):
        assert np.array_equal(map_scalar([4, 9], "sqrt"), [2, 3])

    def test_square(self):
        assert np.array_equal(map_scalar([2], "square"), [4])

    def test_scale(self):
        assert np.array_equal(map_scalar([1, 2], "scale", 0.5), [0.5, 1.0])

    def test_add_scalar(self):
        assert np.array_equal(map_scalar([1, 2], "add_scalar", 3.0), [4.0, 5.0])

    def test_sqrt_negative(self):
        with pytest.raises(ValueError):
            map_scalar([-1.0], "sqrt")

    def test_scale_requires_constant(self):
        with pytest.raises(ValueError):
            map_scalar([1.0], "scale")


class TestNorms:
    def test_three_four_five(self):
        assert norms([3, 4]).l2 == 5.0

    def test_signed_extremes(self):
        n = norms([-2, 1])
        assert n.linf == 2.0 and n.min == -2.0 and n.max == 1.0

    def test_against_bruteforce_sum(self):
        n = norms([5, 3.3333333333])
        brute = math.sqrt(5 * 5 + 3.3333333333 * 3.3333333333)
        assert abs(n.l2 - brute) <= 1e-15 * brute
        assert abs(n.l2 - 6.0092521) < 1e-6

    def test_bruteforce_large_dim(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=10_000)
        brute = math.sqrt(sum(float(x) * float(x) for x in a))
        assert abs(norms(a).l2 - brute) <= 1e-15 * brute

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            norms([])


class TestClampBox:
    def test_basic(self):
        assert np.array_equal(clamp_box([1.2, 0.5, -0.1], 0, 1), [1.0, 0.5, 0.0])

    def test_interior_fixed(self):
        assert np.array_equal(clamp_box([0.4995], 0, 1), [0.4995])

    def test_large_negative_lands_on_boundary(self):
        assert np.array_equal(clamp_box([-1e7], 0, 1), [0.0])

    def test_bounds_out_of_order(self):
        with pytest.raises(ValueError):
            clamp_box([0.5], 1.0, 0.0)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = 10 * rng.normal(size=8)
            once = clamp_box(a, -1, 2)
            assert np.array_equal(clamp_box(once, -1, 2), once)


class TestSchedule:
    def test_inverse_sqrt(self):
        assert schedule_eval(Schedule.inverse_sqrt(0.9), 4) == 0.45

    def test_inverse_t_start(self):
        assert schedule_eval(Schedule.inverse_t(), 1) == 0.0

    def test_constant_large_t(self):
        assert schedule_eval(Schedule.constant(0.999), 10**6) == 0.999

    def test_t_zero_rejected(self):
        with pytest.raises(ValueError):
            schedule_eval(Schedule.constant(0.9), 0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Schedule("linear", 0.5)

    def test_inverse_t_monotone_below_one(self):
        s = Schedule.inverse_t()
        vals = [schedule_eval(s, t) for t in (1, 2, 3, 10, 100, 10**6)]
        assert all(v < 1.0 for v in vals)
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestRngStream:
    def test_fixed_seed_reproduces_integer_sequence(self):
        a = RngStream(987654321).integers(0, 2**63, size=256)
        b = RngStream(987654321).integers(0, 2**63, size=256)
        assert np.array_equal(a, b)

    def test_derived_streams_differ(self):
        base = RngStream(5)
        u0 = base.derive(0).random(32)
        u1 = base.derive(1).random(32)
        assert not np.array_equal(u0, u1)

    def test_derivation_matches_mix_seed(self):
        base = RngStream(5)
        assert base.derive(3).seed == mix_seed(5, 3)
        assert np.array_equal(base.derive(3).random(8), RngStream(mix_seed(5, 3)).random(8))

    def test_scalar_and_array_draws_agree(self):
        # the replica fast path draws in blocks while run_trial draws one at a time
        s1, s2 = RngStream(42), RngStream(42)
        scalars = np.array([s1.random() for _ in range(100)])
        assert np.array_equal(scalars, s2.random(100))

    def test_chunked_draws_concatenate(self):
        s1, s2 = RngStream(9), RngStream(9)
        whole = s1.random(100)
        parts = np.concatenate([s2.random(37), s2.random(63)])
        assert np.array_equal(whole, parts)

    def test_mix_seed_order_sensitive(self):
        assert mix_seed(1, 2, 3) != mix_seed(1, 3, 2)
        assert mix_seed(1) != mix_seed(1, 0)
