"""
Tests for the power allocation constructors
"""
import logging
import math

import numpy as np
import pytest

from exceptions import InvalidParameterError
from models.power_allocation import PAScheme, PowerAllocation
from services.core import make_code_params
from services.power_allocator import (
    allocate,
    default_rpa,
    exponential,
    flat,
    flattening_block,
    iterative,
    match_modified_exponential,
    min_required_power,
    modified_exponential,
    rpa_grid,
)

LN2 = math.log(2.0)


class TestMinRequiredPower:

    def test_values(self):
        assert min_required_power(4.0, 0.5, 2) == pytest.approx(2 * LN2)
        assert min_required_power(16.0, 1.6, 1024) == pytest.approx(0.034657, abs=1e-6)
        assert min_required_power(16.0, 0.0, 1024) == 0.0

    def test_rejects_non_positive_tau2(self):
        with pytest.raises(InvalidParameterError):
            min_required_power(0.0, 1.0, 4)


class TestClosedFormAllocations:

    def test_flat(self):
        assert flat(4, 4.0).powers.tolist() == [1.0, 1.0, 1.0, 1.0]
        assert flat(1, 3.0).powers.tolist() == [3.0]

    def test_exponential(self):
        assert exponential(1, 3.0, 0.7).powers == pytest.approx([3.0])
        assert exponential(2, 3.0, 1.0).powers == pytest.approx([2.0, 1.0])

    def test_exponential_sums_to_power(self):
        pa = exponential(512, 15.0, 2.0)
        assert pa.powers.sum() == pytest.approx(15.0, rel=1e-12)

    def test_modified_exponential_example(self):
        pa = modified_exponential(4, 4.0, 1.0, 1.0, 0.5)
        kappa = 4.0 / (2 ** -0.5 + 3 * 2 ** -1)
        expected = kappa * np.array([2 ** -0.5, 2 ** -1, 2 ** -1, 2 ** -1])
        assert pa.powers == pytest.approx(expected)

    def test_modified_exponential_limits(self):
        assert modified_exponential(16, 8.0, 2.0, 0.0, 0.3).powers == pytest.approx(np.full(16, 0.5))
        assert modified_exponential(16, 8.0, 2.0, 1.0, 1.0).powers == pytest.approx(exponential(16, 8.0, 2.0).powers)

    @pytest.mark.parametrize("a, f", [(-0.1, 0.5), (1.0, 1.5), (1.0, -0.2)])
    def test_modified_exponential_rejects(self, a, f):
        with pytest.raises(InvalidParameterError):
            modified_exponential(8, 1.0, 1.0, a, f)


class TestIterative:

    def test_golden_trace_with_flattening(self):
        pa = iterative(4, 2, 1.0, 3.0, 0.7)
        assert pa.powers == pytest.approx([0.9704, 0.9704, 0.5296, 0.5296], abs=1e-4)
        assert pa.powers.sum() == pytest.approx(3.0, rel=1e-12)
        assert pa.parameters["flattening_block"] == 1

    def test_golden_trace_flat_from_start(self):
        pa = iterative(2, 2, 1.0, 3.0, 0.5)
        assert pa.powers == pytest.approx([1.5, 1.5])
        assert pa.parameters["flattening_block"] == 0

    def test_zero_rate_is_flat(self):
        pa = iterative(8, 4, 1.0, 8.0, 0.0)
        assert pa.scheme is PAScheme.FLAT
        assert pa.powers.tolist() == [1.0] * 8

    def test_block_must_divide_sections(self):
        with pytest.raises(InvalidParameterError):
            iterative(10, 3, 1.0, 5.0, 1.0)

    def test_rescales_when_power_runs_out(self, caplog):
        with caplog.at_level(logging.WARNING):
            pa = iterative(4, 4, 1.0, 1.0, 10.0)
        assert pa.powers == pytest.approx([1.0, 0.0, 0.0, 0.0])
        assert "rescaling" in caplog.text
        assert pa.parameters["flattening_block"] is None

    def test_monotone_on_random_configs(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            L = int(rng.choice([4, 8, 12, 32, 64, 96, 128]))
            divisors = [b for b in range(1, L + 1) if L % b == 0]
            B = int(rng.choice(divisors))
            P = float(rng.uniform(0.5, 30.0))
            pa = iterative(L, B, float(rng.uniform(0.0, 2.0)), P, float(rng.uniform(0.0, 3.0)))
            assert np.all(np.diff(pa.powers) <= 1e-12 * P)
            assert pa.powers.sum() == pytest.approx(P, rel=1e-9)

    def test_flattening_block_of_running_example(self):
        pa = iterative(512, 16, 1.0, 15.0, 1.4)
        assert flattening_block(pa, 16) == 10
        tail = pa.powers[10 * 32:]
        assert np.all(tail == tail[0])


class TestFlatteningBlock:

    def test_flat_allocation_flattens_at_zero(self):
        assert flattening_block(flat(8, 8.0), 4) == 0

    def test_exponential_never_flattens(self):
        assert flattening_block(exponential(8, 8.0, 1.0), 4) is None

    def test_modified_exponential(self):
        assert flattening_block(modified_exponential(8, 8.0, 1.0, 1.0, 0.5), 4) == 2

    def test_blocks_must_divide(self):
        with pytest.raises(InvalidParameterError):
            flattening_block(flat(8, 8.0), 3)


class TestRpaHelpers:

    def test_default_rpa(self):
        assert default_rpa(1.5) == 1.5
        assert default_rpa(0.8) == 0.0

    def test_grid_above_one(self):
        assert rpa_grid(1.5, 2, 0.1) == pytest.approx([1.2, 1.35, 1.5, 1.65, 1.8])

    def test_grid_below_one_includes_flat(self):
        assert rpa_grid(0.5, 1, 0.1) == pytest.approx([0.0, 0.45, 0.5, 0.55])

    def test_match_modified_exponential(self):
        reference = iterative(512, 16, 1.0, 15.0, 1.4)
        a, f, matched = match_modified_exponential(reference, 2.0, 16)
        assert f == pytest.approx(10 * 32 / 512)
        assert a > 0
        assert matched.powers[0] == pytest.approx(reference.powers[0], rel=1e-6)
        assert matched.scheme is PAScheme.MODIFIED_EXPONENTIAL


class TestAllocate:

    def test_default_iterative_policy(self):
        params = make_code_params(64, 16, 1.5, 15.0, 1.0)
        pa = allocate(PAScheme.ITERATIVE, params)
        assert pa.scheme is PAScheme.ITERATIVE
        assert pa.parameters["R_PA"] == 1.5
        assert pa.parameters["B"] == 64

    def test_low_rate_defaults_to_flat(self):
        params = make_code_params(64, 16, 0.8, 15.0, 1.0)
        assert allocate(PAScheme.ITERATIVE, params).scheme is PAScheme.FLAT

    def test_exponential_uses_capacity(self):
        params = make_code_params(64, 16, 1.5, 15.0, 1.0)
        pa = allocate(PAScheme.EXPONENTIAL, params)
        assert pa.parameters["C"] == pytest.approx(2.0)


class TestPowerAllocationModel:

    def test_rejects_increasing_powers(self):
        with pytest.raises(InvalidParameterError):
            PowerAllocation(powers=np.array([1.0, 2.0]), P=3.0, scheme=PAScheme.FLAT)

    def test_rejects_wrong_total(self):
        with pytest.raises(InvalidParameterError):
            PowerAllocation(powers=np.array([1.0, 1.0]), P=3.0, scheme=PAScheme.FLAT)
