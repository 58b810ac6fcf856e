"""
Tests for the encoder, the section-wise denoiser and the AMP decoder
"""
import math

import numpy as np
import pytest

from exceptions import DecoderDivergenceError, DimensionMismatchError, InvalidParameterError
from models.code_params import CodeParams
from models.decoder import DecoderConfig, DecoderState, TauMode, Termination
from models.power_allocation import PAScheme
from models.simulation import OperatorKind
from services.amp_decoder import amp_decode, denoise, encode, estimate_remaining_errors, hard_decision
from services.core import bits_to_message, make_code_params, measure_errors, message_to_bits
from services.design_operator import new_operator
from services.power_allocator import allocate, flat


def _transmit(params: CodeParams, pa, seed: int):
    """Random message, Hadamard operator and received vector for one seed."""
    rng = np.random.default_rng(seed)
    op = new_operator(OperatorKind.FAST_HADAMARD, params.n, params.L, params.M, seed)
    bits = rng.integers(0, 2, size=params.message_bits, dtype=np.uint8)
    beta = bits_to_message(bits, pa, params)
    x = encode(beta, op)
    if params.sigma2 == 0:
        return op, bits, beta, x
    y = x + rng.normal(0.0, math.sqrt(params.sigma2), size=params.n)
    return op, bits, beta, y


def _state(tau2_final: float, L: int = 8, M: int = 4) -> DecoderState:
    return DecoderState(
        beta=np.zeros(L * M),
        z=np.zeros(4),
        tau2_trace=(tau2_final + 1.0, tau2_final),
        iterations_run=2,
        termination=Termination.CONVERGED,
    )


class TestDenoise:

    def test_equal_inputs_spread_evenly(self):
        pa = flat(2, 2.0)
        out = denoise(np.zeros(8), 1.0, pa, n=8)
        assert np.allclose(out, math.sqrt(8.0) / 4)

    def test_small_tau_concentrates_on_the_maximum(self):
        pa = flat(1, 1.0)
        out = denoise(np.array([0.0, 1.0, 0.0, 0.0]), 1e-6, pa, n=4)
        assert np.allclose(out, [0.0, 2.0, 0.0, 0.0])

    def test_two_column_example(self):
        pa = flat(1, 1.0)
        out = denoise(np.array([1.0, 0.0]), 1.0, pa, n=1)
        e = math.e
        assert out == pytest.approx([e / (e + 1), 1 / (e + 1)])

    def test_section_mass_is_conserved(self):
        rng = np.random.default_rng(0)
        pa = allocate(PAScheme.EXPONENTIAL, make_code_params(16, 32, 1.0, 15.0, 1.0))
        s = rng.normal(0.0, 30.0, size=16 * 32)
        out = denoise(s, 0.01, pa, n=80)
        sums = out.reshape(16, 32).sum(axis=1)
        assert np.allclose(sums, pa.amplitudes(80), rtol=1e-8)
        assert np.all(out >= 0)

    def test_mask_zeroes_other_sections(self):
        pa = flat(3, 3.0)
        out = denoise(np.ones(6), 1.0, pa, n=4, section_mask=np.array([True, False, True]))
        assert np.all(out[2:4] == 0)
        assert np.all(out[:2] > 0)

    def test_rejects_non_positive_tau2(self):
        with pytest.raises(InvalidParameterError):
            denoise(np.zeros(4), 0.0, flat(1, 1.0), n=4)


class TestHardDecision:

    def test_largest_entry_wins(self):
        pa = flat(2, 2.0)
        amplitude = math.sqrt(8.0)
        beta = amplitude * np.array([0.9, 0.1, 0.2, 0.8])
        decided = hard_decision(beta, pa, 8)
        assert decided.indices.tolist() == [0, 1]
        assert decided.values[0] == pytest.approx(amplitude)

    def test_ties_go_to_the_lowest_index(self):
        pa = flat(1, 1.0)
        decided = hard_decision(np.array([0.5, 0.5, 0.5, 0.5]), pa, 4)
        assert decided.indices.tolist() == [0]

    def test_idempotent(self):
        pa = flat(2, 2.0)
        first = hard_decision(np.array([0.1, 0.3, 0.6, 0.0]), pa, 8)
        assert hard_decision(first.values, pa, 8) == first


class TestRemainingErrors:

    def test_no_excess_power(self):
        assert estimate_remaining_errors(_state(1.0), flat(8, 8.0), sigma2=1.0, n=16) == 0

    def test_all_power_undecoded(self):
        assert estimate_remaining_errors(_state(9.0), flat(8, 8.0), sigma2=1.0, n=16) == 8

    def test_counts_smallest_sections(self):
        assert estimate_remaining_errors(_state(4.0), flat(8, 8.0), sigma2=1.0, n=16, slack=0.0) == 3


class TestAmpDecode:

    def test_noiseless_recovery(self):
        params = make_code_params(64, 16, 0.5, 15.0, 0.0)
        pa = flat(64, 15.0)
        cfg = DecoderConfig(max_iterations=30)
        for seed in range(20):
            op, bits, beta, y = _transmit(params, pa, seed)
            state = amp_decode(y, op, pa, params, cfg)
            decided = hard_decision(state, pa, params.n)
            assert decided == beta
            assert np.array_equal(message_to_bits(decided), bits)

    def test_initial_tau2_tracks_total_power(self):
        params = make_code_params(256, 16, 1.0, 15.0, 1.0)
        pa = flat(256, 15.0)
        cfg = DecoderConfig(max_iterations=1)
        first = []
        for seed in range(20):
            op, _, _, y = _transmit(params, pa, seed)
            state = amp_decode(y, op, pa, params, cfg)
            assert state.tau2_trace[0] == pytest.approx(y.dot(y) / params.n)
            first.append(state.tau2_trace[0])
        assert np.mean(first) == pytest.approx(16.0, rel=0.05)

    def test_early_stop_adds_no_errors(self):
        params = make_code_params(256, 64, 1.0, 15.0, 1.0)
        pa = flat(256, 15.0)
        for seed in range(3):
            op, bits, beta, y = _transmit(params, pa, seed)
            early = amp_decode(y, op, pa, params, DecoderConfig(max_iterations=64))
            full = amp_decode(y, op, pa, params, DecoderConfig(max_iterations=64, early_stop_threshold=0.0))
            assert full.iterations_run == 64
            assert full.termination is Termination.MAX_ITERATIONS
            assert early.iterations_run <= 64
            errors = [
                measure_errors(hard_decision(s, pa, params.n), beta,
                               message_to_bits(hard_decision(s, pa, params.n)), bits).section_errors
                for s in (early, full)
            ]
            assert errors[0] == errors[1]

    def test_offline_schedule_is_used_verbatim(self):
        params = make_code_params(16, 8, 1.0, 4.0, 1.0)
        pa = flat(16, 4.0)
        op, _, _, y = _transmit(params, pa, 0)
        cfg = DecoderConfig(max_iterations=5, early_stop_threshold=0.0, tau_mode=TauMode.OFFLINE_SE)
        state = amp_decode(y, op, pa, params, cfg, tau2_schedule=[5.0, 3.0, 2.0])
        assert state.tau2_trace == (5.0, 3.0, 2.0, 2.0, 2.0)

    def test_callback_sees_every_iteration(self, mocker):
        params = make_code_params(32, 8, 1.0, 8.0, 1.0)
        pa = flat(32, 8.0)
        op, _, _, y = _transmit(params, pa, 1)
        callback = mocker.Mock()
        state = amp_decode(y, op, pa, params, DecoderConfig(max_iterations=6), on_iteration=callback)
        assert callback.call_count == state.iterations_run
        t, s, tau2 = callback.call_args_list[0].args
        assert t == 0
        assert s.shape == (params.length,)
        assert tau2 == state.tau2_trace[0]

    def test_section_mask_pins_other_sections(self):
        params = make_code_params(16, 8, 1.0, 4.0, 1.0)
        pa = flat(16, 4.0)
        op, _, _, y = _transmit(params, pa, 2)
        mask = np.zeros(16, dtype=bool)
        mask[:10] = True
        state = amp_decode(y, op, pa, params, DecoderConfig(max_iterations=4), section_mask=mask)
        assert np.all(state.beta.reshape(16, 8)[10:] == 0)

    def test_non_finite_input_diverges(self):
        params = make_code_params(16, 8, 1.0, 4.0, 1.0)
        pa = flat(16, 4.0)
        op = new_operator(OperatorKind.FAST_HADAMARD, params.n, 16, 8, 0)
        with pytest.raises(DecoderDivergenceError):
            amp_decode(np.full(params.n, np.nan), op, pa, params)

    def test_dimension_mismatch(self):
        params = make_code_params(16, 8, 1.0, 4.0, 1.0)
        pa = flat(16, 4.0)
        op = new_operator(OperatorKind.FAST_HADAMARD, params.n, 16, 8, 0)
        with pytest.raises(DimensionMismatchError):
            amp_decode(np.zeros(params.n + 1), op, pa, params)


@pytest.mark.slow
class TestLargeSystem:

    def test_online_estimate_tracks_effective_noise(self):
        params = make_code_params(1024, 512, 1.6, 15.0, 1.0)
        pa = allocate(PAScheme.ITERATIVE, params)
        for seed in range(16):
            op, _, beta, y = _transmit(params, pa, seed)
            gaps = []

            def track(t, s, tau2):
                gaps.append(abs(np.mean((s - beta.values) ** 2) - tau2) / tau2)

            state = amp_decode(y, op, pa, params, DecoderConfig(max_iterations=64), on_iteration=track)
            assert state.tau2_trace[0] == pytest.approx(16.0, rel=0.05)
            assert max(gaps) <= 0.05

    def test_early_stop_is_harmless_near_capacity(self):
        params = make_code_params(512, 256, 1.5, 15.0, 1.0)
        pa = allocate(PAScheme.ITERATIVE, params)
        totals = {"early": 0, "full": 0}
        iterations = {"early": 0, "full": 0}
        for seed in range(100):
            op, bits, beta, y = _transmit(params, pa, seed)
            runs = {
                "early": amp_decode(y, op, pa, params, DecoderConfig(max_iterations=64)),
                "full": amp_decode(y, op, pa, params, DecoderConfig(max_iterations=64, early_stop_threshold=0.0)),
            }
            for name, state in runs.items():
                decided = hard_decision(state, pa, params.n)
                totals[name] += measure_errors(decided, beta, message_to_bits(decided), bits).section_errors
                iterations[name] += state.iterations_run
        assert totals["early"] == totals["full"]
        assert iterations["early"] < iterations["full"]
