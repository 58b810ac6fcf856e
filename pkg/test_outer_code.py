"""
Tests for the LDPC outer code, the section layout and the three-stage decoder
"""
import dataclasses
import itertools
import logging
import math

import numpy as np
import pytest
from scipy.sparse import csr_matrix

from exceptions import (
    AlistFormatError,
    DimensionMismatchError,
    InvalidParameterError,
    LayoutError,
    OuterCodeError,
    RankDeficientError,
)
from models.decoder import DecoderState, Termination
from models.outer_code import ParityCheckMatrix
from models.simulation import OperatorKind
from services.amp_decoder import amp_decode, encode, hard_decision
from services.core import bits_to_indices, bits_to_message, make_code_params, message_to_bits
from services.design_operator import new_operator
from services.ldpc import build_encoder, generate_regular_ldpc, ldpc_encode, minsum_decode
from services.outer_code import (
    ThreeStageDecoder,
    build_beta_ldpc,
    outer_encode,
    plan_layout,
    posteriors_to_llrs,
    section_to_bit_posteriors,
    sections_to_bit_posteriors,
    three_stage_decode,
)
from services.power_allocator import flat
from services.simulator import awgn
from utils import gf2
from utils.alist import read_alist, write_alist


def _pcm(rows) -> ParityCheckMatrix:
    return ParityCheckMatrix(H=csr_matrix(np.array(rows, dtype=np.uint8)))


def _bit_posterior_reference(section: np.ndarray) -> np.ndarray:
    """Sum of the weights whose index has bit b set, over the section total."""
    M = section.size
    log_m = int(math.log2(M))
    total = section.sum()
    probs = np.zeros(log_m)
    for j in range(M):
        pattern = format(j, f"0{log_m}b")
        for b in range(log_m):
            if pattern[b] == "1":
                probs[b] += section[j]
    return probs / total


class TestLayout:

    def test_aligned_layout(self):
        layout = plan_layout(1024, 256, 5120, 4096)
        assert (layout.L_parity, layout.L_user, layout.L_protected, layout.L_ldpc, layout.L_unprotected) == \
            (128, 896, 512, 640, 384)
        assert not layout.has_fractional_boundary
        assert layout.first_ldpc_section == 384

    def test_fractional_layout(self):
        layout = plan_layout(768, 512, 5120, 4096)
        assert float(layout.L_user) == pytest.approx(654.22, abs=0.01)
        assert float(layout.L_parity) == pytest.approx(113.78, abs=0.01)
        assert float(layout.L_unprotected) == pytest.approx(199.11, abs=0.01)
        assert float(layout.L_protected) == pytest.approx(455.11, abs=0.01)
        assert float(layout.L_ldpc) == pytest.approx(568.89, abs=0.01)
        assert layout.has_fractional_boundary
        assert layout.first_ldpc_section == 200
        assert layout.unprotected_bits == 1792
        assert layout.user_bits == 1792 + 4096
        assert layout.unprotected_mask().sum() == 200

    def test_counts_add_up(self):
        layout = plan_layout(16, 16, 18, 9)
        assert layout.L_unprotected + layout.L_ldpc == layout.L
        assert layout.L_user + layout.L_parity == layout.L
        assert layout.total_bits == 64

    def test_to_dict_keeps_exact_values(self):
        out = plan_layout(16, 16, 18, 9).to_dict()
        assert out["L_unprotected_exact"] == "23/2"
        assert out["fractional_boundary"] is True

    def test_codeword_too_long(self):
        with pytest.raises(LayoutError):
            plan_layout(4, 16, 20, 10)

    @pytest.mark.parametrize("L, M, n, k", [(64, 16, 10, 10), (64, 16, 10, 0), (64, 12, 20, 10)])
    def test_rejects_bad_codes(self, L, M, n, k):
        with pytest.raises(InvalidParameterError):
            plan_layout(L, M, n, k)


class TestBitPosteriors:

    @pytest.mark.parametrize("M", [2, 4, 8, 16])
    def test_matches_index_enumeration(self, M):
        rng = np.random.default_rng(M)
        for _ in range(100):
            section = rng.exponential(1.0, size=M)
            assert section_to_bit_posteriors(section) == pytest.approx(_bit_posterior_reference(section))

    def test_one_hot_section(self):
        section = np.zeros(8)
        section[5] = 3.0
        assert section_to_bit_posteriors(section).tolist() == [1.0, 0.0, 1.0]

    def test_empty_section_is_uninformative(self):
        assert section_to_bit_posteriors(np.zeros(4)).tolist() == [0.5, 0.5]

    def test_rows_are_independent(self):
        sections = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0]])
        assert sections_to_bit_posteriors(sections).tolist() == [[0.0, 1.0], [1.0, 1.0]]

    def test_rejects_negative_weights(self):
        with pytest.raises(InvalidParameterError):
            section_to_bit_posteriors(np.array([1.0, -0.5]))

    def test_llrs(self):
        llrs = posteriors_to_llrs(np.array([0.5, 0.0, 1.0, 0.25]))
        assert llrs == pytest.approx([0.0, 30.0, -30.0, math.log(3.0)])

    def test_llr_clamp(self):
        assert posteriors_to_llrs(np.array([1e-20]), clamp=5.0).tolist() == [5.0]


class TestParityCheckMatrix:

    def test_syndrome(self):
        H = _pcm([[1, 1, 0], [0, 1, 1]])
        assert H.is_codeword(np.array([1, 1, 1]))
        assert H.syndrome(np.array([1, 0, 0])).tolist() == [1, 0]
        assert (H.n, H.m, H.k) == (3, 2, 1)

    def test_rejects_empty_column(self):
        with pytest.raises(OuterCodeError):
            _pcm([[1, 1, 0]])

    def test_rejects_square(self):
        with pytest.raises(DimensionMismatchError):
            _pcm([[1, 0], [0, 1]])

    def test_reduces_entries_mod_two(self):
        H = ParityCheckMatrix(H=csr_matrix(np.array([[3, 1, 1]])))
        assert H.dense().tolist() == [[1, 1, 1]]


class TestGf2:

    def test_rank(self):
        assert gf2.rank([[1, 1], [1, 1]]) == 1
        assert gf2.rank(np.eye(3, dtype=np.uint8)) == 3
        assert gf2.rank([[1, 1, 0], [0, 1, 1], [1, 0, 1]]) == 2

    def test_row_reduce_pivots(self):
        reduced, pivots = gf2.row_reduce([[0, 1, 1], [1, 1, 0]])
        assert pivots == [0, 1]
        assert reduced.tolist() == [[1, 0, 1], [0, 1, 1]]

    def test_matmul(self):
        assert gf2.matmul([[1, 1], [0, 1]], [1, 1]).tolist() == [0, 1]


class TestEncoder:

    def test_repetition_code(self):
        encoder = build_encoder(_pcm([[1, 1]]))
        assert ldpc_encode(encoder, np.array([1])).tolist() == [1, 1]
        assert encoder.H.column_order is None

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            build_encoder(_pcm([[1, 1, 1, 1], [1, 1, 1, 1]]))

    def test_permuted_columns(self):
        encoder = build_encoder(_pcm([[1, 0, 1, 1], [0, 1, 1, 1]]))
        assert encoder.H.column_order is not None
        assert sorted(encoder.H.column_order.tolist()) == [0, 1, 2, 3]
        for info in itertools.product((0, 1), repeat=2):
            codeword = encoder.encode(np.array(info))
            assert codeword[:2].tolist() == list(info)
            assert encoder.H.is_codeword(codeword)

    def test_generated_code_is_systematic(self):
        H = generate_regular_ldpc(60, 30, column_weight=3, seed=2)
        encoder = build_encoder(H)
        assert encoder.H is H
        rng = np.random.default_rng(0)
        for _ in range(50):
            info = rng.integers(0, 2, size=30, dtype=np.uint8)
            codeword = encoder.encode(info)
            assert np.array_equal(codeword[:30], info)
            assert H.is_codeword(codeword)

    def test_wrong_information_length(self):
        encoder = build_encoder(_pcm([[1, 1]]))
        with pytest.raises(DimensionMismatchError):
            encoder.encode(np.array([1, 0]))

    def test_generator_rejects(self):
        with pytest.raises(InvalidParameterError):
            generate_regular_ldpc(10, 10)
        with pytest.raises(InvalidParameterError):
            generate_regular_ldpc(12, 10, column_weight=3)


class TestMinSum:

    def test_two_bit_check(self):
        bits, valid = minsum_decode(_pcm([[1, 1]]), np.array([2.0, -1.0]), max_iters=1, scaling=0.75)
        assert bits.tolist() == [0, 0]
        assert valid

    def test_erased_bit_is_filled_in(self):
        bits, valid = minsum_decode(_pcm([[1, 1, 1]]), np.array([30.0, -30.0, 0.0]), scaling=0.75)
        assert bits.tolist() == [0, 1, 1]
        assert valid

    def test_valid_input_returns_immediately(self, mocker):
        spy = mocker.spy(ParityCheckMatrix, "is_codeword")
        H = _pcm([[1, 1, 0], [0, 1, 1]])
        bits, valid = minsum_decode(H, np.array([-3.0, -3.0, -3.0]))
        assert bits.tolist() == [1, 1, 1] and valid
        assert spy.call_count == 1

    def test_corrects_isolated_weak_errors(self):
        H = generate_regular_ldpc(200, 100, column_weight=3, seed=1)
        encoder = build_encoder(H)
        rng = np.random.default_rng(5)
        codeword = encoder.encode(rng.integers(0, 2, size=100, dtype=np.uint8))
        llrs = 8.0 * (1.0 - 2.0 * codeword.astype(float))

        # information bits whose checks do not overlap
        flipped, used = [], set()
        for j in range(100):
            checks = set(H.var_nodes[j].tolist())
            if not checks & used:
                flipped.append(j)
                used |= checks
            if len(flipped) == 3:
                break
        llrs[flipped] = -np.sign(llrs[flipped])

        bits, valid = minsum_decode(H, llrs)
        assert valid
        assert np.array_equal(bits, codeword)

    def test_zero_iterations_report_failure(self):
        H = _pcm([[1, 1, 0], [0, 1, 1]])
        bits, valid = minsum_decode(H, np.array([5.0, -5.0, 5.0]), max_iters=0)
        assert not valid
        assert bits.tolist() == [0, 1, 0]

    def test_rejects_non_finite_llrs(self):
        with pytest.raises(InvalidParameterError):
            minsum_decode(_pcm([[1, 1]]), np.array([np.inf, 1.0]))

    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionMismatchError):
            minsum_decode(_pcm([[1, 1]]), np.array([1.0]))


class TestAlist:

    def test_round_trip(self, tmp_path):
        H = generate_regular_ldpc(40, 20, seed=3)
        path = tmp_path / "code.alist"
        write_alist(H, path)
        loaded = read_alist(path)
        assert np.array_equal(loaded.dense(), H.dense())

    def test_column_lists_only(self, tmp_path):
        path = tmp_path / "short.alist"
        path.write_text("3 1\n1 3\n1 1 1\n3\n1\n1\n1\n")
        assert read_alist(path).dense().tolist() == [[1, 1, 1]]

    @pytest.mark.parametrize("content", [
        "3 1\n",
        "3 1\n1 3\n1 1\n3\n1\n1\n1\n",
        "3 1\n1 3\n1 1 1\n3\n1\n1\n",
        "3 1\n1 3\n1 1 1\n3\n1\n2\n1\n",
        "3 1\n1 3\n1 1 1\n3\n1\nx\n1\n",
        "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 0\n",
    ])
    def test_malformed_files(self, tmp_path, content):
        path = tmp_path / "bad.alist"
        path.write_text(content)
        with pytest.raises(AlistFormatError):
            read_alist(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(AlistFormatError):
            read_alist(tmp_path / "absent.alist")


class TestBetaLdpc:

    def test_boundary_section_stays_empty(self):
        layout = plan_layout(16, 16, 18, 9)
        assert layout.first_ldpc_section == 12
        codeword = np.random.default_rng(0).integers(0, 2, size=18, dtype=np.uint8)
        beta = build_beta_ldpc(codeword, layout, flat(16, 16.0), n=32)
        assert beta.partial
        assert np.all(beta.indices[:12] == -1)
        assert np.array_equal(beta.indices[12:], bits_to_indices(codeword[2:], 16))
        assert beta.values.max() == pytest.approx(math.sqrt(32.0))

    def test_wrong_codeword_length(self):
        layout = plan_layout(16, 16, 18, 9)
        with pytest.raises(DimensionMismatchError):
            build_beta_ldpc(np.zeros(17, dtype=np.uint8), layout, flat(16, 16.0), n=32)

    def test_outer_encode_places_codeword_last(self):
        H = generate_regular_ldpc(18, 9, seed=0)
        encoder = build_encoder(H)
        layout = plan_layout(16, 16, 18, 9)
        user = np.random.default_rng(1).integers(0, 2, size=layout.user_bits, dtype=np.uint8)
        bits = outer_encode(user, encoder, layout)
        assert bits.size == layout.total_bits
        assert np.array_equal(bits[:46], user[:46])
        assert H.is_codeword(bits[46:])
        with pytest.raises(DimensionMismatchError):
            outer_encode(user[:-1], encoder, layout)


class TestThreeStageDecoder:
    """L = 64, M = 16 with a (20, 10) LDPC code in the last five sections."""

    @pytest.fixture
    def setup(self):
        params = make_code_params(64, 16, 0.5, 15.0, 0.0)
        pa = flat(64, 15.0)
        decoder = ThreeStageDecoder(generate_regular_ldpc(20, 10, seed=4), params, pa)
        return params, pa, decoder

    def _transmit(self, params, pa, decoder, seed):
        rng = np.random.default_rng(seed)
        user = rng.integers(0, 2, size=decoder.layout.user_bits, dtype=np.uint8)
        beta = bits_to_message(outer_encode(user, decoder.encoder, decoder.layout), pa, params)
        op = new_operator(OperatorKind.FAST_HADAMARD, params.n, params.L, params.M, seed)
        return user, beta, op, encode(beta, op)

    def test_layout(self, setup):
        _, _, decoder = setup
        assert decoder.layout.user_bits == 246
        assert decoder.layout.first_ldpc_section == 59
        assert not decoder.layout.has_fractional_boundary

    def test_noiseless_decode(self, setup):
        params, pa, decoder = setup
        for seed in range(3):
            user, beta, op, y = self._transmit(params, pa, decoder, seed)
            result = decoder.decode(y, op)
            assert result.ldpc_valid and not result.fallback
            assert np.array_equal(result.user_bits, user)
            assert result.beta_hat == beta
            assert result.iterations_run == result.first_stage.iterations_run + result.final_stage.iterations_run

    def test_functional_wrapper(self, setup):
        params, pa, decoder = setup
        user, _, op, y = self._transmit(params, pa, decoder, 7)
        result = three_stage_decode(y, op, pa, params, decoder.H)
        assert np.array_equal(result.user_bits, user)

    def test_outer_code_repairs_first_stage_errors(self, setup, mocker):
        params, pa, decoder = setup
        user, beta, op, y = self._transmit(params, pa, decoder, 11)
        amplitude = math.sqrt(params.n * pa.powers[0])
        sections = beta.values.reshape(64, 16).copy()

        # one protected section split 40/60 towards a neighbour with the other LSB
        true_index = beta.indices[59]
        sections[59] = 0.0
        sections[59, true_index] = 0.4 * amplitude
        sections[59, true_index ^ 1] = 0.6 * amplitude
        for l in (0, 1, 2):
            sections[l] = np.roll(sections[l], 1)

        fake = DecoderState(
            beta=sections.ravel(),
            z=np.zeros(params.n),
            tau2_trace=(16.0, 1.0),
            iterations_run=2,
            termination=Termination.CONVERGED,
        )
        mocker.patch.object(decoder, "run_first_stage", return_value=fake)
        result = decoder.decode(y, op)
        assert result.ldpc_valid
        assert np.array_equal(result.user_bits, user)
        assert result.beta_hat == beta

    def test_falls_back_when_ldpc_fails(self, setup, mocker, caplog):
        params, pa, decoder = setup
        _, _, op, y = self._transmit(params, pa, decoder, 3)
        mocker.patch.object(decoder, "decode_outer", return_value=(np.zeros(20, dtype=np.uint8), False))
        with caplog.at_level(logging.WARNING):
            result = decoder.decode(y, op)
        assert result.fallback and not result.ldpc_valid
        assert result.final_stage is None
        expected = hard_decision(amp_decode(y, op, pa, params, decoder.cfg), pa, params.n)
        assert result.beta_hat == expected
        assert np.array_equal(result.user_bits, message_to_bits(expected)[:246])
        assert "LDPC decoding failed" in caplog.text

    def test_power_allocation_must_match(self):
        params = make_code_params(64, 16, 0.5, 15.0, 0.0)
        with pytest.raises(DimensionMismatchError):
            ThreeStageDecoder(generate_regular_ldpc(20, 10, seed=4), params, flat(32, 15.0))


@pytest.mark.slow
class TestThreeStageFaultInjection:
    """First-stage errors injected into noisy decodes of the (20, 10) layout."""

    TRIALS = 100

    @pytest.fixture
    def setup(self):
        params = make_code_params(64, 16, 0.5, 15.0, 1.0)
        pa = flat(64, 15.0)
        decoder = ThreeStageDecoder(generate_regular_ldpc(20, 10, seed=4), params, pa)
        return params, pa, decoder

    def _transmit(self, params, pa, decoder, seed):
        rng = np.random.default_rng(seed)
        user = rng.integers(0, 2, size=decoder.layout.user_bits, dtype=np.uint8)
        beta = bits_to_message(outer_encode(user, decoder.encoder, decoder.layout), pa, params)
        op = new_operator(OperatorKind.FAST_HADAMARD, params.n, params.L, params.M, seed)
        return user, beta, op, awgn(encode(beta, op), params.sigma2, seed + 1000)

    def _corrupting(self, decoder, beta, rng):
        first_stage = decoder.run_first_stage
        first = decoder.layout.first_ldpc_section

        def run(y, op):
            state = first_stage(y, op)
            sections = np.array(state.beta, dtype=float).reshape(decoder.params.L, decoder.params.M)
            amplitude = float(np.max(np.abs(beta.values)))

            protected = int(rng.integers(first, decoder.params.L))
            true_index = beta.indices[protected]
            sections[protected] = 0.0
            sections[protected, true_index] = 0.4 * amplitude
            sections[protected, true_index ^ 1] = 0.6 * amplitude

            count = int(rng.integers(1, 4))
            for l in rng.choice(first, size=count, replace=False):
                sections[l] = np.roll(sections[l], 1)
            return dataclasses.replace(state, beta=sections.ravel())

        return run

    def test_corrupted_first_stage_is_repaired(self, setup, mocker):
        params, pa, decoder = setup
        rng = np.random.default_rng(2024)
        exact = 0
        for seed in range(self.TRIALS):
            user, beta, op, y = self._transmit(params, pa, decoder, seed)
            mocker.patch.object(decoder, "run_first_stage", side_effect=self._corrupting(decoder, beta, rng))
            result = decoder.decode(y, op)
            mocker.stopall()
            exact += int(np.array_equal(result.user_bits, user) and result.beta_hat == beta)
        assert exact >= 95

    def test_forced_ldpc_failure_matches_amp(self, setup, mocker):
        params, pa, decoder = setup
        mocker.patch.object(decoder, "decode_outer", return_value=(np.zeros(20, dtype=np.uint8), False))
        for seed in range(self.TRIALS):
            _, _, op, y = self._transmit(params, pa, decoder, seed)
            result = decoder.decode(y, op)
            expected = hard_decision(amp_decode(y, op, pa, params, decoder.cfg), pa, params.n)
            assert result.fallback
            assert result.beta_hat == expected
            assert np.array_equal(result.user_bits, message_to_bits(expected)[: decoder.layout.user_bits])
