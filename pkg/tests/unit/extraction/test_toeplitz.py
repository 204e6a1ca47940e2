import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st
from pydantic import ValidationError
from scipy.linalg import toeplitz

from src.data.schemas import TrialLog
from src.extraction.toeplitz import (
    DIRECT_CONVOLVE_LIMIT,
    ExtractorParams,
    output_length,
    raw_bits_from_log,
    read_bits,
    seed_length,
    toeplitz_extract,
    toeplitz_extract_blocks,
    write_bits,
)
from src.utils.errors import DomainError, LengthMismatchError


def _random_bits(rng, size):
    return rng.integers(0, 2, size, dtype=np.uint8)


def _explicit_product(seed, raw, m_out):
    n_in = raw.size
    # T[i][j] = seed[i - j + n_in - 1]
    matrix = toeplitz(seed[n_in - 1 : n_in - 1 + m_out], seed[n_in - 1 :: -1])
    return (matrix.astype(np.int64) @ raw.astype(np.int64)) % 2


def _params(rng, n_in, m_out, eps_ext=2.0**-10):
    return ExtractorParams(
        n_in=n_in, m_out=m_out, eps_ext=eps_ext, seed=_random_bits(rng, seed_length(n_in, m_out))
    )


def test_output_length_examples():
    assert output_length(42, 2.0**-10) == 22
    assert output_length(42, 2.0**-32) == 0
    assert output_length(10**6, 2.0**-64) == 999872
    assert output_length(40.57, 2.0**-10) == 20


def test_output_length_domain():
    with pytest.raises(DomainError):
        output_length(-1.0, 0.01)
    with pytest.raises(DomainError):
        output_length(100.0, 1.0)


def test_seed_length():
    assert seed_length(6032, 20) == 6051


def test_params_check_seed_length():
    with pytest.raises(LengthMismatchError) as excinfo:
        ExtractorParams(n_in=10, m_out=3, eps_ext=0.1, seed=np.zeros(11, dtype=np.uint8))
    assert not isinstance(excinfo.value, ValidationError)


def test_zero_input_gives_zero_output():
    params = _params(np.random.default_rng(0), 500, 40)
    assert not toeplitz_extract(np.zeros(500, dtype=np.uint8), params).any()


def test_diagonal_seed_copies_the_input_prefix():
    n_in, m_out = 64, 16
    seed = np.zeros(seed_length(n_in, m_out), dtype=np.uint8)
    seed[n_in - 1] = 1
    raw = _random_bits(np.random.default_rng(3), n_in)
    params = ExtractorParams(n_in=n_in, m_out=m_out, eps_ext=0.5, seed=seed)
    assert np.array_equal(toeplitz_extract(raw, params), raw[:m_out])


def test_matches_explicit_matrix_product():
    rng = np.random.default_rng(7)
    params = _params(rng, 300, 50)
    raw = _random_bits(rng, 300)
    assert np.array_equal(toeplitz_extract(raw, params), _explicit_product(params.seed, raw, 50))


def test_fft_path_matches_explicit_matrix_product():
    rng = np.random.default_rng(8)
    n_in, m_out = 4096, 1100
    assert n_in * m_out > DIRECT_CONVOLVE_LIMIT
    params = _params(rng, n_in, m_out)
    raw = _random_bits(rng, n_in)
    assert np.array_equal(toeplitz_extract(raw, params), _explicit_product(params.seed, raw, m_out))


@given(st.integers(0, 2**32 - 1))
@hyp_settings(max_examples=30, deadline=None)
def test_extraction_is_linear_over_gf2(seed_value):
    rng = np.random.default_rng(seed_value)
    params = _params(rng, 200, 30)
    r1, r2 = _random_bits(rng, 200), _random_bits(rng, 200)
    assert np.array_equal(
        toeplitz_extract(r1 ^ r2, params),
        toeplitz_extract(r1, params) ^ toeplitz_extract(r2, params),
    )


@pytest.mark.parametrize("splits", [[1000], [1, 999], [333, 333, 334], [0, 500, 0, 500]])
def test_block_evaluation_matches_one_shot(splits):
    rng = np.random.default_rng(11)
    params = _params(rng, 1000, 120)
    raw = _random_bits(rng, 1000)
    blocks = np.split(raw, np.cumsum(splits)[:-1])
    assert np.array_equal(toeplitz_extract_blocks(blocks, params), toeplitz_extract(raw, params))


def test_block_evaluation_checks_total_length():
    rng = np.random.default_rng(12)
    params = _params(rng, 100, 10)
    with pytest.raises(LengthMismatchError):
        toeplitz_extract_blocks([_random_bits(rng, 60)], params)
    with pytest.raises(LengthMismatchError):
        toeplitz_extract_blocks([_random_bits(rng, 60), _random_bits(rng, 60)], params)


def test_raw_length_mismatch():
    params = _params(np.random.default_rng(1), 100, 10)
    with pytest.raises(LengthMismatchError):
        toeplitz_extract(np.zeros(99, dtype=np.uint8), params)


def test_raw_bits_interleave_outputs():
    log = TrialLog(x=[0, 1], y=[1, 0], a=[1, 0], b=[1, 1])
    assert raw_bits_from_log(log).tolist() == [1, 1, 0, 1]


def test_bit_file_format(tmp_path):
    path = write_bits([1, 0, 0, 0, 0, 0, 0, 0, 1], tmp_path / "bits.bin")
    data = path.read_bytes()
    assert data[:8] == (9).to_bytes(8, "little")
    assert data[8:] == bytes([0x80, 0x80])
    assert read_bits(path).tolist() == [1, 0, 0, 0, 0, 0, 0, 0, 1]


def test_read_bits_rejects_truncated_files(tmp_path):
    path = tmp_path / "short.bin"
    path.write_bytes((100).to_bytes(8, "little") + b"\x00")
    with pytest.raises(LengthMismatchError):
        read_bits(path)
    path.write_bytes(b"\x01\x02")
    with pytest.raises(LengthMismatchError):
        read_bits(path)
