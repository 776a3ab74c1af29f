import numpy as np
from hypothesis import given, settings, strategies as st

from dunklab.snf import det_unimodular, integer_kernel_basis, smith_normal_form

int_entries = st.integers(min_value=-9, max_value=9)


def square_matrix(n):
    return st.lists(st.lists(int_entries, min_size=n, max_size=n),
                    min_size=n, max_size=n)


@given(st.integers(2, 5).flatmap(square_matrix))
@settings(max_examples=120, deadline=None)
def test_snf_decomposition(rows):
    a = np.array(rows, dtype=np.int64)
    u, d, v = smith_normal_form(a)
    assert np.array_equal(u @ a @ v, d)
    assert abs(det_unimodular(u)) == 1
    assert abs(det_unimodular(v)) == 1
    diag = [int(d[i, i]) for i in range(min(d.shape))]
    # off-diagonal zero, nonnegative diagonal, divisibility chain
    assert np.array_equal(d, np.diag(diag))
    assert all(x >= 0 for x in diag)
    for x, y in zip(diag, diag[1:]):
        if x != 0:
            assert y % x == 0
        else:
            assert y == 0


@given(st.integers(2, 4).flatmap(square_matrix))
@settings(max_examples=60, deadline=None)
def test_integer_kernel(rows):
    a = np.array(rows, dtype=np.int64)
    kern, rank, _ = integer_kernel_basis(a)
    assert kern.shape[1] == a.shape[1] - rank
    if kern.size:
        assert np.array_equal(a @ kern, np.zeros_like(a @ kern))


def test_known_case():
    # transposition minus identity on a rank-4 lattice: rank 2, d1 = d2 = 1
    a = np.array([[-1, 0, 1, 0], [0, -1, 0, 1], [1, 0, -1, 0], [0, 1, 0, -1]])
    _, d, _ = smith_normal_form(a)
    assert [d[i, i] for i in range(4)] == [1, 1, 0, 0]
