import random

import pytest

from tripower.gf import field_new
from tripower.trimat import (
    KeySpace,
    TriMatrix,
    elementary,
    identity,
    mat_inv,
    mat_mul,
    mat_pow_repeated,
    mth_power_closed_form,
    pair_order,
    pth_power_closed_form,
    unitriangular,
)


def random_unitriangular(field, n, rng):
    k = n * (n - 1) // 2
    return TriMatrix(field, n, (1,) * n, tuple(rng.randrange(field.q) for _ in range(k)))


def test_pair_order_small():
    assert pair_order(3) == ((3, 2), (2, 1), (3, 1))
    assert pair_order(4)[0] == (4, 3)
    assert len(pair_order(4)) == 6


def test_entry_access_and_membership():
    f = field_new(3)
    a = unitriangular(f, 3, {(2, 1): 2, (3, 1): 1})
    assert a.entry(2, 1) == 2 and a.entry(3, 1) == 1 and a.entry(3, 2) == 0
    assert a.entry(1, 3) == 0 and a.entry(2, 2) == 1
    assert a.is_unitriangular() and a.is_invertible()
    assert a.in_u_level(0) and not a.in_u_level(1)
    assert unitriangular(f, 3, {(3, 1): 1}).in_u_level(1)


def test_mat_mul_identity_and_elementary_products():
    f = field_new(2)
    a = unitriangular(f, 3, {(2, 1): 1, (3, 1): 1})
    assert mat_mul(a, identity(f, 3)) == a
    e21, e32 = elementary(f, 3, 2, 1), elementary(f, 3, 3, 2)
    assert mat_mul(e21, e32) == unitriangular(f, 3, {(2, 1): 1, (3, 2): 1})
    assert mat_mul(e32, e21) == unitriangular(f, 3, {(2, 1): 1, (3, 2): 1, (3, 1): 1})


def test_mat_mul_rejects_mismatch():
    f = field_new(2)
    with pytest.raises(ValueError):
        mat_mul(identity(f, 3), identity(f, 4))
    with pytest.raises(ValueError):
        mat_mul(identity(f, 3), identity(field_new(3), 3))


def test_mat_pow_trivial_exponents():
    f = field_new(3)
    a = unitriangular(f, 3, {(2, 1): 1, (3, 2): 2})
    assert mat_pow_repeated(a, 0) == identity(f, 3)
    assert mat_pow_repeated(a, 1) == a


def test_fifth_power_trivial_in_u35():
    # n <= p forces A^p = I; exhaustive over all 125 elements of U(3,5)
    f = field_new(5)
    space = KeySpace(f, 3)
    for k in range(space.size):
        assert mat_pow_repeated(space.decode(k), 5) == identity(f, 3)


def test_triangular_power_against_dense_reference():
    # cross-check mat_mul/mat_pow against plain row-by-column arithmetic
    f = field_new(5)
    rng = random.Random(7)
    for _ in range(20):
        diag = tuple(rng.randrange(1, 5) for _ in range(4))
        a = TriMatrix(f, 4, diag, tuple(rng.randrange(5) for _ in range(6)))
        rows = a.rows()
        dense = [[1 if i == j else 0 for j in range(4)] for i in range(4)]
        for _ in range(3):
            dense = [
                [sum(dense[i][k] * rows[k][j] for k in range(4)) % 5 for j in range(4)]
                for i in range(4)
            ]
        cubed = mat_pow_repeated(a, 3)
        assert cubed.rows() == dense


def test_mat_inv():
    rng = random.Random(3)
    for q, e in ((2, 1), (3, 1), (2, 2), (5, 1)):
        f = field_new(q, e)
        for _ in range(10):
            diag = tuple(rng.randrange(1, f.q) for _ in range(4))
            a = TriMatrix(f, 4, diag, tuple(rng.randrange(f.q) for _ in range(6)))
            assert mat_mul(a, mat_inv(a)) == identity(f, 4)
            assert mat_mul(mat_inv(a), a) == identity(f, 4)


def test_closed_form_m1_is_identity_map():
    f = field_new(3)
    a = unitriangular(f, 4, {(2, 1): 2, (4, 2): 1, (4, 1): 2})
    assert mth_power_closed_form(a, 1) == a


def test_closed_form_square_entry_formula():
    # (I+N)^2 has (3,1) entry 2b + ac; compare against both the hand
    # expansion and the multiplication oracle
    for q in (3, 5):
        f = field_new(q)
        for a in range(q):
            for b in range(q):
                for c in range(q):
                    m = unitriangular(f, 3, {(2, 1): a, (3, 1): b, (3, 2): c})
                    sq = mth_power_closed_form(m, 2)
                    assert sq == mat_mul(m, m)
                    assert sq.entry(3, 1) == (2 * b + a * c) % q


def test_closed_form_square_characteristic_two():
    f = field_new(2)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                m = unitriangular(f, 3, {(2, 1): a, (3, 1): b, (3, 2): c})
                assert mth_power_closed_form(m, 2).entry(3, 1) == (a * c) % 2


def test_closed_form_matches_repeated_exhaustive_u32_u33():
    for q in (2, 3):
        f = field_new(q)
        space = KeySpace(f, 3)
        for k in range(space.size):
            a = space.decode(k)
            for m in range(1, 2 * q + 1):
                assert mth_power_closed_form(a, m) == mat_pow_repeated(a, m)


def test_closed_form_matches_repeated_exhaustive_u44():
    f = field_new(2, 2)
    space = KeySpace(f, 4)
    for k in range(space.size):
        a = space.decode(k)
        for m in range(1, 9):
            assert mth_power_closed_form(a, m) == mat_pow_repeated(a, m)


def test_closed_form_random_larger():
    rng = random.Random(11)
    for q, e, n in ((2, 2, 4), (3, 1, 5), (5, 1, 4)):
        f = field_new(q, e)
        for _ in range(25):
            a = random_unitriangular(f, n, rng)
            m = rng.randrange(1, 2 * f.q + 1)
            assert mth_power_closed_form(a, m) == mat_pow_repeated(a, m)


def test_pth_power_closed_form():
    f = field_new(2)
    for a in range(2):
        for c in range(2):
            m = unitriangular(f, 3, {(2, 1): a, (3, 2): c})
            expected = unitriangular(f, 3, {(3, 1): (a * c) % 2})
            assert pth_power_closed_form(m) == expected
            assert mat_mul(m, m) == expected


def test_pth_power_lands_in_lower_central_term():
    rng = random.Random(5)
    for q, e, n in ((2, 1, 5), (3, 1, 5), (2, 2, 4), (5, 1, 4)):
        f = field_new(q, e)
        for _ in range(30):
            a = random_unitriangular(f, n, rng)
            ap = pth_power_closed_form(a)
            assert ap == mat_pow_repeated(a, f.p)
            assert ap.in_u_level(f.p - 1)


def test_pth_power_trivial_when_n_small():
    f = field_new(5)
    rng = random.Random(9)
    for _ in range(10):
        a = random_unitriangular(f, 3, rng)
        assert pth_power_closed_form(a) == identity(f, 3)


def test_closed_forms_reject_non_unitriangular():
    f = field_new(3)
    t = TriMatrix(f, 2, (2, 1), (0,))
    with pytest.raises(ValueError):
        mth_power_closed_form(t, 2)
    with pytest.raises(ValueError):
        pth_power_closed_form(t)


class TestKeySpace:
    def test_identity_is_key_zero(self):
        f = field_new(3)
        space = KeySpace(f, 4)
        assert space.encode(identity(f, 4)).value == 0

    def test_sizes(self):
        assert KeySpace(field_new(3), 6, l=1).size == 3**10 == 59049
        assert KeySpace(field_new(2), 8, l=1).size == 2**21 == 2097152
        assert KeySpace(field_new(3), 4, diagonal_free=True).size == 2**4 * 3**6

    def test_level_sizes_by_enumeration(self):
        # |U_l(n,q)| = q^((n-l)(n-l-1)/2), here recounted by exhaustion
        f = field_new(2)
        space = KeySpace(f, 4, l=1)
        mats = {space.decode(k) for k in range(space.size)}
        assert len(mats) == 2 ** ((4 - 1) * (4 - 2) // 2) == 8
        assert all(m.in_u_level(1) for m in mats)

    def test_roundtrip_unitriangular(self):
        f = field_new(3)
        space = KeySpace(f, 3)
        for k in range(space.size):
            assert space.encode(space.decode(k)).value == k

    def test_roundtrip_triangular(self):
        f = field_new(3)
        space = KeySpace(f, 3, diagonal_free=True)
        assert space.size == 8 * 27
        for k in range(space.size):
            m = space.decode(k)
            assert m.is_invertible()
            assert space.encode(m).value == k

    def test_rejects_out_of_set_matrices(self):
        f = field_new(2)
        space = KeySpace(f, 3, l=1)
        with pytest.raises(ValueError):
            space.encode(elementary(f, 3, 2, 1))  # nonzero inside zeroed band
        tspace = KeySpace(f, 3, diagonal_free=True)
        with pytest.raises(ValueError):
            tspace.encode(TriMatrix(f, 3, (1, 0, 1), (0, 0, 0)))

    def test_key_out_of_range(self):
        space = KeySpace(field_new(2), 3)
        with pytest.raises(ValueError):
            space.decode(space.size)
