import numpy as np
import pytest

from tripower.errors import SizeGuardError
from tripower.gf import field_new
from tripower.trimat import KeySpace, identity, mat_pow_repeated, pth_power_closed_form, unitriangular
from tripower.uni_image import (
    CanonicalFamilySpec,
    CensusCache,
    CensusSource,
    bu_trichotomy_check,
    canonical_element,
    distinct_family_members,
    families_for,
    family_class_total,
    lbound_summands,
    lbound_value,
    prime_power,
    pth_root_of_family,
    read_bitmap,
    theorem_a_check,
    u_image_census,
    write_bitmap,
)


def census_pyref(n, q, m=None):
    """Independent scalar-path census: enumerate, power, dedupe in a set."""
    p, e = prime_power(q)
    f = field_new(p, e)
    m = p if m is None else m
    space = KeySpace(f, n)
    out_space = KeySpace(f, n, l=min(p - 1, n - 1) if m == p else 0)
    return {out_space.encode(mat_pow_repeated(space.decode(k), m)).value
            for k in range(space.size)}


def test_prime_power_decomposition():
    assert prime_power(9) == (3, 2)
    assert prime_power(64) == (2, 6)
    assert prime_power(7) == (7, 1)
    with pytest.raises(ValueError):
        prime_power(12)
    with pytest.raises(ValueError):
        prime_power(1)


@pytest.mark.parametrize("n,q,expect", [(5, 2, 52), (3, 5, 1), (4, 2, 8), (3, 2, 2)])
def test_census_known_counts(n, q, expect):
    census = u_image_census(n, q)
    assert census.count == expect
    assert census.popcount() == census.count


def test_census_matches_scalar_reference():
    for n, q, m in ((4, 3, None), (4, 2, None), (3, 3, 2), (3, 4, None)):
        census = u_image_census(n, q, m=m)
        ref = census_pyref(n, q, m)
        assert census.count == len(ref)
        assert set(census.member_keys().tolist()) == ref


def test_census_coprime_exponent_is_bijection():
    # raising to a power coprime to the characteristic permutes the group
    for n, q, m in ((3, 2, 3), (3, 3, 2), (4, 2, 5), (3, 5, 4)):
        census = u_image_census(n, q, m=m)
        assert census.count == q ** (n * (n - 1) // 2)


def test_census_shard_invariance():
    baseline = u_image_census(5, 3)
    for shards in (2, 8):
        c = u_image_census(5, 3, shards=shards)
        assert c.count == baseline.count
        assert np.array_equal(c.bitmap, baseline.bitmap)


def test_census_size_guard():
    with pytest.raises(SizeGuardError):
        u_image_census(12, 5)


def test_census_image_is_inside_level_domain():
    census = u_image_census(5, 2)
    space = census.key_space()
    for key in census.member_keys().tolist():
        assert space.decode(int(key)).in_u_level(1)


def test_canonical_element_construction():
    assert canonical_element(4, 3, 1, (0, 0)) == identity(field_new(3), 4)
    f = field_new(3)
    assert canonical_element(4, 3, 1, (1, 1)) == unitriangular(f, 4, {(3, 1): 1, (4, 2): 1})
    with pytest.raises(ValueError):
        canonical_element(4, 3, 1, (1,))
    with pytest.raises(ValueError):
        canonical_element(4, 3, 3, ())


def test_family_ranges_and_sizes():
    specs = families_for(6, 3, 2)
    labels = {(s.family, s.m) for s in specs}
    assert labels == {("A", 0), ("A", 1), ("A", 2), ("B", 2), ("B", 3), ("B", 4)}
    a0 = CanonicalFamilySpec(6, 3, 2, "A", 0)
    assert a0.class_size() == 27 and len(list(a0.vectors())) == 8
    b2 = CanonicalFamilySpec(6, 3, 2, "B", 2)
    assert b2.class_size() == 3**2
    with pytest.raises(ValueError):
        CanonicalFamilySpec(6, 3, 2, "A", 3)
    with pytest.raises(ValueError):
        CanonicalFamilySpec(6, 3, 2, "B", 1)


def test_family_boundary_collision_is_deduplicated():
    members, collisions = distinct_family_members(6, 3, 2)
    vectors = [v for _s, v, _m in members]
    assert len(vectors) == len(set(vectors))
    # the all-nonzero vectors appear in both A_0 and B_{n-l}: flagged, kept once
    assert len(collisions) == 8
    for first, second, v in collisions:
        assert all(x != 0 for x in v)
        assert (first.family, second.family) == ("A", "B")
        assert first.class_size() == second.class_size()


def test_pth_root_square_example_gf4():
    # root of A(1, w) on sub-diagonal 2 of U(4, 4): entries 1, 1, w down the
    # first sub-diagonal, squared back by plain multiplication
    a = canonical_element(4, 4, 1, (1, 2))
    c = pth_root_of_family(a)
    f = a.field
    assert c == unitriangular(f, 4, {(2, 1): 1, (3, 2): 1, (4, 3): 2})
    assert mat_pow_repeated(c, 2) == a


def test_pth_root_leading_zero_family_structure():
    # A_m: the root's first sub-diagonal starts with m zeros then p ones
    a = canonical_element(6, 2, 1, (0, 0, 1, 1))
    c = pth_root_of_family(a)
    first_sub = [c.entry(i, i - 1) for i in range(2, 7)]
    assert first_sub[:2] == [0, 0] and first_sub[2:4] == [1, 1]
    assert pth_power_closed_form(c) == a


def test_pth_root_trailing_zero_family_structure():
    # B_m: trailing zero coordinates force zero root entries from row p+m on
    a = canonical_element(6, 3, 2, (1, 0, 0))
    c = pth_root_of_family(a)
    assert [c.entry(i, i - 1) for i in range(4, 7)].count(0) >= 2
    assert pth_power_closed_form(c) == a


def test_pth_root_all_families_small():
    for n, q in ((4, 3), (5, 2)):
        p, _ = prime_power(q)
        members, _ = distinct_family_members(n, q, p - 1)
        for _spec, _v, a in members:
            c = pth_root_of_family(a)
            assert pth_power_closed_form(c) == a
            assert all(c.entry(i, j) == 0 for (i, j) in
                       [(i, j) for i in range(1, n + 1) for j in range(1, i)] if i - j > 1)


def test_pth_root_rejects_bad_shapes():
    with pytest.raises(ValueError):
        pth_root_of_family(canonical_element(6, 2, 1, (1, 0, 1, 1)))  # interior zero
    with pytest.raises(ValueError):
        pth_root_of_family(canonical_element(3, 5, 1, (1,)))  # n <= p
    f = field_new(2)
    with pytest.raises(ValueError):
        pth_root_of_family(unitriangular(f, 4, {(2, 1): 1}))  # wrong sub-diagonal


def test_family_members_are_pth_powers_in_census():
    # every family member must occur in the brute-force image bitmap
    for n, q in ((5, 2), (4, 3), (6, 2), (6, 3)):
        p, _ = prime_power(q)
        census = u_image_census(n, q)
        space = census.key_space()
        members, _ = distinct_family_members(n, q, p - 1)
        for _spec, _v, a in members:
            assert census.contains_key(space.encode(a).value)


def test_lbound_values():
    assert lbound_value(6, 3) == 468
    assert lbound_value(5, 2) == 32
    # (6,2): n-p = 4 even, top exponent 6: 64 + 2*64 + 2*32
    assert lbound_value(6, 2) == 256
    with pytest.raises(ValueError):
        lbound_value(4, 2)


def test_lbound_summands_match_family_data():
    # independent route: every term must equal class size times member
    # count of exactly the families it claims to draw from
    for n, q in ((5, 2), (6, 2), (7, 2), (6, 3), (8, 2), (8, 5), (9, 2), (8, 3), (6, 4)):
        p, _ = prime_power(q)
        for term in lbound_summands(n, q):
            recomputed = 0
            for fam, m in term["families"]:
                spec = CanonicalFamilySpec(n, q, p - 1, fam, m)
                recomputed += spec.class_size() * len(list(spec.vectors()))
            assert recomputed == term["value"]


def test_lbound_below_family_total_below_census():
    for n, q in ((5, 2), (6, 2), (6, 3), (5, 4)):
        total = family_class_total(n, q)
        assert lbound_value(n, q) <= total <= u_image_census(n, q).count


def test_trichotomy_branches():
    assert bu_trichotomy_check(2, 2)["branch"] == "trivial"
    assert bu_trichotomy_check(4, 2)["branch"] == "full"
    r = bu_trichotomy_check(5, 2)
    assert r["branch"] == "proper-generating" and r["closure_is_full"] and r["passed"]


def test_theorem_a_report():
    r = theorem_a_check(5, 2)
    assert r["ratio"].numerator == 13 and r["ratio"].denominator == 16
    assert r["hypothesis_q_large_enough"] and r["ratio_exceeds_third"]
    with pytest.raises(ValueError):
        theorem_a_check(4, 2)


def test_census_cache_roundtrip(tmp_path):
    path = tmp_path / "census.json"
    cache = CensusCache(path)
    census = u_image_census(5, 2)
    cache.put(census)
    cache.save()
    reloaded = CensusCache(path)
    assert reloaded.get(5, 2, 2) == 52
    assert reloaded.entries[(5, 2, 2)]["modulus"] == (1, 1)


def test_census_source_computes_and_caches():
    source = CensusSource()
    assert source.u_power_count(5, 2) == 52
    assert source.u_power_count(5, 2) == 52
    assert source.hits == 1 and source.misses == 1
    frozen = CensusSource(source.cache, allow_compute=False)
    assert frozen.u_power_count(5, 2) == 52
    with pytest.raises(LookupError):
        frozen.u_power_count(6, 2)


def test_bitmap_dump_roundtrip(tmp_path):
    census = u_image_census(5, 2)
    path = tmp_path / "u52.bits"
    write_bitmap(census, path)
    n, q, p, bits, data = read_bitmap(path)
    assert (n, q, p, bits) == (5, 2, 2, 64)
    assert np.array_equal(data, census.bitmap)
    assert path.stat().st_size == 16 + len(census.bitmap)
