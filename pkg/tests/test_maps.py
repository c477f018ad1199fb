import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homsense.errors import FamilySizeError, InputError
from homsense.maps import (
    LinearMap,
    MapFamily,
    extend_square,
    parse_family,
    parse_map,
    random_arrangement,
    random_sensing_matrix,
    random_subspace,
)
from homsense.numkit import intersect, rank_tol

FAMILIES = [
    MapFamily.all_permutations(3),
    MapFamily.all_selections(2, 3),
    MapFamily.all_signs(3),
    MapFamily.all_signed_selections(2, 3),
]


def test_enumeration_counts():
    assert len(list(MapFamily.all_permutations(3).enumerate())) == 6
    assert len(list(MapFamily.all_selections(2, 3).enumerate())) == 6
    assert len(list(MapFamily.all_signs(2).enumerate())) == 4
    assert MapFamily.all_signed_selections(2, 4).cardinality() == 4 * 12
    assert len(list(MapFamily.all_signed_selections(2, 4).enumerate())) == 48


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.describe())
def test_enumeration_is_bijective_and_lexicographic(fam):
    members = list(fam.enumerate())
    assert len(members) == fam.cardinality()
    assert len({lm.key() for lm in members}) == len(members)
    mats = {tuple(lm.materialize().reshape(-1)) for lm in members}
    assert len(mats) == len(members)
    keys = [(lm.rows, tuple(-s for s in lm.signs)) for lm in members]
    assert keys == sorted(keys)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.describe())
def test_member_and_apply_members_agree_with_enumeration(fam):
    X = np.random.default_rng(0).standard_normal((fam.m, 2))
    stack = fam.apply_members(X)
    for k, lm in enumerate(fam.enumerate()):
        assert lm == fam.member(k)
        assert np.array_equal(stack[k], lm.materialize() @ X)


def test_cap_reports_cardinality():
    with pytest.raises(FamilySizeError) as info:
        list(MapFamily.all_permutations(11).enumerate())
    assert info.value.cardinality == 39916800


def test_materialize_properties():
    for lm in MapFamily.all_permutations(4).enumerate():
        T = lm.materialize()
        assert np.array_equal(T.T @ T, np.eye(4))
    for lm in MapFamily.all_selections(3, 5).enumerate():
        assert rank_tol(lm.materialize()) == 3
    for lm in MapFamily.all_signed_selections(2, 3).enumerate():
        assert set(np.unique(lm.materialize())) <= {-1.0, 0.0, 1.0}


def test_composition_associativity_exact():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 2))
    S = LinearMap.selection((2, 0, 3), 4)
    B = LinearMap.sign((1, -1, -1, 1))
    SB = S.materialize() @ B.materialize()
    assert np.array_equal(SB @ A, S.materialize() @ (B.materialize() @ A))
    composed = S.compose(A)
    assert np.array_equal(composed.materialize(), S.materialize() @ A)
    assert composed.source_dim == 2 and composed.target_dim == 3


def test_invalid_maps_rejected():
    with pytest.raises(InputError):
        LinearMap.permutation((0, 0, 1))
    with pytest.raises(InputError):
        LinearMap.selection((0, 3), 3)
    with pytest.raises(InputError):
        LinearMap.sign((1, 2))
    with pytest.raises(InputError):
        LinearMap.explicit(np.array([[np.inf]]))


def test_sampling_reproducible_and_uniform():
    fam = MapFamily.all_permutations(3)
    assert fam.sample(5, 10) == fam.sample(5, 10)
    for lm in MapFamily.all_signs(1).sample(3, 20):
        assert lm.signs in ((1,), (-1,))
    draws = fam.sample(11, 60000)
    ident = sum(1 for lm in draws if lm.rows == (0, 1, 2))
    assert abs(ident / 60000 - 1 / 6) < 0.01
    with pytest.raises(InputError):
        fam.sample(0, 0)


def test_random_draws():
    assert random_subspace(4, 2, 0).dim == 2
    assert np.array_equal(random_sensing_matrix(3, 2, 7), random_sensing_matrix(3, 2, 7))
    for seed in range(100):
        parts = random_arrangement((1, 1, 1), 3, seed).parts
        for a, b in itertools.combinations(parts, 2):
            assert intersect(a, b).dim == 0


def test_parse_and_describe_roundtrip(tmp_path):
    for spec in ("perm:2,0,1", "sel:6:0,1,2,3", "sign:1,-1,1", "selsign:6:0,5,2:1,-1,1"):
        assert parse_map(spec).describe() == spec
    assert parse_map("id:3") == LinearMap.identity(3)
    lm = LinearMap.explicit(np.arange(6.0).reshape(2, 3))
    path = tmp_path / "map.json"
    path.write_text(json.dumps(lm.to_json()))
    assert parse_map(str(path)) == lm
    with pytest.raises(InputError):
        parse_map("rot:1")


def test_family_parse_and_json(tmp_path):
    A = random_sensing_matrix(5, 2, 0)
    fam = parse_family("sel:3,5", A)
    assert fam.cardinality() == 60 and fam.source_dim == 2
    again = MapFamily.from_json(json.loads(json.dumps(fam.to_json())))
    assert again.describe() == fam.describe()
    assert np.array_equal(again.compose_with, A)
    for spec in ("perm:5", "sign:4", "selsign:3,5"):
        assert parse_family(spec).describe() == spec
    with pytest.raises(InputError):
        parse_family("perm:")


def test_linear_map_json_roundtrip():
    A = random_sensing_matrix(3, 2, 4)
    for lm in (LinearMap.permutation((1, 2, 0)), LinearMap.signed_selection((2, 0), (1, -1), 3).compose(A)):
        back = LinearMap.from_json(json.loads(json.dumps(lm.to_json())))
        assert np.array_equal(back.materialize(), lm.materialize())


def test_extend_square_keeps_rank():
    T = np.array([[1.0, 2.0, 3.0]])
    S = extend_square(T)
    assert S.shape == (3, 3) and rank_tol(S) == 1


@pytest.mark.parametrize("fam", FAMILIES + [MapFamily.all_signed_selections(2, 4)], ids=lambda f: f.describe())
def test_pair_orbits_cover_every_ordered_pair_once(fam):
    pairs = fam.pair_orbits()
    assert pairs.covered() == fam.cardinality() ** 2
    members = [lm.materialize() for lm in fam.enumerate()]
    r = members[0].shape[0]
    # target symmetries acting on the left: permutations, diagonal signs, or signed permutations
    perms = [tuple(range(r))] if fam.descriptor == "sign" else list(itertools.permutations(range(r)))
    pats = list(itertools.product((1, -1), repeat=r)) if fam.descriptor in ("sign", "selsign") else [(1,) * r]
    group = []
    for p in perms:
        for s in pats:
            G = np.zeros((r, r))
            G[np.arange(r), p] = s
            group.append(G)
    seen = {}
    for k, (t1, t2) in enumerate(pairs):
        A, B = t1.materialize(), t2.materialize()
        orbit = {(tuple((G @ A).ravel()), tuple((G @ B).ravel())) for G in group}
        assert len(orbit) == pairs.multiplicity[k]
        for o in orbit:
            assert o not in seen
            seen[o] = k
    assert len(seen) == fam.cardinality() ** 2


def test_explicit_pairs():
    maps = [LinearMap.identity(2), LinearMap.permutation((1, 0))]
    fam = MapFamily.explicit_list(maps)
    assert len(fam.pair_orbits(ordered=True)) == 4
    assert len(fam.pair_orbits(ordered=False)) == 3


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 10**6))
def test_pair_stack_matches_materialized(m, r, seed):
    r = min(r, m)
    fam = MapFamily.all_signed_selections(r, m) if r else MapFamily.all_signs(m)
    pairs = fam.pair_orbits()
    X = np.random.default_rng(seed).standard_normal((m, 2))
    T1, T2 = pairs.apply_stack(X, 0, 7)
    for k in range(T1.shape[0]):
        a, b = pairs.pair(k)
        assert np.array_equal(T1[k], a.materialize() @ X)
        assert np.array_equal(T2[k], b.materialize() @ X)
