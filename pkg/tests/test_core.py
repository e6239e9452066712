import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constructor_kit.core import (
    Attribute,
    Edge,
    Network,
    Node,
    Permutation,
    State,
    Substrate,
    Task,
    Variable,
    coarsen,
    is_sharp,
    overlap,
    parallel_compose,
    product_variable,
    serial_compose,
    split_attribute,
    transpose,
    validate_network,
)
from constructor_kit.errors import (
    BadPartition,
    CycleDetected,
    DimensionMismatch,
    InterfaceMismatch,
    KindMismatch,
    OverlappingOutputs,
    SharedSubstrate,
    ValidationError,
)

from conftest import INV_SQRT2, KET0, KET1, PLUS, random_ray


def singleton(sub, x, label=None):
    return Attribute.states(sub, [x], label=label if label is not None else str(x))


def pair_set(task):
    return {(a.fingerprint(), b.fingerprint()) for a, b in task.pairs}


def perm_task(sub, perm):
    return Task(tuple((singleton(sub, i), singleton(sub, p)) for i, p in enumerate(perm)))


# --------------------------------------------------------------------------- substrates and attributes


def test_substrate_composition_flattens_atoms():
    a, b, c = Substrate.quantum("a", 2), Substrate.quantum("b", 3), Substrate.quantum("c", 2)
    abc = Substrate.compose(Substrate.compose(a, b), c)
    assert abc.dims == (2, 3, 2)
    assert abc.size == 12
    assert [x.name for x in abc.atoms] == ["a", "b", "c"]


def test_substrate_rejects_mixed_kinds():
    with pytest.raises(KindMismatch):
        Substrate.compose(Substrate.quantum("a", 2), Substrate.classical("b", 2))


def test_quantum_substrate_needs_two_levels():
    with pytest.raises(ValidationError) as err:
        Substrate.quantum("a", 1)
    assert err.value.invariant == "Dimension"


def test_state_is_a_ray(q):
    assert State(q, KET0) == State(q, 1j * KET0)
    assert State(q, KET0) != State(q, PLUS)


def test_state_norm_is_checked(q):
    with pytest.raises(ValidationError) as err:
        State(q, 0.9 * KET0)
    assert err.value.invariant == "Norm"


def test_overlap_of_zero_and_plus(zero, plus):
    assert overlap(zero, plus) == pytest.approx(INV_SQRT2, abs=1e-12)


def test_ray_set_is_not_its_span():
    t = Substrate.quantum("t", 3)
    pair = Attribute.rays(t, [np.eye(3)[0], np.eye(3)[1]])
    span = Attribute.subspace(t, np.eye(3)[:, :2])
    assert pair.issubset(span)
    assert not span.issubset(pair)
    assert not pair.contains_ray(np.array([1, 1, 0]) / np.sqrt(2))
    assert span.contains_ray(np.array([1, 1, 0]) / np.sqrt(2))


def test_product_attribute_contains_kron(zero, plus):
    q2 = Substrate.compose(zero.substrate, zero.substrate.renamed("q'"))
    prod = Attribute.product(zero, plus.rehome(q2.atoms[1]), substrate=q2)
    assert prod.is_ray
    assert np.allclose(abs(np.vdot(prod.ray(), np.kron(KET0, PLUS))), 1.0)


def test_variable_rejects_overlapping_attributes():
    c = Substrate.classical("c", 3)
    with pytest.raises(ValidationError) as err:
        Variable((Attribute.states(c, [0, 1]), Attribute.states(c, [1, 2])))
    assert err.value.invariant == "Disjoint"


# --------------------------------------------------------------------------- transpose


def test_transpose_single_pair():
    c = Substrate.classical("c", 2)
    t = transpose(Task(((singleton(c, 0), singleton(c, 1)),)))
    assert t.pairs[0][0].state_set == {1} and t.pairs[0][1].state_set == {0}


def test_transpose_two_pairs():
    c = Substrate.classical("c", 4)
    t = Task(((singleton(c, 0), singleton(c, 2)), (singleton(c, 1), singleton(c, 3))))
    back = transpose(t)
    assert [(a.state_set, b.state_set) for a, b in back.pairs] == [({2}, {0}), ({3}, {1})]


def test_transpose_of_identity_is_identity(zero):
    t = Task(((zero, zero),))
    assert pair_set(transpose(t)) == pair_set(t)


def test_transpose_rejects_overlapping_outputs():
    c = Substrate.classical("c", 3)
    t = Task(((singleton(c, 0), Attribute.states(c, [0, 1])),
              (singleton(c, 1), Attribute.states(c, [1, 2]))))
    with pytest.raises(OverlappingOutputs):
        transpose(t)


@given(st.permutations(range(5)), st.integers(1, 5))
def test_transpose_is_an_involution(perm, k):
    c = Substrate.classical("c", 5)
    t = Task(tuple((singleton(c, i), singleton(c, perm[i])) for i in range(k)))
    assert pair_set(transpose(transpose(t))) == pair_set(t)


# --------------------------------------------------------------------------- composition


def test_parallel_bit_pair():
    a, b = Substrate.classical("a", 2), Substrate.classical("b", 2)
    t = parallel_compose(Task(((singleton(a, 0), singleton(a, 1)),)),
                         Task(((singleton(b, 0), singleton(b, 0)),)))
    assert len(t) == 1
    assert t.pairs[0][0].state_set == {(0, 0)}
    assert t.pairs[0][1].state_set == {(1, 0)}


def test_parallel_cardinality_is_product():
    a, b = Substrate.classical("a", 2), Substrate.classical("b", 3)
    ta = perm_task(a, [1, 0])
    tb = perm_task(b, [2, 0, 1])
    assert len(parallel_compose(ta, tb)) == 6


def test_parallel_rejects_shared_substrate():
    a = Substrate.classical("a", 2)
    with pytest.raises(SharedSubstrate):
        parallel_compose(perm_task(a, [0, 1]), perm_task(a, [1, 0]))


def test_serial_chain():
    c = Substrate.classical("c", 3)
    a = Task(((singleton(c, 0), singleton(c, 1)),))
    b = Task(((singleton(c, 1), singleton(c, 2)),))
    t = serial_compose(b, a)
    assert [(x.state_set, y.state_set) for x, y in t.pairs] == [({0}, {2})]


def test_serial_round_trip_contains_identity():
    c = Substrate.classical("c", 4)
    a = Task(((singleton(c, 0), singleton(c, 2)), (singleton(c, 1), singleton(c, 3))))
    t = serial_compose(transpose(a), a)
    assert all(x.same_as(y) for x, y in t.pairs)


def test_serial_rejects_mismatched_interfaces():
    c = Substrate.classical("c", 3)
    with pytest.raises(InterfaceMismatch):
        serial_compose(Task(((singleton(c, 2), singleton(c, 0)),)),
                       Task(((singleton(c, 0), singleton(c, 1)),)))


@given(st.permutations(range(4)), st.permutations(range(4)), st.permutations(range(4)))
def test_serial_composition_is_associative(p1, p2, p3):
    c = Substrate.classical("c", 4)
    a, b, d = perm_task(c, p1), perm_task(c, p2), perm_task(c, p3)
    left = serial_compose(d, serial_compose(b, a))
    right = serial_compose(serial_compose(d, b), a)
    assert pair_set(left) == pair_set(right)


@given(st.permutations(range(2)), st.permutations(range(3)), st.permutations(range(2)))
def test_parallel_composition_is_associative(p1, p2, p3):
    a, b, c = (Substrate.classical(n, k) for n, k in (("a", 2), ("b", 3), ("c", 2)))
    ta, tb, tc = perm_task(a, p1), perm_task(b, p2), perm_task(c, p3)
    left = parallel_compose(parallel_compose(ta, tb), tc)
    right = parallel_compose(ta, parallel_compose(tb, tc))
    assert left.in_substrate.dims == right.in_substrate.dims
    flat = {(frozenset(x.state_set), frozenset(y.state_set)) for x, y in left.pairs}
    assert flat == {(frozenset(x.state_set), frozenset(y.state_set)) for x, y in right.pairs}


@given(st.permutations(range(2)), st.permutations(range(3)))
def test_parallel_composition_commutes_up_to_reordering(p1, p2):
    a, b = Substrate.classical("a", 2), Substrate.classical("b", 3)
    ab = parallel_compose(perm_task(a, p1), perm_task(b, p2))
    ba = parallel_compose(perm_task(b, p2), perm_task(a, p1))

    def swapped(s):
        return frozenset((y, x) for x, y in s)

    left = {(frozenset(x.state_set), frozenset(y.state_set)) for x, y in ab.pairs}
    right = {(swapped(x.state_set), swapped(y.state_set)) for x, y in ba.pairs}
    assert left == right


def test_quantum_parallel_composition_is_a_product(zero, one, plus):
    q2 = Substrate.quantum("r", 2)
    t = parallel_compose(Task(((zero, one),)), Task(((plus.rehome(q2), plus.rehome(q2)),)))
    x, y = t.pairs[0]
    assert np.allclose(abs(np.vdot(x.ray(), np.kron(KET0, PLUS))), 1.0)
    assert np.allclose(abs(np.vdot(y.ray(), np.kron(KET1, PLUS))), 1.0)


# --------------------------------------------------------------------------- variables


def test_product_variable_bit_by_bit():
    a, b = Substrate.classical("a", 2), Substrate.classical("b", 2)
    va = Variable((singleton(a, 0), singleton(a, 1)))
    vb = Variable((singleton(b, 0), singleton(b, 1)))
    v = product_variable(va, vb)
    assert len(v) == 4
    assert [a.state_set for a in v] == [{(0, 0)}, {(0, 1)}, {(1, 0)}, {(1, 1)}]


def test_product_of_z_bases(zero, one):
    r = Substrate.quantum("r", 2)
    z1 = Variable((zero, one), ("0", "1"))
    z2 = Variable((zero.rehome(r), one.rehome(r)), ("0", "1"))
    v = product_variable(z1, z2)
    assert [v.label_of(i) for i in range(4)] == ["(0,0)", "(0,1)", "(1,0)", "(1,1)"]
    for i, (x, y) in enumerate(itertools.product([KET0, KET1], repeat=2)):
        assert np.allclose(abs(np.vdot(v[i].ray(), np.kron(x, y))), 1.0)


def test_coarsen_trivial_partition_keeps_variable():
    c = Substrate.classical("c", 3)
    v = Variable(tuple(singleton(c, i) for i in range(3)))
    w = coarsen(v, [[0], [1], [2]])
    assert all(a.same_as(b) for a, b in zip(v, w))


def test_coarsen_to_boolean():
    c = Substrate.classical("c", 3)
    v = Variable(tuple(singleton(c, i) for i in range(3)))
    w = coarsen(v, [[0], [1, 2]])
    assert [a.state_set for a in w] == [{0}, {1, 2}]
    assert len(coarsen(v, [[0, 1, 2]])) == 1


def test_coarsen_rejects_non_partition():
    c = Substrate.classical("c", 3)
    v = Variable(tuple(singleton(c, i) for i in range(3)))
    with pytest.raises(BadPartition):
        coarsen(v, [[0], [0, 1]])


def test_is_sharp_examples(q, zero, one):
    z = Variable((zero, one))
    assert is_sharp(State(q, KET0), z) == 0
    assert is_sharp(State(q, PLUS), z) is None
    c = Substrate.classical("c", 5)
    v = Variable((Attribute.states(c, [1, 2]), Attribute.states(c, [3, 4])))
    assert is_sharp(State(c, 3), v) == 1


def test_is_sharp_rejects_wrong_substrate(zero, one):
    with pytest.raises(DimensionMismatch):
        is_sharp(State(Substrate.quantum("t", 3), np.eye(3)[0]), Variable((zero, one)))


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_is_sharp_hits_at_most_one_attribute(seed, d):
    rng = np.random.default_rng(seed)
    sub = Substrate.quantum("s", d)
    u = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))[0]
    cut = sorted(rng.choice(np.arange(1, d), size=rng.integers(0, d - 1), replace=False))
    blocks = np.split(np.arange(d), cut)
    attrs = tuple(Attribute.subspace(sub, u[:, b]) if len(b) > 1 else Attribute.rays(sub, [u[:, b[0]]])
                  for b in blocks)
    v = Variable(attrs)
    for vec in [u[:, i] for i in range(d)] + [random_ray(rng, d)]:
        state = State(sub, vec)
        assert sum(a.contains_state(state) for a in v) <= 1


# --------------------------------------------------------------------------- permutations


def test_permutation_algebra():
    c = Permutation.cycle(3)
    assert c.is_fixed_point_free
    assert c.compose(c).compose(c).is_identity
    assert Permutation.transposition(3, 0, 2).mapping == (2, 1, 0)
    assert len(list(Permutation.all(3))) == 6
    with pytest.raises(ValidationError):
        Permutation((0, 0))


# --------------------------------------------------------------------------- networks


def test_chain_network_equals_serial_composition():
    c = Substrate.classical("c", 3)
    a = Task(((singleton(c, 0), singleton(c, 1)), (singleton(c, 2), singleton(c, 0))))
    b = Task(((singleton(c, 1), singleton(c, 2)), (singleton(c, 0), singleton(c, 1))))
    net = Network((Node("a", a), Node("b", b)), (Edge("a", 0, "b", 0),))
    assert pair_set(validate_network(net)) == pair_set(serial_compose(b, a))


@given(st.permutations(range(3)), st.permutations(range(3)), st.permutations(range(3)))
def test_chain_network_matches_iterated_serial(p1, p2, p3):
    c = Substrate.classical("c", 3)
    ts = [perm_task(c, p) for p in (p1, p2, p3)]
    net = Network(tuple(Node(f"n{i}", t) for i, t in enumerate(ts)),
                  (Edge("n0", 0, "n1", 0), Edge("n1", 0, "n2", 0)))
    expected = serial_compose(ts[2], serial_compose(ts[1], ts[0]))
    assert pair_set(validate_network(net)) == pair_set(expected)


def test_self_loop_is_a_cycle():
    c = Substrate.classical("c", 2)
    t = perm_task(c, [1, 0])
    with pytest.raises(CycleDetected):
        validate_network(Network((Node("n", t),), (Edge("n", 0, "n", 0),)))


def test_network_interface_must_be_contained():
    c = Substrate.classical("c", 3)
    a = Task(((singleton(c, 0), singleton(c, 2)),))
    b = Task(((singleton(c, 1), singleton(c, 0)),))
    with pytest.raises(InterfaceMismatch):
        validate_network(Network((Node("a", a), Node("b", b)), (Edge("a", 0, "b", 0),)))


def test_split_attribute_factors_products(zero, plus):
    r = Substrate.quantum("r", 2)
    qr = Substrate.compose(zero.substrate, r)
    prod = Attribute.product(zero, plus.rehome(r), substrate=qr)
    left, right = split_attribute(prod, [zero.substrate, r])
    assert left.same_as(zero)
    assert right.same_as(plus.rehome(r))


def test_split_attribute_rejects_entangled_rays(q):
    r = Substrate.quantum("r", 2)
    qr = Substrate.compose(q, r)
    bell = Attribute.rays(qr, [np.array([1, 0, 0, 1]) / np.sqrt(2)])
    with pytest.raises(InterfaceMismatch):
        split_attribute(bell, [q, r])
