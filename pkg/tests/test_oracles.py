import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constructor_kit.core import Attribute, Substrate, Task, parallel_compose, serial_compose
from constructor_kit.info import cloning_task, distinguishing_task
from constructor_kit.oracles import (
    IMPOSSIBLE,
    IN_LIMIT,
    POSSIBLE,
    ClassicalWitness,
    OracleConfig,
    classical_possible,
    limit_verdict,
    possible,
    quantum_possible,
    unitary_from_witness,
    validate_witness,
)
from constructor_kit.superinfo import ensemble_task

from conftest import INV_SQRT2, KET0, random_ray


def ray_task(sub, xs, ys):
    return Task(tuple((Attribute.rays(sub, [x]), Attribute.rays(sub, [y])) for x, y in zip(xs, ys)))


def gram(vs):
    m = np.stack(vs, axis=1)
    return m.conj().T @ m


def independent_ray_verdict(xs, ys, tol=1e-9):
    """Gram test written out directly: the ancilla Gram G / F must be PSD.

    Valid only when no output overlap vanishes, so G / F is fully determined.
    """
    a = gram(xs) / gram(ys)
    return bool(np.linalg.eigvalsh((a + a.conj().T) / 2)[0] >= -tol)


# --------------------------------------------------------------------------- classical


def test_bit_flip_is_possible_with_not_witness():
    c = Substrate.classical("c", 2)
    t = Task(((Attribute.states(c, [0]), Attribute.states(c, [1])),
              (Attribute.states(c, [1]), Attribute.states(c, [0]))))
    v = possible(t)
    assert v.kind == POSSIBLE
    assert v.witness.mapping == {0: 1, 1: 0}
    assert validate_witness(t, v)


def test_empty_output_is_impossible():
    c = Substrate.classical("c", 2)
    v = possible(Task(((Attribute.states(c, [0]), Attribute.empty(c)),)))
    assert v.kind == IMPOSSIBLE
    assert v.certificate.name == "EmptyOutput"


def test_reset_has_no_reversible_extension():
    c = Substrate.classical("c", 2)
    t = Task(((Attribute.states(c, [0]), Attribute.states(c, [0])),
              (Attribute.states(c, [1]), Attribute.states(c, [0]))))
    assert classical_possible(t).possible
    v = classical_possible(t, reversible=True)
    assert v.impossible and v.certificate.name == "NoInjectiveExtension"


def test_classical_witness_validation_rejects_wrong_map():
    c = Substrate.classical("c", 2)
    t = Task(((Attribute.states(c, [0]), Attribute.states(c, [1])),))
    assert ClassicalWitness({0: 1, 1: 1}).validate(t)
    assert not ClassicalWitness({0: 0, 1: 1}).validate(t)


# --------------------------------------------------------------------------- quantum examples


def test_swap_of_non_orthogonal_states_is_possible(q, zero, plus):
    t = Task(((zero, plus), (plus, zero)))
    v = quantum_possible(t, side_effects=False)
    assert v.kind == POSSIBLE
    assert validate_witness(t, v)
    u = unitary_from_witness(t, v)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-9)


def test_distinguishing_zero_from_plus_forces_orthogonality(zero, plus):
    v = possible(distinguishing_task([zero, plus]))
    assert v.kind == IMPOSSIBLE
    assert v.certificate.name == "ForcedOrthogonality"
    assert v.certificate.payload["overlap"] == pytest.approx(INV_SQRT2, abs=1e-9)


def test_distinguishing_orthogonal_states(zero, one):
    t = distinguishing_task([zero, one])
    v = possible(t)
    assert v.kind == POSSIBLE
    assert validate_witness(t, v)


def test_erasure_needs_side_effects(zero, plus):
    t = Task(((zero, zero), (plus, zero)))
    with_fx = quantum_possible(t, side_effects=True)
    assert with_fx.kind == POSSIBLE and validate_witness(t, with_fx)
    anc = with_fx.witness.ancillas
    assert abs(np.vdot(anc[0], anc[1])) == pytest.approx(INV_SQRT2, abs=1e-9)
    without = quantum_possible(t, side_effects=False)
    assert without.kind == IMPOSSIBLE
    assert without.certificate.name == "GramMismatch"


def test_cloning_zero_and_plus_is_impossible(zero, plus):
    v = possible(cloning_task([zero, plus], zero))
    assert v.kind == IMPOSSIBLE
    assert v.certificate.name == "CloningGram"
    assert v.certificate.payload["input_overlap"] == pytest.approx(INV_SQRT2, abs=1e-9)
    assert v.certificate.payload["output_overlap"] == pytest.approx(0.5, abs=1e-9)


def test_ensemble_zero_plus_is_possible_in_limit(zero, plus):
    v = limit_verdict(lambda n: ensemble_task(zero, plus, n), tag="ensemble-distinguish")
    assert v.kind == IN_LIMIT


def test_ensemble_of_identical_attributes_is_impossible(zero):
    v = limit_verdict(lambda n: ensemble_task(zero, zero, n), tag="ensemble-distinguish")
    assert v.kind == IMPOSSIBLE
    assert v.certificate.name == "ConstantDefect"


def test_classical_disjoint_attributes_are_distinguishable_at_once():
    c = Substrate.classical("c", 3)
    v = limit_verdict(lambda n: ensemble_task(Attribute.states(c, [0]),
                                              Attribute.states(c, [1, 2]), n))
    assert v.kind == POSSIBLE


# --------------------------------------------------------------------------- properties


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.integers(2, 3), st.booleans())
def test_gram_oracle_agrees_with_direct_psd_test(seed, d, n, isometric):
    rng = np.random.default_rng(seed)
    sub = Substrate.quantum("s", d)
    xs = [random_ray(rng, d) for _ in range(n)]
    if isometric:
        u = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))[0]
        ys = [u @ x for x in xs]
    else:
        ys = [random_ray(rng, d) for _ in range(n)]
    expected = independent_ray_verdict(xs, ys)
    v = quantum_possible(ray_task(sub, xs, ys), side_effects=True)
    assert not v.unknown
    assert v.possible == expected


@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.booleans())
def test_possible_verdicts_carry_valid_witnesses(seed, n, side_effects):
    rng = np.random.default_rng(seed)
    sub = Substrate.quantum("s", 3)
    xs = [random_ray(rng, 3) for _ in range(n)]
    u = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
    t = ray_task(sub, xs, [u @ x for x in xs])
    v = quantum_possible(t, side_effects=side_effects)
    assert v.possible
    assert validate_witness(t, v)


@given(st.integers(0, 2**32 - 1))
def test_no_side_effects_implies_side_effects(seed):
    rng = np.random.default_rng(seed)
    sub = Substrate.quantum("s", 2)
    xs = [random_ray(rng, 2) for _ in range(2)]
    ys = [random_ray(rng, 2) for _ in range(2)] if seed % 2 else xs[::-1]
    t = ray_task(sub, xs, ys)
    if quantum_possible(t, side_effects=False).possible:
        assert quantum_possible(t, side_effects=True).possible


@given(st.integers(0, 2**32 - 1))
def test_serial_composite_of_possible_tasks_is_possible(seed):
    rng = np.random.default_rng(seed)
    sub = Substrate.quantum("s", 3)
    xs = [random_ray(rng, 3) for _ in range(2)]
    us = [np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
          for _ in range(2)]
    ys = [us[0] @ x for x in xs]
    zs = [us[1] @ y for y in ys]
    a, b = ray_task(sub, xs, ys), ray_task(sub, ys, zs)
    assert possible(a).possible and possible(b).possible
    assert possible(serial_compose(b, a)).possible


def test_parallel_composite_of_possible_tasks_is_possible(zero, one, plus):
    r = Substrate.quantum("r", 2)
    a = Task(((zero, plus), (plus, zero)))
    b = Task(((zero.rehome(r), one.rehome(r)), (one.rehome(r), zero.rehome(r))))
    t = parallel_compose(a, b)
    v = possible(t)
    assert v.possible and validate_witness(t, v)


def test_verdicts_are_reproducible_for_a_seed(zero, plus):
    t = Task(((zero, zero), (plus, zero)))
    cfg = OracleConfig(seed=7)
    v1, v2 = quantum_possible(t, config=cfg), quantum_possible(t, config=cfg)
    assert v1.kind == v2.kind
    assert np.array_equal(v1.witness.ancillas, v2.witness.ancillas)


def test_different_substrates_for_input_and_output(zero, plus):
    m = Substrate.quantum("m", 3)
    ptr = [Attribute.rays(m, [np.eye(3)[i]]) for i in range(2)]
    assert possible(Task(((zero, ptr[0]), (plus, ptr[1])))).impossible
    t = Task(((zero, ptr[0]), (plus, ptr[0])))
    v = possible(t)
    assert v.possible and validate_witness(t, v)


def test_ray_outputs_are_unit_vectors(zero, plus):
    t = Task(((zero, plus), (plus, zero)))
    v = quantum_possible(t, side_effects=False)
    for r in range(2):
        assert np.linalg.norm(v.witness.output(r)) == pytest.approx(1.0)
    assert np.allclose(abs(np.vdot(v.witness.output(0), KET0)), INV_SQRT2)
