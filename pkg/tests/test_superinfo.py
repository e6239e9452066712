import numpy as np
import pytest

from constructor_kit.core import Attribute, Substrate, Task, Variable
from constructor_kit.errors import (
    NoFixedPointFreePermutation,
    PreconditionFailed,
    TheoremViolation,
)
from constructor_kit.info import canonical_basis, is_information_variable
from constructor_kit.oracles import IMPOSSIBLE, IN_LIMIT, POSSIBLE
from constructor_kit.superinfo import (
    coherence_check,
    consecutive_measurement_network,
    detect_superinformation,
    ensemble_distinguishable,
    ensemble_residual,
    find_indistinguishable_pair,
    joint_measurement_task,
    perturbation_task,
    unpredictability_certificate,
    verify_complementarity,
    verify_locally_inaccessible,
    verify_no_cloning,
    verify_undetectable_sharpness,
)
from constructor_kit.oracles import possible_with_side_effects

from conftest import INV_SQRT2, KET0, KET1

INV_SQRT3 = 1 / np.sqrt(3)


@pytest.fixture(scope="module")
def zx_witness(models):
    m = models["qubit_zx"]
    return detect_superinformation(m.candidates(), m.preparables())


# --------------------------------------------------------------------------- detection


def test_qubit_zx_has_a_witness(zx_witness):
    assert zx_witness is not None
    assert {zx_witness.x_var.name, zx_witness.y_var.name} == {"Z", "X"}
    assert zx_witness.overlap == pytest.approx(INV_SQRT2, abs=1e-9)


def test_qutrit_unbiased_bases_have_a_witness(models):
    m = models["qutrit_mub"]
    w = detect_superinformation(m.candidates(), m.preparables())
    assert w is not None
    assert w.overlap == pytest.approx(INV_SQRT3, abs=1e-9)


@pytest.mark.parametrize("name", ["classical_bit", "classical_trit"])
def test_classical_models_have_no_witness(models, name):
    m = models[name]
    assert detect_superinformation(m.candidates(), m.preparables()) is None


def test_indistinguishable_pair(qubit_model):
    x, y = find_indistinguishable_pair(qubit_model.variables["Z"], qubit_model.variables["X"])
    assert x.label == "0" and y.label == "+"


def test_identical_observables_are_rejected(qubit_model):
    z = qubit_model.variables["Z"]
    with pytest.raises(PreconditionFailed):
        find_indistinguishable_pair(z, z)


def test_qutrit_pairs_all_overlap_equally(models):
    m = models["qutrit_mub"]
    x, y = find_indistinguishable_pair(m.variables["Z"], m.variables["F"])
    assert abs(np.vdot(x.ray(), y.ray())) == pytest.approx(INV_SQRT3, abs=1e-9)


# --------------------------------------------------------------------------- sharpness, cloning, complementarity


def test_undetectable_sharpness(zx_witness, zero, plus):
    v = verify_undetectable_sharpness(zx_witness)
    assert v.kind == IMPOSSIBLE and v.certificate.name == "ForcedOrthogonality"
    assert v.detail["ensemble"].kind == IN_LIMIT
    assert ensemble_residual(zero, plus, 20) == pytest.approx(INV_SQRT2 ** 20, abs=1e-12)


def test_sharpness_measurable_classically():
    c = Substrate.classical("c", 4)
    x = Variable((Attribute.states(c, [0]), Attribute.states(c, [1])))
    y = Variable((Attribute.states(c, [2]), Attribute.states(c, [3])))
    assert verify_undetectable_sharpness(x, y).kind == POSSIBLE


def test_no_cloning(zx_witness):
    v = verify_no_cloning(zx_witness)
    assert v.kind == IMPOSSIBLE and v.certificate.name == "CloningGram"


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_cloning_boundaries(q, zero, c):
    y = Attribute.rays(q, [np.array([c, np.sqrt(1 - c * c)])])
    attrs = [zero] if c == 1.0 else [zero, y]
    assert verify_no_cloning(attrs).kind == POSSIBLE


def test_complementarity(zx_witness):
    v = verify_complementarity(zx_witness)
    assert v.kind == IMPOSSIBLE
    assert v.detail["intersections_empty"] is True


def test_classical_joint_measurement_is_possible():
    c = Substrate.classical("c", 4)
    x = Variable((Attribute.states(c, [0, 1]), Attribute.states(c, [2, 3])))
    y = Variable((Attribute.states(c, [0, 2]), Attribute.states(c, [1, 3])))
    assert possible_with_side_effects(joint_measurement_task(x, y)).possible
    assert verify_complementarity(x, y).detail["intersections_empty"] is False


# --------------------------------------------------------------------------- unpredictability and perturbation


def test_unpredictability_on_the_qubit(qubit_model):
    z, plus = qubit_model.variables["Z"], qubit_model.attributes["+"]
    c = unpredictability_certificate(z, plus)
    assert c.size == 2
    assert c.containment and c.no_sharp_prediction and c.recheck()
    assert c.overlaps == pytest.approx([INV_SQRT2, INV_SQRT2], abs=1e-12)


def test_unpredictability_photon_number_shape(models):
    m = models["photon4"]
    c = unpredictability_certificate(m.variables["N"], m.attributes["y"])
    assert [c.x_y.label_of(i) for i in range(c.size)] == ["0", "1", "2"]
    # the coarse Boolean "fewer than three" is sharp on y
    assert m.attributes["y"].issubset(m.attributes["few"])


def test_unpredictability_rejects_sharp_input(qubit_model):
    with pytest.raises(PreconditionFailed):
        unpredictability_certificate(qubit_model.variables["Z"], qubit_model.attributes["0"])


def test_perturbation_is_unavoidable(qubit_model):
    z, plus = qubit_model.variables["Z"], qubit_model.attributes["+"]
    c = unpredictability_certificate(z, plus)
    task, v = perturbation_task(c.x_y, plus)
    assert v.kind == IMPOSSIBLE
    assert v.certificate.name == "UnitNormConflict"
    overlaps = [k["overlap"] for k in v.certificate.payload["constraints"]]
    assert overlaps == pytest.approx([INV_SQRT2, INV_SQRT2], abs=1e-9)


def test_perturbation_needs_two_values(qubit_model):
    z = qubit_model.variables["Z"]
    with pytest.raises(PreconditionFailed):
        perturbation_task(Variable((z[0],)), qubit_model.attributes["+"])


def test_classical_perturbation_contrast():
    c = Substrate.classical("c", 3)
    xy = Variable((Attribute.states(c, [0]), Attribute.states(c, [1])))
    _, v = perturbation_task(xy, Attribute.states(c, [2]))
    assert v.kind == POSSIBLE


# --------------------------------------------------------------------------- consecutive measurements


def test_consecutive_measurements_on_plus(qubit_model):
    z, plus = qubit_model.variables["Z"], qubit_model.attributes["+"]
    res = consecutive_measurement_network(z, plus)
    assert res.r_deviation < 1e-9
    assert res.r_true_probability == pytest.approx(1.0, abs=1e-12)
    assert res.record_sharp == {"M": False, "M'": False}
    assert len(res.flattened) > 0


def test_consecutive_measurements_on_sharp_input(q, qubit_model):
    z = qubit_model.variables["Z"]
    res = consecutive_measurement_network(z, qubit_model.attributes["0"])
    assert res.r_deviation < 1e-9
    assert res.record_sharp == {"M": True, "M'": True}


def test_consecutive_measurements_need_a_fixed_point_free_shift(models):
    m = models["photon4"]
    with pytest.raises(NoFixedPointFreePermutation):
        consecutive_measurement_network(m.variables["N"], m.attributes["y"])
    res = consecutive_measurement_network(m.variables["N"], m.attributes["y"],
                                          allow_fixed_points=True)
    assert res.r_deviation < 1e-9
    assert res.x_y_labels == ["0", "1", "2"]
    assert not any(res.record_sharp.values())


def test_consecutive_measurements_with_cyclic_shift():
    s = Substrate.quantum("s", 4)
    z = canonical_basis(s)
    y = Attribute.rays(s, [np.array([1, 1, 0, 0]) / np.sqrt(2)])
    res = consecutive_measurement_network(z, y)
    assert res.permutation.mapping == (0, 1, 3, 2)
    assert res.r_deviation < 1e-9


# --------------------------------------------------------------------------- ensembles


def test_ensembles(zero, plus):
    assert ensemble_distinguishable(zero, plus).kind == IN_LIMIT
    c = Substrate.classical("c", 2)
    v = ensemble_distinguishable(Attribute.states(c, [0]), Attribute.states(c, [1]))
    assert v.kind == POSSIBLE and v.detail["n"] == 1
    with pytest.raises(PreconditionFailed):
        ensemble_distinguishable(zero, zero)


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_ensemble_residual_decays_geometrically(zero, plus, n):
    assert ensemble_residual(zero, plus, n) == pytest.approx(INV_SQRT2 ** n, abs=1e-12)


# --------------------------------------------------------------------------- coherence and local inaccessibility


def test_cnot_is_coherent(models):
    m = models["two_qubit"]
    s12 = m.substrates["s12"]
    eye = np.eye(2)
    pairs = []
    for a in range(2):
        for b in range(2):
            x = Attribute.rays(s12, [np.kron(eye[a], eye[b])])
            y = Attribute.rays(s12, [np.kron(eye[a], eye[a ^ b])])
            pairs.append((x, y))
    assert coherence_check(Task(tuple(pairs))) is True


def test_classical_reset_is_not_coherent():
    c = Substrate.classical("c", 2)
    t = Task(((Attribute.states(c, [0]), Attribute.states(c, [0])),
              (Attribute.states(c, [1]), Attribute.states(c, [0]))))
    assert coherence_check(t) is False


def test_locally_inaccessible_information(models):
    m = models["two_qubit"]
    v, rec = verify_locally_inaccessible(m.variables["A1"], m.variables["B1"], m.variables["A2"])
    assert v.kind == POSSIBLE
    bell = (np.kron(KET0, KET0) + np.kron(KET1, KET1)) / np.sqrt(2)
    assert abs(np.vdot(bell, rec.psi[0])) == pytest.approx(1.0, abs=1e-9)
    assert rec.psi1_matches
    assert rec.overlap_00 == pytest.approx(INV_SQRT2, abs=1e-9)
    assert rec.overlap_11 == pytest.approx(INV_SQRT2, abs=1e-9)
    assert rec.C_information is True and rec.D_information is True
    assert rec.C_adaptive_measurement and rec.transpose_possible is True
    assert np.allclose(rec.unitary.conj().T @ rec.unitary, np.eye(4), atol=1e-9)


def test_locally_inaccessible_requires_non_orthogonal_primes(models):
    m = models["two_qubit"]
    with pytest.raises(PreconditionFailed):
        verify_locally_inaccessible(m.variables["A1"], m.variables["A1"], m.variables["A2"])


# --------------------------------------------------------------------------- theorem checks hold on every witness


@pytest.mark.parametrize("name", ["qubit_zx", "qutrit_mub", "two_qubit"])
def test_every_witness_satisfies_the_theorem_suite(models, name):
    m = models[name]
    w = detect_superinformation(m.candidates(), m.preparables())
    assert w is not None
    assert verify_undetectable_sharpness(w).impossible
    assert verify_no_cloning(w, preparables=m.preparables()).impossible
    assert verify_complementarity(w).impossible
    X, y = w.x_var, next(a for a in w.y_var if all(a.isdisjoint(x) for x in w.x_var))
    c = unpredictability_certificate(X, y)
    assert c.size >= 2
    _, v = perturbation_task(c.x_y, y)
    assert v.impossible
    assert consecutive_measurement_network(X, y).r_deviation < 1e-9


def test_info_union_is_not_information(models):
    m = models["qubit_zx"]
    assert is_information_variable(list(m.variables["Z"]) + list(m.variables["X"])) is False


def test_theorem_violation_carries_verdict():
    exc = TheoremViolation("x", verdict="v")
    assert exc.verdict == "v"
