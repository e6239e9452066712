"""Possible and impossible tasks on classical and quantum substrates.

The package decides whether a task (a set of input/output attribute pairs)
can be performed, builds information and superinformation notions on top of
that oracle, and checks the structural principles on concrete models.
"""

from importlib import resources
from pathlib import Path

from .core import (
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
    overlap,
    parallel_compose,
    product_variable,
    serial_compose,
    transpose,
    validate_network,
)
from .errors import (
    BudgetExceeded,
    ConstructorKitError,
    ParseError,
    PreconditionFailed,
    TheoremViolation,
    ValidationError,
)
from .info import (
    cloning_task,
    distinguish,
    distinguishing_task,
    info_capacity,
    is_clonable,
    is_information_variable,
    is_measurer_of,
    is_observable,
    measurement_task,
    non_perturbing_spec,
    perp,
)
from .model import Model, dumps, load_model, loads
from .oracles import (
    IMPOSSIBLE,
    IN_LIMIT,
    POSSIBLE,
    UNKNOWN,
    Certificate,
    OracleConfig,
    Verdict,
    limit_verdict,
    possible,
    possible_with_side_effects,
    validate_witness,
)
from .principles import check_principle, falsify
from .superinfo import (
    consecutive_measurement_network,
    detect_superinformation,
    ensemble_distinguishable,
    scan_superinformation,
    unpredictability_certificate,
    verify_complementarity,
    verify_locally_inaccessible,
    verify_no_cloning,
    verify_undetectable_sharpness,
)

__version__ = "0.1.0"

FIXTURES = ("classical_bit", "classical_trit", "qubit_zx", "qutrit_mub", "two_qubit", "photon4")


def fixture_path(name: str) -> Path:
    """Path of a bundled model file, by stem (``"qubit_zx"``) or file name."""
    stem = name[:-4] if name.endswith(".ctm") else name
    if stem not in FIXTURES:
        raise KeyError(f"no bundled fixture {name!r}; have {', '.join(FIXTURES)}")
    return Path(str(resources.files(__package__) / "fixtures" / f"{stem}.ctm"))


__all__ = [
    "Attribute", "Edge", "Network", "Node", "Permutation", "State", "Substrate", "Task",
    "Variable", "coarsen", "overlap", "parallel_compose", "product_variable", "serial_compose",
    "transpose", "validate_network",
    "BudgetExceeded", "ConstructorKitError", "ParseError", "PreconditionFailed",
    "TheoremViolation", "ValidationError",
    "cloning_task", "distinguish", "distinguishing_task", "info_capacity", "is_clonable",
    "is_information_variable", "is_measurer_of", "is_observable", "measurement_task",
    "non_perturbing_spec", "perp",
    "Model", "dumps", "load_model", "loads",
    "IMPOSSIBLE", "IN_LIMIT", "POSSIBLE", "UNKNOWN", "Certificate", "OracleConfig", "Verdict",
    "limit_verdict", "possible", "possible_with_side_effects", "validate_witness",
    "check_principle", "falsify",
    "consecutive_measurement_network", "detect_superinformation", "ensemble_distinguishable",
    "scan_superinformation", "unpredictability_certificate", "verify_complementarity",
    "verify_locally_inaccessible", "verify_no_cloning", "verify_undetectable_sharpness",
    "FIXTURES", "fixture_path", "__version__",
]
