"""Koopman operator learning with heterogeneous sigmoid/RBF dictionaries.

The package fits linear one-step models z' = K z of nonlinear dynamics in a
lifted observable space, compares dictionary families on benchmark systems,
and numerically verifies the approximate-closure properties (products of
dictionary functions collapsing back onto the dictionary as steepness grows)
that motivate the heterogeneous design.
"""

from koopman_lift.closure import (
    ClosureConfig,
    FieldExpansion,
    bound_check_all,
    closure_report_obj,
    convergence_sweep,
    decision_function,
    lie_derivative_exact,
    lie_linearization_sweep,
    mc_expectation,
)
from koopman_lift.evaluate import (
    CompareConfig,
    EvalReport,
    compare_dictionaries,
    five_step_error,
    predict,
)
from koopman_lift.learn import (
    KoopmanModel,
    TrainConfig,
    dmd_fit,
    edmd_fit,
    load_model,
    matching_pursuit_fit,
    save_model,
    sgd_train,
)
from koopman_lift.lifting import (
    DictParams,
    Dictionary,
    conj_logistic,
    conj_rbf,
    graded_indices,
    grad_conj_logistic,
    grad_conj_rbf,
    lift,
    load_dictionary,
    logistic,
    make_dictionary,
    param_jacobian,
    product_limit_params,
    rbf,
    save_dictionary,
)
from koopman_lift.simulate import (
    SnapshotSet,
    Trajectory,
    build_snapshots,
    load_dataset,
    make_dataset,
    save_dataset,
    simulate,
    split_tags,
)
from koopman_lift.systems import SYSTEM_NAMES, SystemDef, get_system

__version__ = "0.1.0"

__all__ = [
    "ClosureConfig",
    "CompareConfig",
    "DictParams",
    "Dictionary",
    "EvalReport",
    "FieldExpansion",
    "KoopmanModel",
    "SYSTEM_NAMES",
    "SnapshotSet",
    "SystemDef",
    "TrainConfig",
    "Trajectory",
    "bound_check_all",
    "build_snapshots",
    "closure_report_obj",
    "compare_dictionaries",
    "conj_logistic",
    "conj_rbf",
    "convergence_sweep",
    "decision_function",
    "dmd_fit",
    "edmd_fit",
    "five_step_error",
    "get_system",
    "graded_indices",
    "grad_conj_logistic",
    "grad_conj_rbf",
    "lie_derivative_exact",
    "lie_linearization_sweep",
    "lift",
    "load_dataset",
    "load_dictionary",
    "load_model",
    "logistic",
    "make_dataset",
    "make_dictionary",
    "matching_pursuit_fit",
    "mc_expectation",
    "param_jacobian",
    "predict",
    "product_limit_params",
    "rbf",
    "save_dataset",
    "save_dictionary",
    "save_model",
    "sgd_train",
    "simulate",
    "split_tags",
    "__version__",
]
