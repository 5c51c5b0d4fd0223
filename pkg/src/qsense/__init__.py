"""Private multiparameter estimation on networks of qubit sensors."""
from .resources import (
    BitString,
    Order,
    ResourcePartition,
    TargetFunction,
    Zone,
    classify_zone,
    gcd_vec,
    hamming_vec,
    hamming_vec_sym,
    preceq,
    product_order,
)
from .hilbert import DensityMatrix, StateVector, basis_state, ghz, partial_trace
from .hamiltonians import (
    GeneralLocalHamiltonian,
    NodeHamiltonian,
    PauliString,
    SeparableDynamics,
    build_orthotope,
    encode,
    target_in_O2minus,
)
from .stabilizer import Tableau, qfi_stabilizer, tableau_ghz
from .qfi import (
    QfiMatrix,
    qfi_mixed_eig,
    qfi_mixed_grouped,
    qfi_of,
    qfi_pure_dense,
    qfi_sld_oracle,
    qfi_structured_general,
    qfi_structured_separable,
)
from .privacy import (
    FamilySpec,
    LogicalBlock,
    LogicalSpec,
    PrivacyReport,
    ZeroInformationError,
    build_family_state,
    build_logical_state,
    enumerate_family_specs,
    privacy_measure,
    search_max_privacy,
    verify_private,
)
from .noise import ChannelSpec, apply_channel, loss_analysis, robustness_scan

__version__ = "0.1.0"
