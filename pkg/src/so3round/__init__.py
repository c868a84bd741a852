"""Rounding to separated nets on SO(3) and the statistics attached to it."""

from .so3 import (
    DIAMETER,
    EulerZXZ,
    Rotation,
    ball_measure,
    centralizer_ratio_scan,
    commutator,
    commutator_norm_zx,
    conjugate,
    dist_to_centralizer,
    distance,
    euler_zxz,
    haar_rotation,
    norm,
    rot_x,
    rot_z,
)
from .net import Net, build_net, covering_check, net_load, net_save, nn_query
from .roundgroup import (
    OpTableStats,
    assoc_rate,
    cancellativity_profile,
    energy_estimate,
    proximal_stats,
    round_op,
)
from .words import (
    FiniteSubgroup,
    Word,
    commutator_word,
    finite_subgroup,
    genericity_scan,
    lipschitz_check,
    verify_word_on_group,
    w_star_word,
    word_eval,
)
from .kazhdan import (
    NearHom,
    cocycle,
    cocycle_identity_residual,
    correct,
    defect,
    hom_from_subgroup,
    perturb_hom,
)

__version__ = "0.1.0"
