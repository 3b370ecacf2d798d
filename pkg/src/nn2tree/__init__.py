"""Compile piecewise-linear neural networks into equivalent oblique decision trees.

The pipeline: describe a network (`NetworkSpec` of dense / residual / conv /
recurrent layers with piecewise-linear activations), evaluate it
(`forward`), compile it (`lazy_eval`, `build_tree`), verify the equivalence,
prune the tree losslessly (`prune_infeasible`), and account for the
computational trade-off (`cost_report`).
"""

from .activations import (
    PwlActivation,
    hard_tanh,
    identity,
    leaky_relu,
    quantize_activation,
    region_of,
    region_select,
    relu,
)
from .convnet import conv_effective_kernel, conv_lazy_eval, lower_network
from .costs import CostReport, cost_report
from .datasets import Dataset, gen_halfmoons, gen_parabola
from .dot_export import export_dot
from .effective import (
    Counters,
    EffectiveMatrix,
    compile_network,
    effective_matrix,
    lazy_eval,
    mask_weights,
    residual_effective,
    residual_step_matrix,
)
from .experiments import run_experiment
from .layers import (
    ConvLayer,
    DenseLayer,
    DimensionError,
    NormalizationSpec,
    ResidualBlock,
    RnnCell,
    fold_normalization,
)
from .network import ActivationTrace, NetworkSpec, augment_bias, forward
from .prune import (
    HalfspaceRule,
    PathPolytope,
    is_feasible,
    mark_realized,
    path_constraints,
    prune_infeasible,
    simplify_rules_1d,
)
from .rnn import compile_rnn, rnn_effective_output, rnn_forward, stack_rnn_input
from .training import TrainConfig, TrainingDiverged, init_dense_network, train
from .tree import (
    DecisionNode,
    DecisionTree,
    LeafBudgetError,
    LeafNode,
    build_tree,
    export_json,
    import_json,
    tree_eval,
    tree_eval_batch,
)
from .weights_io import SchemaError, load_network, save_network

__version__ = "0.1.0"
