"""Graph-network channel tracking for massive MIMO uplinks.

Simulates time-varying multipath channels, forms pilot-based LS estimates,
represents them as correlation-weighted antenna graphs, and trains an
encoder/core/decoder graph network to predict the true channel, next to
LS and fully-connected baselines.
"""

from .errors import InvalidInput, TapeReuseError, TrainingDiverged
from .channel import (
    FrameLayout,
    Frame,
    LsSeries,
    PathSet,
    SymbolStream,
    SystemConfig,
    build_ls_series,
    draw_paths,
    generate_frame,
    ls_estimate,
    receive,
    sample_channel,
    sample_channel_block,
    simulate_frame,
    steering_vector,
)
from .graphs import (
    ChannelGraph,
    GraphWindow,
    build_graph,
    build_vertices,
    concat_graphs,
    edge_correlation,
    ls_window,
    permute_graph,
    readout,
)
from .nn import (
    AdamState,
    BatchNormState,
    Mlp,
    MlpSpec,
    Tape,
    adam_step,
    load_arrays,
    mse_l2_loss,
    save_arrays,
)
from .gnn import GnnConfig, GnnModel, core, decode, encode, gn_block, predict
from .baselines import FnnModel, fnn_predict, ls_baseline_predict
from .harness import (
    DatasetSample,
    EvalConfig,
    ExperimentConfig,
    MethodSpec,
    MetricsRow,
    SweepSpec,
    TrainingConfig,
    evaluate,
    generate_dataset,
    load_dataset,
    pack_dataset,
    run_sweep,
    save_dataset,
    train,
)
from .presets import make_preset

__version__ = "0.1.0"
