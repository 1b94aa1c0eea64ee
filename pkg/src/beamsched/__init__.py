"""Link-level simulator and user-selection schedulers for multi-user mmWave
hybrid beamforming: two-timescale protocol, grid-of-beams codebook, ZF digital
precoding, PF scheduling, and greedy / top-k / adaptive top-k / exhaustive /
learned selection algorithms."""

from .backend import COMPILED, backend_name
from .config import SystemConfig, load_config, paper_config
from .errors import CombinatorialCapError, ConfigurationError, SingularChannel
from .arrays import ArrayGeometry, array_response
from .channel import (
    ChannelState,
    advance_long_block,
    advance_short_block,
    generate_episode,
)
from .codebook import (
    BeamAssignment,
    Codebook,
    build_grid_codebook,
    select_best_beam,
    sweep_assignments,
)
from .precoder import (
    EffectiveChannels,
    SelectionResult,
    effective_submatrix,
    evaluate_rates,
    zf_precoder,
)
from .schedulers import (
    SchedulerContext,
    adaptive_topk_select,
    exhaustive_select,
    greedy_select,
    make_scheduler,
    topk_select,
)
from .protocol import episode_seed, run_episode, slot_timing, update_cumulative_rate
from .metrics import (
    geometric_mean_rate,
    min_chordal_distance,
    proportional_fairness,
    rate_cdf,
)
from .ml import (
    SelectorNetwork,
    SlotDataset,
    element_accuracy,
    generate_dataset,
    infer_selection,
    init_network,
    train,
)

__version__ = "0.1.0"
