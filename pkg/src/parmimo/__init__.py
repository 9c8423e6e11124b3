"""PAR-aware precoding for massive multi-user MIMO-OFDM downlinks.

Joint precoding, modulation and PAR reduction (PMP) solved with a fast
iterative truncation method, next to LS, MF and clipped-LS baselines and
a coded 16-QAM link for end-to-end error rates.
"""

from parmimo.kernels import BACKEND
from parmimo.precoders import (
    PrecoderConfig,
    TxFrame,
    precode,
    precode_ls,
    precode_ls_clip,
    precode_mf,
    precode_pmp,
)
from parmimo.solver import LinfLsProblem, SolverResult, fitra, ista, prox_alpha, prox_truncate
from parmimo.system import (
    ChannelRealization,
    PmpOperator,
    TonePlan,
    build_pmp_problem,
    draw_channel,
    make_toneplan_80211n_40mhz,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChannelRealization",
    "LinfLsProblem",
    "PmpOperator",
    "PrecoderConfig",
    "SolverResult",
    "TonePlan",
    "TxFrame",
    "build_pmp_problem",
    "draw_channel",
    "fitra",
    "ista",
    "make_toneplan_80211n_40mhz",
    "precode",
    "precode_ls",
    "precode_ls_clip",
    "precode_mf",
    "precode_pmp",
    "prox_alpha",
    "prox_truncate",
]
