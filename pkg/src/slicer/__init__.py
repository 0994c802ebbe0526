"""Split-computing toolkit: sparse intermediate-feature codec, analytic
latency models, constraint-aware split planning, and a deterministic
multi-device simulator."""

from .atkf import AtkfResult, atkf_filter
from .channel import (
    ChannelParams,
    LatencyBreakdown,
    comm_latency,
    outage_probability,
    retx_factor,
    total_latency_ar,
    total_latency_single,
)
from .codec import (
    CodecConfig,
    CompressedIF,
    EncodedBlock,
    broadcast_q,
    decode,
    deserialize,
    encode,
    payload_bits_exact,
    serialize,
)
from .errors import (
    ConfigError,
    CorruptStreamError,
    InfeasiblePlanError,
    NonFiniteError,
    ProfileError,
    ShapeError,
    SlicerError,
    StreamFormatError,
    TensorFormatError,
)
from .msplit import (
    BlockPartition,
    CsrBlock,
    SignPlane,
    partition_equal,
    sign_separate,
    sort_nonzeros,
    to_csr,
)
from .planner import (
    SearchGrids,
    SplitPlan,
    encode_time_estimate,
    hierarchical_search,
    payload_upper_bound,
    select_compression_param,
    select_split_ar,
    select_split_single,
)
from .profiles import Constraints, DeviceTimeModel, ModelProfile, load_channel
from .quant import (
    QuantSpec,
    QuantizedBlock,
    abq_select_bits,
    aiq_dequantize,
    aiq_quantize,
    ds_metric,
    fixed_q_assign,
)
from .sim import (
    SimConfig,
    SimReport,
    compare_policies,
    run_simulation,
    sim_config_from_dict,
    sweep_devices,
    write_csv,
)
from .tensor import DenseTensor, load_tensor, random_tensor, save_tensor

__version__ = "0.1.0"
