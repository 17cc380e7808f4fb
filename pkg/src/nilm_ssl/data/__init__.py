"""Meter ingestion, alignment, normalization, windowing and synthetic data."""

from .series import (
    AGGREGATE,
    CANONICAL,
    CHANNEL_DAT,
    PERIOD,
    REFIT_CSV,
    AlignedHousehold,
    MeterReadings,
    PowerSeries,
    align,
    load_channel_household,
    load_refit_household,
    parse_meter_file,
    read_canonical_csv,
    resample_1min,
    write_canonical_csv,
)
from .synthetic import SyntheticApplianceSpec, desk_appliances, generate_synthetic, simulate_appliance
from .windows import (
    ENDPOINT,
    MIDPOINT,
    NormStats,
    WindowBatch,
    concat_batches,
    denormalize,
    fit_norm,
    fit_norm_many,
    make_windows,
    normalize,
    split_chronological,
    target_offset,
    valid_runs,
)
