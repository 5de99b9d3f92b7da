"""Farm-wide virtual load monitoring: python bindings over the C++ core."""

from ._core import (  # noqa: F401
    BnnNet,
    CycleSpectrum,
    Dataset,
    DenseNet,
    FarmData,
    FarmSpec,
    HeadKind,
    PointErrors,
    PredictiveSampleSet,
    SnParams,
    TrainHistory,
    TurbineSpec,
    UncertaintyDecomposition,
    WeightStatHistory,
    accel_columns,
    bnn_train,
    decompose,
    dem,
    elbo_loss,
    expected_log_likelihood,
    gaussian_kl,
    input_config_columns,
    label_columns,
    load_csv,
    miner_damage,
    min_euclidean_distance,
    mlp_train,
    point_errors,
    predictive_ensemble,
    rainflow_count,
    save_csv,
    scada_columns,
    synth_farm,
    wave_columns,
)

__version__ = "0.1.0"
