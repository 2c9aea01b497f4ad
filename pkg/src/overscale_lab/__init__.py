"""Compute-budget analysis and simulation for parallel-thinking inference."""

__version__ = "0.1.0"

from .categorical_sim import (CategoricalAnswerModel, MarginStats, SynthSpec,
                              brute_force_mv_accuracy, exact_mv_accuracy,
                              margin_stats, mc_mv_accuracy, sample_trace,
                              synth_dataset, union_bound_lower)
from .estimator import (ErrorCovariance, EstimatorBundle, LayerWeightVector,
                        MlpEstimator, TrainConfig, aggregate_estimate,
                        diag_surrogate_diagnostics, gls_weights, gradient_check,
                        inverse_variance_weights, load_bundle, mlp_forward,
                        pipeline_estimate, save_bundle, theorem2_mc_check,
                        train_bundle, train_estimator, validation_mae,
                        validation_mse)
from .overscale_metrics import (OptimalN, OverscalingReport, Theorem1Report,
                                gain, mean_curve, oracle_vs_system_values,
                                overscaling_index, sample_optimal_n,
                                system_optimal_n, theorem1_check,
                                type_gain_table)
from .planted import PlantedBenchmark, make_planted_benchmark
from .policies import (CostReport, PolicyOutcome, betainc_half, cost_report,
                       outcomes_to_csv, run_ac, run_dsc, run_esc, run_oracle,
                       run_std_pt, run_t2)
from .taxonomy import (MonotonicityParams, Partition, SampleType,
                       approx_monotone, classify, partition)
from .trace_model import (LayerFeatureSet, QuestionTrace, SamplingConfig,
                          SchemaError, TraceDataset, answer_counts,
                          load_features, load_traces, save_features,
                          save_traces)
from .vote_curve import (BudgetAccuracyCurve, SubsampleParams, TieRule,
                         budget_accuracy_curve, curves_to_csv, dataset_curves,
                         exact_subset_accuracy, majority_vote,
                         subsample_accuracy)

__all__ = [name for name in dir() if not name.startswith("_")]
