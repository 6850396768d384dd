from .paradigms import (AprModel, ParadigmKind, RetrievalDatabase, RprModel,
                        load_baseline, make_vo_model, rpr_training_pairs,
                        save_baseline, train_apr, train_rpr, vo_predict)
from .evaluate import (REPORT_HEADER, SPLIT_SEEN, SPLIT_UNSEEN, AprAdapter,
                       OracleAdapter, ReportRow, RprAdapter, SprAdapter,
                       VoAdapter, aggregate_of, evaluate, query_trajs,
                       read_report, recompute_aggregates, rows_to_csv,
                       rpr_databases, unseen_roles, write_report)
from .studies import (DriftLawResult, STUDY_HEADER, StudyRow, drift_law_simulation,
                      drift_study, fov_study, fov_trend_flags, write_study_csv)
from .harness import (ABLATION_VARIANTS, PARADIGMS, BenchConfig, ablation_study,
                      adapter_for, cross_height_study, evaluate_paradigm,
                      load_bench_data, run_benchmark, spr_config,
                      train_paradigm)
from .svg import svg_line_chart

__all__ = [
    "AprModel", "ParadigmKind", "RetrievalDatabase", "RprModel",
    "load_baseline", "make_vo_model", "rpr_training_pairs", "save_baseline",
    "train_apr", "train_rpr", "vo_predict", "REPORT_HEADER", "SPLIT_SEEN",
    "SPLIT_UNSEEN", "AprAdapter", "OracleAdapter", "ReportRow", "RprAdapter",
    "SprAdapter", "VoAdapter", "aggregate_of", "evaluate", "query_trajs",
    "read_report", "recompute_aggregates", "rows_to_csv", "rpr_databases",
    "unseen_roles", "write_report", "DriftLawResult", "STUDY_HEADER",
    "StudyRow", "drift_law_simulation", "drift_study", "fov_study",
    "fov_trend_flags", "write_study_csv", "ABLATION_VARIANTS", "PARADIGMS",
    "BenchConfig", "ablation_study", "adapter_for", "cross_height_study",
    "evaluate_paradigm", "load_bench_data", "run_benchmark", "spr_config",
    "train_paradigm", "svg_line_chart",
]
