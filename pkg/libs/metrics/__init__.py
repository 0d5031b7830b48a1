from libs.metrics.flows import (
    RankCurve,
    cpc,
    default_window,
    moving_average,
    nrmse,
    pair_values,
    rank_curve,
    rmse,
    spearman,
)
from libs.metrics.report import (
    CorpusReport,
    EvalReport,
    RunSummary,
    aggregate_runs,
    evaluate,
    evaluate_corpus,
    read_report,
    reference_share,
    relative_improvement,
    write_corpus_report,
    write_rank_curve,
    write_report,
)

__all__ = [
    "CorpusReport",
    "EvalReport",
    "RankCurve",
    "RunSummary",
    "aggregate_runs",
    "cpc",
    "default_window",
    "evaluate",
    "evaluate_corpus",
    "moving_average",
    "nrmse",
    "pair_values",
    "rank_curve",
    "read_report",
    "reference_share",
    "relative_improvement",
    "rmse",
    "spearman",
    "write_corpus_report",
    "write_rank_curve",
    "write_report",
]
