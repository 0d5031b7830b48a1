import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from libs.errors import FormatError, ValidationError
from libs.ingest.corpus import load_corpus
from libs.ingest.tables import read_od
from libs.metrics.flows import RankCurve, rank_curve
from libs.metrics.report import (
    CorpusReport,
    EvalReport,
    evaluate,
    evaluate_corpus,
    write_corpus_report,
    write_rank_curve,
    write_report,
)

logger = logging.getLogger(__name__)
class EvaluationService:
    """Service comparing generated flows with reference flows."""

    @staticmethod
    def evaluate_files(
        reference_path: Union[str, Path],
        generated_path: Union[str, Path],
        include_diagonal: bool = True,
        window: Optional[int] = None,
    ) -> tuple[EvalReport, RankCurve]:
        """
        Metrics and rank curve for two OD files over the same regions.

        Args:
            reference_path: Reference OD CSV
            generated_path: Generated OD CSV
            include_diagonal: Count intra-region flows
            window: Rank-curve smoothing window (default depends on the pair count)

        Returns:
            Tuple of (report, rank curve)
        """
        reference = read_od(reference_path)
        generated = read_od(generated_path, region_ids=reference.region_ids)
        report = evaluate(reference, generated, include_diagonal)
        curve = rank_curve(reference.F, generated.F, window, include_diagonal)
        return report, curve

    @staticmethod
    def write_outputs(
        report: EvalReport,
        report_path: Union[str, Path],
        curve: Optional[RankCurve] = None,
        curve_path: Optional[Union[str, Path]] = None,
    ) -> None:
        write_report(report_path, report)
        if curve is not None and curve_path is not None:
            write_rank_curve(curve_path, curve)
        logger.info(f"Wrote evaluation of {report.n_pairs} pairs to {report_path}")

    @staticmethod
    def evaluate_corpus_dir(
        corpus_dir: Union[str, Path],
        generated_dir: Union[str, Path],
        splits: Optional[Sequence[str]] = ("test",),
        include_diagonal: bool = True,
    ) -> CorpusReport:
        """
        Per-city metrics for a corpus whose generated flows sit in
        ``generated_dir/<city>.csv``, with mean and spread over the cities.
        """
        generated_dir = Path(generated_dir)
        pairs = []
        for bundle in load_corpus(corpus_dir, splits=splits):
            if bundle.od is None:
                raise ValidationError(f"City {bundle.name} has no reference flows to evaluate against")
            path = generated_dir / f"{bundle.name}.csv"
            if not path.is_file():
                raise FormatError("generated flows not found", path)
            reference = bundle.od.reindexed(bundle.region_ids)
            pairs.append((bundle.name, reference, read_od(path, region_ids=bundle.region_ids)))
        if not pairs:
            raise ValidationError(f"No cities to evaluate in {corpus_dir}")
        return evaluate_corpus(pairs, include_diagonal)

    @staticmethod
    def write_corpus_outputs(report: CorpusReport, report_path: Union[str, Path]) -> None:
        write_corpus_report(report_path, report)
        logger.info(f"Wrote evaluation of {len(report.rows)} cities to {report_path}")
