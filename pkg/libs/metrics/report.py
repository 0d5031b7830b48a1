import csv
import io
import logging
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import DomainError, FormatError, UndefinedMetricError
from libs.metrics.flows import FlowsLike, RankCurve, cpc, nrmse, pair_values, rmse, spearman
from libs.utils.files import atomic_write_text
from libs.utils.numbers import parse_real

logger = logging.getLogger(__name__)

METRICS = ("rmse", "nrmse", "cpc", "spearman")
HIGHER_IS_BETTER = {"rmse": False, "nrmse": False, "cpc": True, "spearman": True}
UNDEFINED = "undefined"


class EvalReport(BaseModel):
    """Metrics of one generated matrix against its reference; ``None`` marks an undefined metric."""

    city: Optional[str] = None
    rmse: float = Field(ge=0)
    nrmse: Optional[float] = Field(default=None, ge=0)
    cpc: Optional[float] = Field(default=None, ge=0, le=1)
    spearman: Optional[float] = Field(default=None, ge=-1, le=1)
    n_pairs: int = Field(ge=0)
    include_diagonal: bool = True

    def metric(self, name: str) -> Optional[float]:
        return getattr(self, name)

    def to_kv(self) -> str:
        lines = []
        for key, value in self.model_dump().items():
            if value is None:
                value = UNDEFINED if key in METRICS else ""
            elif isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str, path: Union[str, Path, None] = None) -> "EvalReport":
        values: dict[str, object] = {}
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError("expected key=value", path, line_no)
            key, value = key.strip(), value.strip()
            if key in METRICS:
                values[key] = None if value == UNDEFINED else parse_real(value, path, line_no)
            elif key == "city":
                values[key] = value or None
            else:
                values[key] = value
        return cls.model_validate(values)


def _safe(metric: Callable[..., float], F: FlowsLike, F_hat: FlowsLike, include_diagonal: bool, name: str) -> Optional[float]:
    try:
        return metric(F, F_hat, include_diagonal)
    except UndefinedMetricError as e:
        logger.warning(f"{name}: {e}")
        return None


def evaluate(
    reference: FlowsLike,
    generated: FlowsLike,
    include_diagonal: bool = True,
    city: Optional[str] = None,
) -> EvalReport:
    """All four metrics; ODMatrix inputs are aligned by region id first."""
    if isinstance(reference, ODMatrix) and isinstance(generated, ODMatrix):
        if generated.region_ids != reference.region_ids:
            generated = generated.reindexed(reference.region_ids)
    a, _ = pair_values(reference, generated, include_diagonal)
    return EvalReport(
        city=city,
        rmse=rmse(reference, generated, include_diagonal),
        nrmse=_safe(nrmse, reference, generated, include_diagonal, "nrmse"),
        cpc=_safe(cpc, reference, generated, include_diagonal, "cpc"),
        spearman=_safe(spearman, reference, generated, include_diagonal, "spearman"),
        n_pairs=int(a.size),
        include_diagonal=include_diagonal,
    )


class RunSummary(BaseModel):
    """Mean and standard deviation of each metric over a group of reports."""

    n: int
    mean: dict[str, Optional[float]]
    std: dict[str, Optional[float]]

    def describe(self, name: str) -> str:
        mean, std = self.mean.get(name), self.std.get(name)
        if mean is None:
            return f"{name}={UNDEFINED}"
        return f"{name}={mean:.4f}±{std:.4f}"


def aggregate_runs(reports: Sequence[EvalReport]) -> RunSummary:
    """
    Summarize repeated runs (e.g. several seeds) or several cities.

    Undefined metrics are skipped; the standard deviation uses ``ddof=1``
    when at least two values exist.
    """
    if not reports:
        raise DomainError("aggregate_runs needs at least one report")
    mean: dict[str, Optional[float]] = {}
    std: dict[str, Optional[float]] = {}
    for name in METRICS:
        values = np.array([r.metric(name) for r in reports if r.metric(name) is not None])
        if values.size == 0:
            mean[name], std[name] = None, None
            continue
        mean[name] = float(values.mean())
        std[name] = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return RunSummary(n=len(reports), mean=mean, std=std)


class CorpusReport(BaseModel):
    rows: list[EvalReport]
    summary: RunSummary

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["city", *METRICS, "n_pairs"])
        for row in self.rows:
            writer.writerow(
                [row.city or "", *(UNDEFINED if row.metric(m) is None else repr(row.metric(m)) for m in METRICS), row.n_pairs]
            )
        for label, values in (("mean", self.summary.mean), ("std", self.summary.std)):
            writer.writerow([label, *(UNDEFINED if values[m] is None else repr(values[m]) for m in METRICS), ""])
        return buffer.getvalue()


def evaluate_corpus(
    pairs: Sequence[tuple[str, FlowsLike, FlowsLike]], include_diagonal: bool = True
) -> CorpusReport:
    """``pairs`` holds (city id, reference, generated) per city."""
    rows = [evaluate(ref, gen, include_diagonal, city=city) for city, ref, gen in pairs]
    return CorpusReport(rows=rows, summary=aggregate_runs(rows))


def relative_improvement(model: EvalReport, baseline: EvalReport) -> dict[str, Optional[float]]:
    """
    Per-metric improvement of ``model`` over ``baseline`` as a fraction of the
    baseline value; positive means ``model`` is better.
    """
    out: dict[str, Optional[float]] = {}
    for name in METRICS:
        m, b = model.metric(name), baseline.metric(name)
        if m is None or b is None or b == 0:
            out[name] = None
            continue
        delta = (m - b) if HIGHER_IS_BETTER[name] else (b - m)
        out[name] = delta / abs(b)
    return out


def reference_share(value: float, reference_value: float) -> float:
    """Percentage of a reference setting's score reached by another setting."""
    if reference_value == 0:
        raise UndefinedMetricError("Reference score is zero")
    return 100.0 * value / reference_value


def write_report(path: Union[str, Path], report: EvalReport) -> Path:
    return atomic_write_text(path, report.to_kv())


def read_report(path: Union[str, Path]) -> EvalReport:
    path = Path(path)
    if not path.is_file():
        raise FormatError("report not found", path)
    return EvalReport.from_kv(path.read_text(encoding="utf-8"), path)


def write_corpus_report(path: Union[str, Path], report: CorpusReport) -> Path:
    return atomic_write_text(path, report.to_csv())


def write_rank_curve(path: Union[str, Path], curve: RankCurve) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["rank", "reference", "generated"])
    for rank, (ref, gen) in enumerate(zip(curve.reference, curve.generated)):
        writer.writerow([rank, repr(float(ref)), repr(float(gen))])
    return atomic_write_text(path, buffer.getvalue())
