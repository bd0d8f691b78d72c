import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from . import config
from .schemas import REPORT_COLUMNS, OutputFormat, SolveReport

logger = logging.getLogger(__name__)


class ReportService:
    @staticmethod
    def to_dict(report: SolveReport) -> dict:
        """Report as plain data; infinities stay floats."""
        data = report.model_dump(by_alias=True)
        data["schema"] = config.REPORT_SCHEMA_VERSION
        for row in data["rows"]:
            row["variant"] = row["variant"].value if hasattr(row["variant"], "value") else row["variant"]
        return data

    @staticmethod
    def to_json(report: SolveReport) -> str:
        # Infinity is part of the format: plug-in values are +inf when infeasible
        return json.dumps(ReportService.to_dict(report), indent=2, allow_nan=True)

    @staticmethod
    def to_frame(report: SolveReport) -> pd.DataFrame:
        """One line per (nu, variant); vector cells joined with ';'."""
        records = []
        for row in report.rows:
            record = {}
            for name in REPORT_COLUMNS:
                value = getattr(row, name)
                if isinstance(value, list):
                    value = ";".join(repr(float(v)) for v in value)
                elif hasattr(value, "value"):
                    value = value.value
                record[name] = value
            records.append(record)
        return pd.DataFrame(records, columns=REPORT_COLUMNS)

    @staticmethod
    def render(report: SolveReport, fmt: Union[str, OutputFormat] = OutputFormat.JSON) -> str:
        fmt = OutputFormat(fmt)
        if fmt == OutputFormat.CSV:
            return ReportService.to_frame(report).to_csv(index=False)
        return ReportService.to_json(report)

    @staticmethod
    def write(report: SolveReport, path: Union[str, Path], fmt: Optional[Union[str, OutputFormat]] = None) -> Path:
        """Atomically write the report; the format defaults to the file suffix."""
        path = Path(path)
        if fmt is None:
            fmt = OutputFormat.CSV if path.suffix.lower() == ".csv" else OutputFormat.JSON
        text = ReportService.render(report, fmt)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        logger.info("Wrote %s report for %s to %s", OutputFormat(fmt).value, report.preset, path)
        return path

    @staticmethod
    def read(path: Union[str, Path]) -> SolveReport:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        return SolveReport.model_validate(data)

    @staticmethod
    def default_path(report: SolveReport, fmt: Union[str, OutputFormat] = OutputFormat.JSON) -> Path:
        fmt = OutputFormat(fmt)
        return Path(config.REPORT_DIR) / f"{report.preset}-seed{report.seed}.{fmt.value}"
