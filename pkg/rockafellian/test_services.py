import json
import math

import pytest

from rockafellian import config
from rockafellian.schemas import REPORT_COLUMNS, ReportRow, RunVariant, SolveReport
from rockafellian.services import ReportService


@pytest.fixture
def report():
    rows = [
        ReportRow(nu=1, variant=RunVariant.IDENTITY, lam=1.0, inf_plugin=math.inf, inf_f=0.5,
                  u=[-0.5], x=[0.0], n_representatives=1, d_mi=0.5),
        ReportRow(nu=1, variant=RunVariant.ENVELOPE, lam=1.0, inf_plugin=math.inf, inf_f=1.0, x=[1.0]),
    ]
    return SolveReport(preset="finite-I", schedule={"proposition": "explicit"}, seed=3, grid={"resolution": 41},
                       horizon=1, inf_phi=0.0, rows=rows)


def test_json_keeps_infinity(report):
    text = ReportService.to_json(report)
    assert "Infinity" in text
    data = json.loads(text)
    assert data["schema"] == config.REPORT_SCHEMA_VERSION
    assert data["rows"][0]["inf_plugin"] == math.inf
    assert data["rows"][1]["variant"] == "envelope"


def test_frame_layout(report):
    frame = ReportService.to_frame(report)
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.loc[0, "u"] == "-0.5"
    assert frame.loc[0, "variant"] == "identity"
    assert frame.loc[1, "u"] is None


def test_csv_header(report):
    text = ReportService.render(report, "csv")
    assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert len(text.splitlines()) == 3


def test_write_and_read_back(report, tmp_path):
    path = ReportService.write(report, tmp_path / "nested" / "finite-I.json")
    assert path.exists()
    again = ReportService.read(path)
    assert again.rows[0].inf_plugin == math.inf
    assert again.column("inf_f") == [0.5, 1.0]
    assert [p.name for p in path.parent.iterdir()] == ["finite-I.json"]


def test_write_infers_csv_from_suffix(report, tmp_path):
    path = ReportService.write(report, tmp_path / "finite-I.csv")
    assert path.read_text(encoding="utf-8").startswith("nu,variant,")


def test_explicit_format_wins(report, tmp_path):
    path = ReportService.write(report, tmp_path / "report.txt", "csv")
    assert path.read_text(encoding="utf-8").startswith("nu,")


def test_default_path(report, report_dir):
    assert ReportService.default_path(report) == report_dir / "finite-I-seed3.json"
    assert ReportService.default_path(report, "csv").name == "finite-I-seed3.csv"
