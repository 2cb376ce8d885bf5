import csv
import json

import pytest

from app.models import UpdateSource
from app.services.metrics import (
    CSV_COLUMNS, MetricsLedger, eq_percent, export, mean_std, r_squared, spearman
)


@pytest.fixture
def ledger():
    ledger = MetricsLedger(range(3), {'seed': 9})
    ledger.record_query(1, 1)
    ledger.record_query(2, 1)
    ledger.record_effective(1, 2)
    ledger.record_update(1, 2, UpdateSource.QUERY)
    ledger.record_update(2, 2, UpdateSource.EU)
    ledger.sample(1, 0)
    ledger.sample(2, 1)
    ledger.stop_iteration = 2
    ledger.collected = 1
    return ledger


def test_counters(ledger):
    assert ledger.counters() == {'queries': 2, 'effective': 1, 'Q': 1, 'EU': 1, 'EBU': 0}
    assert ledger.recount() == ledger.counters()
    assert ledger.per_robot[1] == {'queries': 1, 'effective': 1, 'Q': 1, 'EU': 0, 'EBU': 0}
    assert ledger.total_updates == 2


def test_eq_percent(ledger):
    assert eq_percent(ledger) == 0.5
    assert eq_percent(MetricsLedger()) == 1.0


def test_timeline_is_cumulative(ledger):
    assert ledger.timeline == [(1, 2, 1, 1, 1, 0, 0), (2, 2, 1, 1, 1, 0, 1)]


def test_csv_export(ledger, tmp_path):
    path = tmp_path / 'trial' / '0.csv'
    export(ledger, 'csv', str(path))
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[2] == ['2', '2', '1', '1', '1', '0', '1']


def test_json_export(ledger, tmp_path):
    path = tmp_path / '0.json'
    export(ledger, 'json', str(path))
    document = json.loads(path.read_text())
    assert document['summary']['eq_percent'] == 0.5
    assert document['config'] == {'seed': 9}
    assert set(document['per_robot']) == {'0', '1', '2'}


def test_unknown_export_format(ledger, tmp_path):
    with pytest.raises(ValueError):
        export(ledger, 'xml', str(tmp_path / 'x'))


def test_mean_std():
    assert mean_std([1, 2, 3]) == (2.0, 1.0)
    assert mean_std([4]) == (4.0, 0.0)
    assert mean_std([]) == (None, None)


def test_r_squared():
    assert r_squared([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
    assert r_squared([1, 2, 3, 4], [1, 3, 1, 3]) < 0.5


def test_spearman():
    assert spearman([1, 2, 3, 4], [10, 20, 25, 90]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [9, 7, 7, 1]) < -0.9
    assert spearman([1, 2, 3], [5, 5, 5]) == 0.0
