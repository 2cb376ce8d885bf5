import pickle

import pytest

from app.errors import ConfigurationError, GrammarError, TrialError
from app.services.string_bt import parse


def _roundtrip(error):
    return pickle.loads(pickle.dumps(error))


def test_grammar_error_survives_pickling():
    with pytest.raises(GrammarError) as excinfo:
        parse('SEQ[ ACT:')
    copy = _roundtrip(excinfo.value)
    assert type(copy) is GrammarError
    assert isinstance(copy, ConfigurationError)
    assert (copy.line, copy.column) == (excinfo.value.line, excinfo.value.column)
    assert str(copy) == str(excinfo.value)


def test_configuration_error_keeps_its_path():
    copy = _roundtrip(ConfigurationError('must be positive', path='roster.0.count'))
    assert copy.path == 'roster.0.count'
    assert str(copy) == 'roster.0.count: must be positive'


def test_trial_error_keeps_its_seed():
    copy = _roundtrip(TrialError('boom', seed=7))
    assert copy.seed == 7
    assert str(copy) == 'boom [seed=7]'
