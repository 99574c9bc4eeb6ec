import numpy as np
import pytest
from hypothesis import settings

from icaccuracy.core import EvaluationWindow, EventKind, SubjectRecord
from icaccuracy.predictor import ConstantHazardPredictor

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def window():
    return EvaluationWindow(1.0, 3.0)


@pytest.fixture
def const_pred():
    return ConstantHazardPredictor(0.2, 0.1)


def prog(sid, last_neg, t_pos, **kw):
    return SubjectRecord(str(sid), last_neg, EventKind.PROGRESSION, t_pos=t_pos, **kw)


def treated(sid, last_neg, t_trt, **kw):
    return SubjectRecord(str(sid), last_neg, EventKind.TREATMENT, t_trt=t_trt, **kw)


def censored(sid, last_neg, t_cen, **kw):
    return SubjectRecord(str(sid), last_neg, EventKind.CENSORED, t_cen=t_cen, **kw)


def closed_cif(lam_p, lam_t, s, r):
    lam = lam_p + lam_t
    return lam_p / lam * (1.0 - np.exp(-lam * np.maximum(np.asarray(s) - r, 0.0)))


def closed_surv(lam_p, lam_t, s, r):
    return np.exp(-(lam_p + lam_t) * np.maximum(np.asarray(s) - r, 0.0))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
