"""Subject records, evaluation windows and the case/control scenario taxonomy.

All interval comparisons follow the half-open window convention
``[t, t + dt)``: a time equal to ``t`` counts as inside the window and a
time equal to ``t + dt`` counts as after it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import (
    EmptyRiskSet,
    InvalidWindow,
    MismatchedEndpoint,
    NegativeTime,
    NonMonotoneTimes,
)


class EventKind(enum.IntEnum):
    CENSORED = 0
    PROGRESSION = 1
    TREATMENT = 2


_ENDPOINT_FIELD = {
    EventKind.CENSORED: "t_cen",
    EventKind.PROGRESSION: "t_pos",
    EventKind.TREATMENT: "t_trt",
}


@dataclass(frozen=True)
class SubjectRecord:
    """Observed data of one subject.

    Only the last negative biopsy (``t_last_neg``) and the observed
    endpoint are kept; exactly one of ``t_pos``, ``t_trt`` and ``t_cen`` is
    set, matching ``delta``.  ``psa`` holds ``(time, log2(PSA + 1))`` pairs.
    """

    id: str
    t_last_neg: float
    delta: EventKind
    t_pos: Optional[float] = None
    t_trt: Optional[float] = None
    t_cen: Optional[float] = None
    age: float = 62.0
    density: float = 0.1
    psa: tuple = field(default=(), repr=False)

    @property
    def endpoint(self) -> float:
        """Time at which follow-up for this subject ends."""
        value = getattr(self, _ENDPOINT_FIELD[EventKind(self.delta)])
        if value is None:
            raise MismatchedEndpoint(
                f"subject {self.id}: delta={int(self.delta)} but "
                f"{_ENDPOINT_FIELD[EventKind(self.delta)]} is missing",
                field=_ENDPOINT_FIELD[EventKind(self.delta)],
            )
        return value


def validate_record(record: SubjectRecord) -> SubjectRecord:
    """Return ``record`` unchanged if it is internally consistent.

    Raises :class:`MismatchedEndpoint`, :class:`NegativeTime` or
    :class:`NonMonotoneTimes`; the exception's ``field`` attribute names the
    offending attribute.
    """
    try:
        delta = EventKind(record.delta)
    except ValueError:
        raise MismatchedEndpoint(
            f"subject {record.id}: unknown event indicator {record.delta!r}",
            field="delta",
        ) from None

    expected = _ENDPOINT_FIELD[delta]
    for name in _ENDPOINT_FIELD.values():
        present = getattr(record, name) is not None
        if name == expected and not present:
            raise MismatchedEndpoint(
                f"subject {record.id}: delta={int(delta)} requires {name}", field=name
            )
        if name != expected and present:
            raise MismatchedEndpoint(
                f"subject {record.id}: {name} given but delta={int(delta)}", field=name
            )

    for name in ("t_last_neg", expected):
        value = getattr(record, name)
        if not math.isfinite(value):
            raise NegativeTime(f"subject {record.id}: {name} is not finite", field=name)
        if value < 0:
            raise NegativeTime(f"subject {record.id}: {name}={value} < 0", field=name)

    end = record.endpoint
    if not record.t_last_neg < end:
        raise NonMonotoneTimes(
            f"subject {record.id}: t_last_neg={record.t_last_neg} is not before "
            f"{expected}={end}",
            field="t_last_neg",
        )

    prev = -math.inf
    for time, _ in record.psa:
        if time <= prev:
            raise NonMonotoneTimes(
                f"subject {record.id}: PSA times not strictly increasing at {time}",
                field="psa",
            )
        if time > end:
            raise NonMonotoneTimes(
                f"subject {record.id}: PSA measured at {time} after endpoint {end}",
                field="psa",
            )
        prev = time
    return record


@dataclass(frozen=True)
class EvaluationWindow:
    t: float = 1.0
    dt: float = 3.0

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise InvalidWindow(f"window start must be >= 0, got {self.t}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidWindow(f"window length must be > 0, got {self.dt}")

    @property
    def end(self) -> float:
        return self.t + self.dt


class Scenario(str, enum.Enum):
    """Position of a subject's risk interval relative to the window.

    Groups: 1 starts before the window and ends inside it, 2 starts inside
    and ends after, 3 lies inside, 4 starts after, 5 spans the whole window.
    The letter is the observed endpoint: a progression, b treatment,
    c censoring.
    """

    S1A = "1a"
    S1B = "1b"
    S1C = "1c"
    S2A = "2a"
    S2B = "2b"
    S2C = "2c"
    S3A = "3a"
    S3B = "3b"
    S3C = "3c"
    S4A = "4a"
    S4B = "4b"
    S4C = "4c"
    S5A = "5a"
    S5B = "5b"
    S5C = "5c"
    EXCLUDED = "excluded"

    @property
    def group(self) -> int:
        return 0 if self is Scenario.EXCLUDED else int(self.value[0])

    @property
    def is_absolute_case(self) -> bool:
        return self is Scenario.S3A

    @property
    def is_absolute_control(self) -> bool:
        return self.group == 4


_LETTER = {EventKind.PROGRESSION: "a", EventKind.TREATMENT: "b", EventKind.CENSORED: "c"}


def classify_scenario(record: SubjectRecord, window: EvaluationWindow) -> Scenario:
    """Assign the scenario code of ``record`` for ``window``."""
    start, stop = window.t, window.end
    last_neg, end = record.t_last_neg, record.endpoint
    if end < start:
        return Scenario.EXCLUDED
    if last_neg < start:
        group = 1 if end < stop else 5
    elif last_neg < stop:
        group = 3 if end < stop else 2
    else:
        group = 4
    return Scenario(f"{group}{_LETTER[EventKind(record.delta)]}")


@dataclass(frozen=True)
class RiskSet:
    window: EvaluationWindow
    members: tuple

    @property
    def n_t(self) -> int:
        return len(self.members)

    @property
    def records(self) -> list:
        return [rec for rec, _ in self.members]

    @property
    def scenarios(self) -> list:
        return [sc for _, sc in self.members]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def build_risk_set(records: Iterable[SubjectRecord], window: EvaluationWindow) -> RiskSet:
    """Subjects still under follow-up at ``window.t``, with their scenarios."""
    members = []
    for rec in records:
        code = classify_scenario(rec, window)
        if code is not Scenario.EXCLUDED:
            members.append((rec, code))
    if not members:
        raise EmptyRiskSet(f"no subject under follow-up at t={window.t}")
    return RiskSet(window=window, members=tuple(members))

