"""Enrollment-level stratified splitting and the split/context audits.

Strata combine event status with a coarse event-time bucket: event
enrollments are bucketed by observed time into quartiles computed on the full
cohort, censored enrollments form a single stratum. The audit reports
identity leakage and the overlap of curricular context (modules,
presentations, module-presentation combinations) between partitions.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .cohort import ENROLLMENT_KEY
from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class SplitSpec:
    test_fraction: float = 0.30
    seed: int = 0
    n_time_buckets: int = 4

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must lie in (0, 1)")


@dataclass
class SplitAudit:
    n_total: int
    n_train: int
    n_test: int
    train_event_rate: float
    test_event_rate: float
    identity_leakage: bool
    shared_modules: tuple
    shared_presentations: tuple
    shared_combinations: tuple
    stratification: str = "event status + coarse event-time bucket"

    def to_dict(self):
        return {
            "split_unit": "enrollment",
            "stratification": self.stratification,
            "total": self.n_total,
            "train": self.n_train,
            "test": self.n_test,
            "train_event_rate": round(self.train_event_rate, 6),
            "test_event_rate": round(self.test_event_rate, 6),
            "identity_leakage": self.identity_leakage,
            "shared_modules": list(self.shared_modules),
            "shared_presentations": list(self.shared_presentations),
            "shared_module_presentations": list(self.shared_combinations),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self):
        d = self.to_dict()
        lines = [
            f"{'split unit':<22}{d['split_unit']}",
            f"{'stratification':<22}{d['stratification']}",
            f"{'total':<22}{d['total']}",
            f"{'train':<22}{d['train']}",
            f"{'test':<22}{d['test']}",
            f"{'train event rate':<22}{d['train_event_rate']:.4f}",
            f"{'test event rate':<22}{d['test_event_rate']:.4f}",
            "",
            f"{'identity leakage':<22}{'yes' if d['identity_leakage'] else 'no'}",
            f"{'shared modules':<22}{d['shared_modules'][0]}/{d['shared_modules'][1]}",
            f"{'shared presentations':<22}{d['shared_presentations'][0]}/{d['shared_presentations'][1]}",
            f"{'shared module-pres.':<22}{d['shared_module_presentations'][0]}/{d['shared_module_presentations'][1]}",
        ]
        return "\n".join(lines)


def _strata(enrollments, n_time_buckets):
    """Stratum label per row: censored pooled, events bucketed by time."""
    times = enrollments["observed_time_weeks"].to_numpy(dtype=float)
    events = enrollments["event"].to_numpy(dtype=int)
    labels = np.full(len(enrollments), "censored", dtype=object)
    if events.sum() > 0 and n_time_buckets > 1:
        qs = np.quantile(times[events == 1],
                         np.linspace(0, 1, n_time_buckets + 1)[1:-1])
        bucket = np.searchsorted(qs, times, side="left")
        labels[events == 1] = np.char.add("event_q", bucket[events == 1].astype(str))
    else:
        labels[events == 1] = "event"
    return labels


def stratified_split(enrollments, spec):
    """Split enrollment ids into disjoint train/test sets.

    Deterministic under ``spec.seed``; within each stratum the test share is
    within one enrollment of ``spec.test_fraction``. Singleton strata go to
    train with a warning.
    """
    if len(enrollments) == 0:
        raise DataError("cannot split an empty cohort")
    rng = np.random.default_rng(spec.seed)
    labels = _strata(enrollments, spec.n_time_buckets)
    ids = enrollments[ENROLLMENT_KEY].to_numpy()

    train_ids, test_ids = [], []
    for stratum in sorted(set(labels)):
        members = np.sort(ids[labels == stratum])
        if members.size == 1:
            logger.warning("stratum '%s' has a single enrollment; assigned to train", stratum)
            train_ids.append(members)
            continue
        perm = rng.permutation(members.size)
        n_test = int(np.floor(spec.test_fraction * members.size + 0.5))
        test_ids.append(members[perm[:n_test]])
        train_ids.append(members[perm[n_test:]])

    train = np.sort(np.concatenate(train_ids)) if train_ids else np.array([], dtype=object)
    test = np.sort(np.concatenate(test_ids)) if test_ids else np.array([], dtype=object)
    return train, test


def _shared(enrollments, train_mask, test_mask, cols):
    combos = enrollments[cols].astype(str).agg("|".join, axis=1)
    all_ctx = set(combos)
    both = set(combos[train_mask]) & set(combos[test_mask])
    return (len(both), len(all_ctx))


def audit_split(enrollments, train_ids, test_ids):
    """Audit a partition: leakage flag, event rates, shared-context counts."""
    train_set, test_set = set(train_ids), set(test_ids)
    leakage = bool(train_set & test_set)
    ids = enrollments[ENROLLMENT_KEY]
    train_mask = ids.isin(train_set).to_numpy()
    test_mask = ids.isin(test_set).to_numpy()
    events = enrollments["event"].to_numpy(dtype=float)

    return SplitAudit(
        n_total=len(enrollments),
        n_train=int(train_mask.sum()),
        n_test=int(test_mask.sum()),
        train_event_rate=float(events[train_mask].mean()) if train_mask.any() else 0.0,
        test_event_rate=float(events[test_mask].mean()) if test_mask.any() else 0.0,
        identity_leakage=leakage,
        shared_modules=_shared(enrollments, train_mask, test_mask, ["module_id"]),
        shared_presentations=_shared(enrollments, train_mask, test_mask, ["presentation_id"]),
        shared_combinations=_shared(enrollments, train_mask, test_mask,
                                    ["module_id", "presentation_id"]),
    )
