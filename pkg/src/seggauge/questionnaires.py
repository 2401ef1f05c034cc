"""SUS and AttrakDiff-2 scoring, adjective mapping, and portfolio placement."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

# The ten standard SUS statements in presentation order. Odd-numbered
# statements (1-indexed) are positively worded and score as given; even ones
# are negatively worded and score inverted.
SUS_STATEMENTS = (
    "I think that I would like to use this system frequently.",
    "I found the system unnecessarily complex.",
    "I thought the system was easy to use.",
    "I think that I would need the support of a technical person to be able to use this system.",
    "I found the various functions in this system were well integrated.",
    "I thought there was too much inconsistency in this system.",
    "I would imagine that most people would learn to use this system very quickly.",
    "I found the system very cumbersome to use.",
    "I felt very confident using the system.",
    "I needed to learn a lot of things before I could get going with this system.",
)

SUS_ADJECTIVES = (
    "worst imaginable",
    "awful",
    "poor",
    "OK",
    "good",
    "excellent",
    "best imaginable",
)

# Upper score bound per adjective. The published mapping is a set of
# overlapping response distributions; these cutoffs reproduce its anchor
# points (67 -> good, 82 and 88 -> excellent).
DEFAULT_ADJECTIVE_BOUNDS = (16.0, 29.0, 44.0, 62.0, 78.0, 93.0, 100.0)

ATTRAKDIFF_GROUPS = ("PQ", "ATT", "HQ-I", "HQ-S")

# Word pairs per quality group, canonical orientation (negative, positive).
ATTRAKDIFF_PAIRS: dict[str, tuple[tuple[str, str], ...]] = {
    "PQ": (
        ("complicated", "simple"),
        ("confusing", "clearly structured"),
        ("cumbersome", "straightforward"),
        ("impractical", "practical"),
        ("technical", "human"),
        ("unpredictable", "predictable"),
        ("unruly", "manageable"),
    ),
    "ATT": (
        ("bad", "good"),
        ("disagreeable", "likeable"),
        ("discouraging", "motivating"),
        ("rejecting", "inviting"),
        ("repelling", "appealing"),
        ("ugly", "attractive"),
        ("unpleasant", "pleasant"),
    ),
    "HQ-I": (
        ("alienating", "integrating"),
        ("cheap", "premium"),
        ("isolating", "connective"),
        ("separates me from people", "brings me closer to people"),
        ("tacky", "stylish"),
        ("unpresentable", "presentable"),
        ("unprofessional", "professional"),
    ),
    "HQ-S": (
        ("cautious", "bold"),
        ("conservative", "innovative"),
        ("conventional", "inventive"),
        ("dull", "captivating"),
        ("ordinary", "novel"),
        ("undemanding", "challenging"),
        ("unimaginative", "creative"),
    ),
}

_GROUP_KEYS = {"PQ": "pq", "ATT": "att", "HQ-I": "hqi", "HQ-S": "hqs"}

# Two-sided 95% normal quantile as used for the confidence rectangles.
CONFIDENCE_Z = 1.95996

PORTFOLIO_FIELDS: dict[str, tuple[tuple[float, float], tuple[float, float]]] = {
    "superfluous": ((1.0, 3.0), (1.0, 3.0)),
    "too self-oriented": ((1.0, 3.0), (5.0, 7.0)),
    "neutral": ((3.0, 5.0), (3.0, 5.0)),
    "self-oriented": ((3.0, 5.0), (5.0, 7.0)),
    "too task-oriented": ((5.0, 7.0), (1.0, 3.0)),
    "task-oriented": ((5.0, 7.0), (3.0, 5.0)),
    "desired": ((5.0, 7.0), (5.0, 7.0)),
}


def canonical_item_ids() -> list[str]:
    ids = [f"sus_{i}" for i in range(1, 11)]
    for group in ATTRAKDIFF_GROUPS:
        key = _GROUP_KEYS[group]
        ids.extend(f"{key}_{i}" for i in range(1, 8))
    return ids


def _validate_sus(responses) -> np.ndarray:
    x = np.asarray(responses)
    if x.ndim != 2 or x.shape[1] != 10:
        raise InputError(f"SUS responses must be (subjects, 10), got {x.shape}")
    if x.shape[0] == 0:
        raise InputError("SUS responses contain no subjects")
    if not np.issubdtype(x.dtype, np.integer):
        if not np.all(np.equal(np.mod(x, 1), 0)):
            raise InputError("SUS responses must be integers")
        x = x.astype(np.int64)
    if x.min() < 0 or x.max() > 4:
        raise InputError("SUS responses must lie in 0..4")
    return x


def sus_score(responses) -> float:
    """Composite usability score in [0, 100] from a (subjects x 10) matrix."""

    x = _validate_sus(responses)
    odd = x[:, 0::2].sum()
    even = (4 - x[:, 1::2]).sum()
    return 2.5 * float(odd + even) / x.shape[0]


def sus_adjective(score: float, bounds=DEFAULT_ADJECTIVE_BOUNDS) -> str:
    """Map a SUS score to its adjective rating."""

    if not 0.0 <= score <= 100.0:
        raise InputError(f"SUS score {score} outside [0, 100]")
    for bound, adjective in zip(bounds, SUS_ADJECTIVES):
        if score <= bound:
            return adjective
    return SUS_ADJECTIVES[-1]


def _validate_group(responses, group: str) -> np.ndarray:
    if group not in ATTRAKDIFF_GROUPS:
        raise InputError(f"unknown AttrakDiff group {group!r}")
    if isinstance(responses, dict):
        responses = responses[group]
    x = np.asarray(responses)
    if x.ndim != 2 or x.shape[1] != 7:
        raise InputError(f"AttrakDiff group matrix must be (subjects, 7), got {x.shape}")
    if x.shape[0] == 0:
        raise InputError("AttrakDiff responses contain no subjects")
    if x.min() < 1 or x.max() > 7:
        raise InputError("AttrakDiff responses must lie in 1..7")
    return x.astype(np.float64)


def attrakdiff_score(responses, group: str) -> float:
    """Mean group score in [1, 7] over all subjects and items."""

    x = _validate_group(responses, group)
    return float(x.mean())


def attrakdiff_confidence(responses, group: str) -> tuple[float, float]:
    """(mean, half-width) of the 95% confidence interval for one group.

    The spread is taken over the flattened subject x item values. With a
    single subject the half-width is undefined and reported as NaN.
    """

    x = _validate_group(responses, group)
    mean = float(x.mean())
    if x.shape[0] < 2:
        return mean, float("nan")
    std = float(x.std(ddof=0))
    half = CONFIDENCE_Z * std / np.sqrt(x.size)
    return mean, float(half)


def hq_confidence(responses) -> tuple[float, float]:
    """Combined hedonic quality (identity + stimulus pooled) mean and CI half-width."""

    hqi = _validate_group(responses, "HQ-I")
    hqs = _validate_group(responses, "HQ-S")
    pooled = np.concatenate([hqi.ravel(), hqs.ravel()])
    mean = float(pooled.mean())
    if hqi.shape[0] < 2:
        return mean, float("nan")
    half = CONFIDENCE_Z * float(pooled.std(ddof=0)) / np.sqrt(pooled.size)
    return mean, float(half)


@dataclass(frozen=True)
class PortfolioPoint:
    pq_mean: float
    pq_ci: float
    hq_mean: float
    hq_ci: float
    region: str
    touched_fields: tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "pq_mean": self.pq_mean,
            "pq_ci": self.pq_ci,
            "hq_mean": self.hq_mean,
            "hq_ci": self.hq_ci,
            "region": self.region,
            "touched_fields": list(self.touched_fields),
        }


def _overlap_1d(lo1: float, hi1: float, lo2: float, hi2: float) -> float:
    return min(hi1, hi2) - max(lo1, lo2)


def portfolio(pq: tuple[float, float], hq: tuple[float, float]) -> PortfolioPoint:
    """Place a confidence rectangle on the pragmatic/hedonic quality plane.

    The plane splits into a 3x3 grid with boundaries at 1, 3, 5 and 7;
    seven of the nine cells carry names. The region is a field name when
    the rectangle lies entirely inside that field, otherwise "overlapping"
    together with every named field the rectangle covers with positive area.
    """

    pq_mean, pq_ci = pq
    hq_mean, hq_ci = hq
    if not (1.0 <= pq_mean <= 7.0 and 1.0 <= hq_mean <= 7.0):
        raise InputError("portfolio means must lie in [1, 7]")
    pq_lo, pq_hi = pq_mean - pq_ci, pq_mean + pq_ci
    hq_lo, hq_hi = hq_mean - hq_ci, hq_mean + hq_ci

    inside = []
    touched = []
    for name, ((fx_lo, fx_hi), (fy_lo, fy_hi)) in PORTFOLIO_FIELDS.items():
        if fx_lo <= pq_lo and pq_hi <= fx_hi and fy_lo <= hq_lo and hq_hi <= fy_hi:
            inside.append(name)
        if _overlap_1d(pq_lo, pq_hi, fx_lo, fx_hi) > 0 and _overlap_1d(hq_lo, hq_hi, fy_lo, fy_hi) > 0:
            touched.append(name)
    if inside:
        region = inside[0]
    else:
        region = "overlapping"
    return PortfolioPoint(pq_mean, pq_ci, hq_mean, hq_ci, region, tuple(touched))


def projections_overlap(mean_a: float, ci_a: float, mean_b: float, ci_b: float) -> bool:
    """True when two confidence intervals overlap on one axis.

    Overlapping projections mean the difference between the two systems on
    that axis is not significant.
    """

    return abs(mean_a - mean_b) < ci_a + ci_b


def presentation_order(seed: int) -> list[dict]:
    """Randomized AttrakDiff presentation: pair order and pole order.

    Returns one entry per presented pair with its canonical item id and
    whether the poles are flipped. Scoring always happens in canonical
    orientation; the seed is recorded with submissions so the presentation
    can be reproduced.
    """

    rng = np.random.default_rng(seed)
    items = []
    for group in ATTRAKDIFF_GROUPS:
        key = _GROUP_KEYS[group]
        for i, (neg, pos) in enumerate(ATTRAKDIFF_PAIRS[group], start=1):
            items.append({"item_id": f"{key}_{i}", "negative": neg, "positive": pos})
    order = rng.permutation(len(items))
    flips = rng.integers(0, 2, size=len(items))
    presented = []
    for idx, flip in zip(order, flips):
        entry = dict(items[int(idx)])
        entry["flipped"] = bool(flip)
        presented.append(entry)
    return presented


def canonicalize_answer(value: int, flipped: bool) -> int:
    """Map a 1..7 answer given on a possibly flipped scale back to canonical orientation."""

    if not 1 <= value <= 7:
        raise InputError(f"AttrakDiff answer {value} outside 1..7")
    return 8 - value if flipped else value


def parse_response_csv(path: str | Path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Read a subject-per-row questionnaire CSV in canonical column order.

    Expected columns: sus_1..sus_10, pq_1..pq_7, att_1..att_7,
    hqi_1..hqi_7, hqs_1..hqs_7. Extra columns are ignored.
    """

    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise InputError(f"no subjects in {path}")
    required = canonical_item_ids()
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise InputError(f"missing questionnaire columns: {missing[:5]}")

    def column_block(prefix: str, count: int) -> np.ndarray:
        out = np.empty((len(rows), count), dtype=np.int64)
        for r, row in enumerate(rows):
            for i in range(count):
                out[r, i] = int(row[f"{prefix}_{i + 1}"])
        return out

    sus = column_block("sus", 10)
    groups = {g: column_block(_GROUP_KEYS[g], 7) for g in ATTRAKDIFF_GROUPS}
    return sus, groups


def score_summary(sus, attrakdiff) -> dict:
    """Full scoring report: SUS, adjective, group scores and CIs, portfolio."""

    sus_value = sus_score(sus)
    group_scores = {}
    for group in ATTRAKDIFF_GROUPS:
        mean, half = attrakdiff_confidence(attrakdiff, group)
        group_scores[group] = {"score": mean, "ci": half}
    pq = (group_scores["PQ"]["score"], group_scores["PQ"]["ci"])
    hq = hq_confidence(attrakdiff)
    point = portfolio(pq, hq)
    return {
        "sus": {"score": sus_value, "adjective": sus_adjective(sus_value)},
        "attrakdiff": group_scores,
        "hq": {"score": hq[0], "ci": hq[1]},
        "portfolio": point.as_dict(),
    }
