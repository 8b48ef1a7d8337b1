"""Apriori mining of cross-topic association rules over paper cluster sets.

Each clustered paper becomes one transaction (its set of cluster ids);
level-wise Apriori finds frequent itemsets, and rules are scored by support,
confidence, and lift, filtered on configurable thresholds.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .clustering import paper_clusters
from .corpus import PaperRecord

DEFAULT_MIN_SUPPORT = 0.05
DEFAULT_MIN_CONFIDENCE = 0.5
DEFAULT_MIN_LIFT = 1.5
DEFAULT_MAX_LEN = 3

CSV_COLUMNS = [
    "antecedents",
    "consequents",
    "antecedent support",
    "consequent support",
    "support",
    "confidence",
    "lift",
]


@dataclass(frozen=True)
class Transaction:
    paper_id: str
    items: frozenset[int]


@dataclass
class RuleFilter:
    min_support: float = DEFAULT_MIN_SUPPORT
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    min_lift: float = DEFAULT_MIN_LIFT
    max_len: int = DEFAULT_MAX_LEN

    def validate(self) -> None:
        if min(self.min_support, self.min_confidence, self.min_lift) < 0:
            raise ValueError("thresholds must be >= 0")
        if self.max_len < 2:
            raise ValueError("max_len must be >= 2")


@dataclass(frozen=True)
class AssociationRule:
    lhs: frozenset[int]
    rhs: frozenset[int]
    antecedent_support: float
    consequent_support: float
    support: float
    confidence: float
    lift: float


def build_transactions(
    papers: Iterable[PaperRecord],
    assignments: Mapping[str, int],
) -> tuple[list[Transaction], int]:
    """One transaction per paper with a nonempty cluster set; rest counted."""
    transactions: list[Transaction] = []
    excluded = 0
    for paper in papers:
        items = paper_clusters(paper, assignments)
        if items:
            transactions.append(Transaction(paper.identifier, frozenset(items)))
        else:
            excluded += 1
    return transactions, excluded


def _support_counts(
    candidates: Sequence[frozenset[int]],
    masks: Sequence[int],
    bit_of: Mapping[int, int],
) -> dict[frozenset[int], int]:
    counts: dict[frozenset[int], int] = {}
    for itemset in candidates:
        mask = 0
        for item in itemset:
            mask |= 1 << bit_of[item]
        count = sum(1 for t in masks if t & mask == mask)
        if count:
            counts[itemset] = count
    return counts


def frequent_itemsets(
    transactions: Sequence[Transaction],
    min_support: float,
    max_len: int = DEFAULT_MAX_LEN,
) -> list[tuple[frozenset[int], float]]:
    """Level-wise Apriori: all itemsets up to ``max_len`` with enough support."""
    if not transactions:
        raise ValueError("no transactions")
    if min_support <= 0:
        raise ValueError("min_support must be positive")
    n = len(transactions)

    items = sorted({item for t in transactions for item in t.items})
    bit_of = {item: position for position, item in enumerate(items)}
    masks = []
    for t in transactions:
        mask = 0
        for item in t.items:
            mask |= 1 << bit_of[item]
        masks.append(mask)

    frequent: dict[frozenset[int], float] = {}
    level = [frozenset([item]) for item in items]
    size = 1
    while level and size <= max_len:
        counts = _support_counts(level, masks, bit_of)
        current = {s: c / n for s, c in counts.items() if c / n >= min_support}
        frequent.update(current)
        # Join step: merge sets sharing a (size-1)-prefix, prune non-frequent subsets.
        sorted_sets = sorted(current, key=lambda s: tuple(sorted(s)))
        next_level = []
        seen: set[frozenset[int]] = set()
        for a, b in combinations(sorted_sets, 2):
            union = a | b
            if len(union) != size + 1 or union in seen:
                continue
            if all(union - {item} in current for item in union):
                seen.add(union)
                next_level.append(union)
        level = next_level
        size += 1

    return sorted(frequent.items(), key=lambda kv: (len(kv[0]), tuple(sorted(kv[0]))))


def metrics_from_supports(
    antecedent_support: float,
    consequent_support: float,
    support: float,
) -> tuple[float, float]:
    """Confidence and lift from the three supports (the defining identities)."""
    if antecedent_support == 0 or consequent_support == 0:
        raise ValueError("undefined metric: zero antecedent or consequent support")
    confidence = support / antecedent_support
    lift = confidence / consequent_support
    return confidence, lift


def rule_metrics(
    lhs: Iterable[int],
    rhs: Iterable[int],
    transactions: Sequence[Transaction],
) -> AssociationRule:
    """Count-based metrics for an arbitrary (lhs, rhs) pair of cluster sets."""
    lhs = frozenset(lhs)
    rhs = frozenset(rhs)
    if not lhs or not rhs:
        raise ValueError("lhs and rhs must be nonempty")
    if lhs & rhs:
        raise ValueError("lhs and rhs must be disjoint")
    if not transactions:
        raise ValueError("no transactions")
    n = len(transactions)
    both = lhs | rhs
    ante = sum(1 for t in transactions if lhs <= t.items) / n
    cons = sum(1 for t in transactions if rhs <= t.items) / n
    joint = sum(1 for t in transactions if both <= t.items) / n
    confidence, lift = metrics_from_supports(ante, cons, joint)
    return AssociationRule(lhs, rhs, ante, cons, joint, confidence, lift)


def generate_rules(
    itemsets: Sequence[tuple[frozenset[int], float]],
    transactions: Sequence[Transaction],
    rule_filter: RuleFilter | None = None,
    singleton_rhs: bool = True,
) -> list[AssociationRule]:
    """Rules from frequent itemsets passing every threshold.

    By default only single-cluster consequents are emitted; pass
    ``singleton_rhs=False`` for every nonempty proper partition.  Output is
    sorted by lift, then support, then antecedent ids.
    """
    rule_filter = rule_filter or RuleFilter()
    rule_filter.validate()
    support_of = dict(itemsets)
    rules: list[AssociationRule] = []
    for itemset, joint in support_of.items():
        if len(itemset) < 2 or len(itemset) > rule_filter.max_len:
            continue
        if joint < rule_filter.min_support:
            continue
        if singleton_rhs:
            splits = [(itemset - {item}, frozenset([item])) for item in sorted(itemset)]
        else:
            splits = []
            for size in range(1, len(itemset)):
                for rhs_combo in combinations(sorted(itemset), size):
                    rhs = frozenset(rhs_combo)
                    splits.append((itemset - rhs, rhs))
        for lhs, rhs in splits:
            ante = support_of.get(lhs)
            cons = support_of.get(rhs)
            if ante is None or cons is None:
                # Downward closure guarantees both subsets are frequent.
                continue
            confidence, lift = metrics_from_supports(ante, cons, joint)
            if confidence >= rule_filter.min_confidence and lift >= rule_filter.min_lift:
                rules.append(AssociationRule(lhs, rhs, ante, cons, joint, confidence, lift))
    rules.sort(key=lambda r: (-r.lift, -r.support, tuple(sorted(r.lhs)), tuple(sorted(r.rhs))))
    return rules


def _format_clusters(ids: frozenset[int]) -> str:
    return ", ".join(f"C{i}" for i in sorted(ids))


def rules_to_records(rules: Sequence[AssociationRule]) -> list[dict[str, object]]:
    """Table-shaped records with the exact export column names as keys."""
    records = []
    for rule in rules:
        records.append({
            "antecedents": _format_clusters(rule.lhs),
            "consequents": _format_clusters(rule.rhs),
            "antecedent support": rule.antecedent_support,
            "consequent support": rule.consequent_support,
            "support": rule.support,
            "confidence": rule.confidence,
            "lift": rule.lift,
        })
    return records


def rules_to_csv(rules: Sequence[AssociationRule]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in rules_to_records(rules):
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in record.items()})
    return buf.getvalue()


def rules_to_json(rules: Sequence[AssociationRule]) -> str:
    payload = []
    for rule in rules:
        payload.append({
            "lhs": sorted(rule.lhs),
            "rhs": sorted(rule.rhs),
            "antecedent_support": rule.antecedent_support,
            "consequent_support": rule.consequent_support,
            "support": rule.support,
            "confidence": rule.confidence,
            "lift": rule.lift,
        })
    return json.dumps(payload, sort_keys=True, indent=0)


def rules_from_json(text: str) -> list[AssociationRule]:
    rules = []
    for item in json.loads(text):
        rules.append(AssociationRule(
            lhs=frozenset(int(i) for i in item["lhs"]),
            rhs=frozenset(int(i) for i in item["rhs"]),
            antecedent_support=float(item["antecedent_support"]),
            consequent_support=float(item["consequent_support"]),
            support=float(item["support"]),
            confidence=float(item["confidence"]),
            lift=float(item["lift"]),
        ))
    return rules
