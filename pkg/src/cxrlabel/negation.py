"""Syntactic negation and uncertainty rules over dependency graphs.

A rule names trigger word(s), a directed path of labeled dependency
edges, an endpoint kind and a scope. Matching a rule flips the polarity
of concept mentions from positive to negated or uncertain. Conjunct
propagation closes coordination structures first so one trigger can
reach every coordinated disease token.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Optional

from cxrlabel.errors import MissingGraph, RuleParseError, UnknownDirection
from cxrlabel.lexicon import ConceptMention
from cxrlabel.reports import DependencyGraph, Edge

# Small built-in inflection map standing in for a lemmatizer.
_INFLECTIONS = {
    "suggests": "suggest",
    "suggesting": "suggest",
    "suggested": "suggest",
    "suspects": "suspect",
    "suspected": "suspect",
    "suspecting": "suspect",
    "concerns": "concern",
    "concerning": "concern",
    "raises": "raise",
    "represents": "represent",
    "representing": "represent",
    "excludes": "exclude",
    "excluded": "exclude",
}


def lemma(lowered: str) -> str:
    return _INFLECTIONS.get(lowered, lowered)


class Direction(Enum):
    DOWN = "down"  # governor -> dependent
    UP = "up"  # dependent -> governor


class RulePolarity(Enum):
    NEGATION = "negation"
    UNCERTAINTY = "uncertainty"


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATED = "negated"
    UNCERTAIN = "uncertain"


class Scope(Enum):
    ENDPOINT = "endpoint"
    SUBTREE = "subtree"
    SENTENCE = "sentence"


@dataclass(frozen=True)
class EdgeStep:
    direction: Direction
    labels: Optional[frozenset[str]]  # None = any label
    node_lemmas: Optional[frozenset[str]] = None  # constraint on landing token

    def label_matches(self, label: str) -> bool:
        return self.labels is None or label in self.labels


@dataclass(frozen=True)
class Rule:
    rule_id: str
    polarity: RulePolarity
    triggers: tuple[tuple[str, ...], ...]  # phrases; empty = any token
    path: tuple[EdgeStep, ...]
    endpoint: str  # "DISEASE" | "ANY"
    scope: Scope

    def __post_init__(self):
        if self.endpoint == "DISEASE" and self.scope is not Scope.ENDPOINT:
            raise RuleParseError(
                f"rule {self.rule_id}: DISEASE endpoint requires endpoint scope"
            )
        if not self.path and not self.triggers:
            raise RuleParseError(
                f"rule {self.rule_id}: pathless rule needs explicit triggers"
            )


@dataclass(frozen=True)
class PolarizedMention:
    mention: ConceptMention
    polarity: Polarity
    matched_rule: Optional[str] = None

    def __post_init__(self):
        if self.polarity is not Polarity.POSITIVE and self.matched_rule is None:
            raise RuleParseError(
                f"{self.polarity.value} mention must name the matched rule"
            )


class RuleSet:
    def __init__(self, rules: Iterable[Rule]):
        self.rules = tuple(rules)
        # Negation rules take precedence over uncertainty rules.
        self.negation_rules = tuple(
            r for r in self.rules if r.polarity is RulePolarity.NEGATION
        )
        self.uncertainty_rules = tuple(
            r for r in self.rules if r.polarity is RulePolarity.UNCERTAINTY
        )

    def __len__(self) -> int:
        return len(self.rules)

    def without(self, rule_id: str) -> "RuleSet":
        return RuleSet(r for r in self.rules if r.rule_id != rule_id)


def _parse_step(token: str, line_no: int) -> EdgeStep:
    direction, sep, rest = token.partition(":")
    if not sep:
        raise RuleParseError(f"step {token!r} lacks ':'", line_no)
    try:
        parsed = Direction(direction)
    except ValueError:
        raise UnknownDirection(direction, line_no) from None
    label_part, _, lemma_part = rest.partition("@")
    if not label_part:
        raise RuleParseError(f"step {token!r} lacks a label", line_no)
    labels = None if label_part == "*" else frozenset(label_part.split("|"))
    node_lemmas = frozenset(lemma_part.split("|")) if lemma_part else None
    return EdgeStep(parsed, labels, node_lemmas)


def load_rules(path) -> RuleSet:
    """Load the rule DSL: one rule per line, tab-separated fields
    id, polarity, triggers ("|"-joined phrases, "*" = any token), path
    (space-joined "dir:label[@lemma]" steps, "-" = none), endpoint, scope.
    """
    rules: list[Rule] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise RuleParseError("rule needs 6 fields", line_no)
            rule_id, polarity, triggers, path, endpoint, scope = fields
            try:
                rule_polarity = RulePolarity(polarity)
            except ValueError:
                raise RuleParseError(
                    f"unknown polarity {polarity!r}", line_no
                ) from None
            if triggers == "*":
                trigger_phrases: tuple[tuple[str, ...], ...] = ()
            else:
                trigger_phrases = tuple(
                    tuple(phrase.split()) for phrase in triggers.lower().split("|")
                )
                if any(not phrase for phrase in trigger_phrases):
                    raise RuleParseError("empty trigger phrase", line_no)
            steps = (
                ()
                if path == "-"
                else tuple(_parse_step(tok, line_no) for tok in path.split())
            )
            if endpoint not in ("DISEASE", "ANY"):
                raise RuleParseError(f"unknown endpoint {endpoint!r}", line_no)
            try:
                rule_scope = Scope(scope)
            except ValueError:
                raise RuleParseError(f"unknown scope {scope!r}", line_no) from None
            try:
                rules.append(
                    Rule(rule_id, rule_polarity, trigger_phrases, steps,
                         endpoint, rule_scope)
                )
            except RuleParseError as err:
                raise RuleParseError(str(err), line_no) from None
    return RuleSet(rules)


def default_rules() -> RuleSet:
    with resources.as_file(
        resources.files("cxrlabel.data").joinpath("rules.tsv")
    ) as path:
        return load_rules(path)


def propagate_conjuncts(graph: DependencyGraph) -> DependencyGraph:
    """Fixpoint closure over coordination: (h -L-> a) and (a -conj_*-> b)
    imply (h -L-> b) for non-conj L. Original edges are retained."""
    edges = set(graph.edges)
    changed = True
    while changed:
        changed = False
        conj_by_head: dict[int, list[Edge]] = {}
        for edge in edges:
            if edge.label.startswith("conj"):
                conj_by_head.setdefault(edge.head, []).append(edge)
        for edge in list(edges):
            if edge.label.startswith("conj"):
                continue
            for conj in conj_by_head.get(edge.dependent, ()):
                new = Edge(edge.head, conj.dependent, edge.label)
                if new.head != new.dependent and new not in edges:
                    edges.add(new)
                    changed = True
    return graph.with_edges(edges)


def mention_head(graph: DependencyGraph, mention: ConceptMention) -> int:
    """The span token governing every other span token, else the last one."""
    span = list(range(mention.start, mention.end + 1))
    if len(span) == 1:
        return span[0]
    for candidate in span:
        rest = set(span) - {candidate}
        if rest <= graph.descendants(candidate):
            return candidate
    return span[-1]


def _word_matches(lowered: str, trigger_word: str) -> bool:
    return (
        lowered == trigger_word
        or lemma(lowered) == trigger_word
        or lemma(lowered) == lemma(trigger_word)
    )


def _trigger_positions(graph: DependencyGraph, rule: Rule) -> list[int]:
    lowered = [s.lower() for s in graph.surfaces]
    if not rule.triggers:
        return list(range(1, graph.n_tokens + 1))
    positions: list[int] = []
    for start in range(len(lowered)):
        for phrase in rule.triggers:
            if start + len(phrase) > len(lowered):
                continue
            if all(
                _word_matches(lowered[start + k], phrase[k])
                for k in range(len(phrase))
            ):
                positions.append(start + 1)
                break
    return positions


def _walk(graph: DependencyGraph, start: int, path: tuple[EdgeStep, ...]) -> set[int]:
    """Token positions reachable from `start` by following the path steps."""
    frontier = {start}
    for step in path:
        landed: set[int] = set()
        for node in frontier:
            if step.direction is Direction.DOWN:
                for edge in graph.out_edges(node):
                    if step.label_matches(edge.label):
                        landed.add(edge.dependent)
            else:
                for edge in graph.in_edges(node):
                    if step.label_matches(edge.label) and edge.head != 0:
                        landed.add(edge.head)
        if step.node_lemmas is not None:
            landed = {
                node
                for node in landed
                if lemma(graph.surfaces[node - 1].lower()) in step.node_lemmas
                or graph.surfaces[node - 1].lower() in step.node_lemmas
            }
        frontier = landed
        if not frontier:
            break
    return frontier


def _rule_fires(
    graph: DependencyGraph, rule: Rule, head: int, landings: set[int]
) -> bool:
    if rule.scope is Scope.SENTENCE:
        return True
    if rule.scope is Scope.ENDPOINT:
        return head in landings
    # Subtree scope covers the landing token itself and its descendants.
    for landing in landings:
        if head == landing or head in graph.descendants(landing):
            return True
    return False


def apply_rules(
    graph: DependencyGraph,
    mentions: Iterable[ConceptMention],
    ruleset: RuleSet,
) -> list[PolarizedMention]:
    """Polarize mentions; negation beats uncertainty beats positive."""
    mentions = list(mentions)
    for mention in mentions:
        if mention.sentence_ref != graph.sentence_ref:
            raise MissingGraph(mention.sentence_ref)

    # Landing sets per rule are mention-independent, so compute them once.
    landings: dict[str, set[int]] = {}
    fired_sentence: dict[str, bool] = {}
    for rule in ruleset.rules:
        positions = _trigger_positions(graph, rule)
        fired_sentence[rule.rule_id] = bool(positions)
        landed: set[int] = set()
        if rule.path:
            for position in positions:
                landed |= _walk(graph, position, rule.path)
        landings[rule.rule_id] = landed

    result: list[PolarizedMention] = []
    for mention in mentions:
        head = mention_head(graph, mention)
        polarity = Polarity.POSITIVE
        matched: Optional[str] = None
        for rule in ruleset.negation_rules + ruleset.uncertainty_rules:
            if rule.scope is Scope.SENTENCE:
                fired = fired_sentence[rule.rule_id]
            else:
                fired = _rule_fires(graph, rule, head, landings[rule.rule_id])
            if fired:
                matched = rule.rule_id
                polarity = (
                    Polarity.NEGATED
                    if rule.polarity is RulePolarity.NEGATION
                    else Polarity.UNCERTAIN
                )
                break
        result.append(PolarizedMention(mention, polarity, matched))
    return result
