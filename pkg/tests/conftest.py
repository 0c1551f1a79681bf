"""Shared fixture helpers: sentences, graphs, rule example sentences."""

from __future__ import annotations

from cxrlabel.reports import (
    DependencyGraph,
    Edge,
    RadiologyReport,
    Sentence,
    split_sentences,
)


def make_sentence(
    text: str,
    report_id: str = "r1",
    section: str = "findings",
    index: int = 0,
) -> Sentence:
    report = RadiologyReport(report_id, "p1", {section: text})
    sentences = split_sentences(report)
    return sentences[index]


def make_graph(sentence: Sentence, edges) -> DependencyGraph:
    return DependencyGraph(
        sentence_ref=sentence.ref,
        n_tokens=len(sentence),
        surfaces=tuple(t.surface for t in sentence.tokens),
        edges=tuple(sorted({Edge(*e) for e in edges})),
    )


# The supplementary rule examples: sentence text, hand-built dependency
# edges in a collapsed/propagated style, the concept phrase the rule is
# about, and the polarity the table assigns to it.
RULE_EXAMPLES = [
    (
        "n1",
        "No acute pulmonary disease",
        [(4, 1, "neg"), (4, 2, "amod"), (4, 3, "nn")],
        "pulmonary disease",
        "negated",
    ),
    (
        "n2",
        "changes without focal airspace disease",
        [(1, 5, "prep_without"), (5, 3, "amod"), (5, 4, "nn")],
        "focal airspace disease",
        "negated",
    ),
    (
        "n3",
        "clear of focal airspace disease, pneumothorax, or pleural effusion",
        [
            (1, 5, "prep_of"),
            (5, 3, "amod"),
            (5, 4, "nn"),
            (5, 7, "conj_or"),
            (5, 11, "conj_or"),
            (11, 10, "amod"),
            # conjunct propagation applied:
            (1, 7, "prep_of"),
            (1, 11, "prep_of"),
        ],
        "pneumothorax",
        "negated",
    ),
    (
        "n4",
        "Changes without evidence of acute infiltrate",
        [(1, 3, "prep_without"), (3, 6, "prep_of"), (6, 5, "amod")],
        "infiltrate",
        "negated",
    ),
    (
        "n5",
        "No evidence of active disease",
        [(2, 1, "neg"), (2, 5, "prep_of"), (5, 4, "amod")],
        "disease",
        "negated",
    ),
    (
        "u1",
        "The aorta is tortuous, and cannot exclude ascending aortic aneurysm",
        [
            (4, 2, "nsubj"),
            (2, 1, "det"),
            (4, 3, "cop"),
            (4, 8, "conj_and"),
            (8, 7, "md"),
            (8, 11, "dobj"),
            (11, 9, "amod"),
            (11, 10, "amod"),
        ],
        "aortic aneurysm",
        "uncertain",
    ),
    (
        "u2",
        "There is raises concern for pneumonia",
        [(3, 1, "expl"), (3, 4, "dobj"), (4, 6, "prep_for")],
        "pneumonia",
        "uncertain",
    ),
    (
        "u3",
        "which could be due to nodule/lymph node",
        [],
        "nodule",
        "uncertain",
    ),
    (
        "u4",
        "interstitial infiltrates difficult to exclude",
        [(2, 1, "amod"), (2, 3, "partmod"), (3, 5, "prep_to"), (5, 2, "dobj")],
        "infiltrates",
        "uncertain",
    ),
    (
        "u5",
        "which may represent pleural reaction or small pulmonary nodules",
        [
            (3, 1, "nsubj"),
            (3, 2, "md"),
            (3, 5, "dobj"),
            (5, 4, "amod"),
            (5, 9, "conj_or"),
            (9, 7, "amod"),
            (9, 8, "nn"),
        ],
        "nodules",
        "uncertain",
    ),
    (
        "u6",
        "Bilateral pulmonary nodules suggesting pulmonary metastases",
        [
            (3, 1, "amod"),
            (3, 2, "nn"),
            (3, 4, "partmod"),
            (4, 6, "dobj"),
            (6, 5, "amod"),
        ],
        "pulmonary metastases",
        "uncertain",
    ),
]


def mention_phrase(sentence: Sentence, mention) -> str:
    return " ".join(
        sentence.tokens[i - 1].lowered for i in range(mention.start, mention.end + 1)
    )
