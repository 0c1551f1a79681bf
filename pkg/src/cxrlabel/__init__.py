"""Mine disease labels from chest X-ray reports and score weak localization."""

from cxrlabel.errors import CxrLabelError
from cxrlabel.labeling import (
    CONFIG_X8,
    CONFIG_X14,
    LabelConfig,
    ReportLabels,
    Status,
    get_config,
    label_corpus,
    label_report,
)
from cxrlabel.lexicon import (
    ConceptMention,
    Lexicon,
    default_lexicon,
    load_lexicon,
    match_concepts,
    merge_mention_sets,
)
from cxrlabel.localization import (
    BBox,
    Heatmap,
    boxes_from_heatmap,
    connected_regions,
    iobb,
    iou,
    normalize_heatmap,
)
from cxrlabel.metrics import localization_eval, prf1, roc_auc
from cxrlabel.negation import (
    Polarity,
    PolarizedMention,
    Rule,
    RuleSet,
    apply_rules,
    default_rules,
    load_rules,
    mention_head,
    propagate_conjuncts,
)
from cxrlabel.pooling import (
    avg_pool,
    cel,
    compose_heatmaps,
    el,
    hl,
    lse_pool,
    max_pool,
    wcel,
    wcel_gradient,
)
from cxrlabel.reports import (
    Corpus,
    DependencyGraph,
    RadiologyReport,
    Sentence,
    SentenceRef,
    load_corpus,
    load_dependency_file,
    parse_report_text,
    split_sentences,
)
from cxrlabel.stats import cooccurrence_matrix, label_counts, patient_split

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CONFIG_X14",
    "CONFIG_X8",
    "ConceptMention",
    "Corpus",
    "CxrLabelError",
    "DependencyGraph",
    "Heatmap",
    "LabelConfig",
    "Lexicon",
    "Polarity",
    "PolarizedMention",
    "RadiologyReport",
    "ReportLabels",
    "Rule",
    "RuleSet",
    "Sentence",
    "SentenceRef",
    "Status",
    "apply_rules",
    "avg_pool",
    "boxes_from_heatmap",
    "cel",
    "compose_heatmaps",
    "connected_regions",
    "cooccurrence_matrix",
    "default_lexicon",
    "default_rules",
    "el",
    "get_config",
    "hl",
    "iobb",
    "iou",
    "label_corpus",
    "label_counts",
    "label_report",
    "load_corpus",
    "load_dependency_file",
    "load_lexicon",
    "load_rules",
    "localization_eval",
    "lse_pool",
    "match_concepts",
    "max_pool",
    "mention_head",
    "merge_mention_sets",
    "normalize_heatmap",
    "parse_report_text",
    "patient_split",
    "prf1",
    "propagate_conjuncts",
    "roc_auc",
    "split_sentences",
    "wcel",
    "wcel_gradient",
    "__version__",
]
