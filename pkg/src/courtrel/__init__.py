"""Discourse relation classification for sentence pairs in court case transcripts.

Sentence pairs are labelled Elaboration, Redundancy, Citation, Shift in View or
No Relation by a rule-based citation gate followed by a linear one-vs-rest SVM
over sixteen hand-crafted pair features.
"""

from courtrel.corpus import (
    AnnotatedSentence,
    CstRelation,
    JudgeAnnotation,
    RelationLabel,
    SentencePair,
    Token,
    map_cst_to_relation,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "CstRelation",
    "JudgeAnnotation",
    "RelationLabel",
    "SentencePair",
    "Token",
    "map_cst_to_relation",
]
