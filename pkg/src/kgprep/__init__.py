"""Corpus toolkit for knowledge-infusion pre-training data.

Turns knowledge-graph triples and triple-aligned sentences into
salient-span-masked (input, target) examples, mixes them with natural
text at exact ratios, builds knowledge-answerable QA subsets, and scores
closed-book QA predictions with exact match.
"""

__version__ = "0.1.0"
