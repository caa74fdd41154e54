"""Training orchestration: corpus records in, serialized model bundle out."""
from __future__ import annotations

from dataclasses import asdict
from typing import Dict, List, Optional, Sequence, Tuple

from .categories import CATEGORY_ORDER, SegmentCategory
from .errors import MissingCategory
from .nn import TrainConfig, train_category

PACKAGE_VERSION = "0.1.0"


def group_records(records: Sequence[dict]) -> Dict[SegmentCategory, list]:
    groups: Dict[SegmentCategory, list] = {c: [] for c in CATEGORY_ORDER}
    for rec in records:
        category = SegmentCategory(rec["category"])
        groups[category].append((rec["input"], rec["target_norm"]))
    return groups


def train_bundle_models(
    records: Sequence[dict],
    config: Optional[TrainConfig] = None,
    corpus_digest: str = "",
) -> Tuple[Dict[SegmentCategory, object], dict, Dict[str, dict]]:
    """Train one MLP per segment category.

    Returns (models, metadata, per-category training reports).  Category
    seeds are derived from the base seed so the categories train
    independently but reproducibly.
    """
    if config is None:
        config = TrainConfig()
    groups = group_records(records)
    empty = [c.value for c in CATEGORY_ORDER if not groups[c]]
    if empty:
        raise MissingCategory(
            f"corpus has no records for categories: {', '.join(empty)}"
        )

    models: Dict[SegmentCategory, object] = {}
    reports: Dict[str, dict] = {}
    for i, category in enumerate(CATEGORY_ORDER):
        # batch size scales with the category's dataset so small categories
        # get a comparable number of optimization steps per epoch instead of
        # finishing an epoch in a handful of updates
        n_cat = len(groups[category])
        batch_size = min(config.batch_size, max(32, n_cat // 150))
        cat_config = TrainConfig(
            learning_rate=config.learning_rate,
            batch_size=batch_size,
            max_epochs=config.max_epochs,
            patience=config.patience,
            seed=config.seed * 1009 + i,
            log_sigma_clamp=config.log_sigma_clamp,
            validation_fraction=config.validation_fraction,
            lr_decay_patience=config.lr_decay_patience,
            min_learning_rate=config.min_learning_rate,
        )
        model, report = train_category(groups[category], cat_config)
        models[category] = model
        reports[category.value] = report

    metadata = {
        "tool_version": PACKAGE_VERSION,
        "seed": config.seed,
        "corpus_hash": corpus_digest,
        "activation": "relu",
        "log_sigma_clamp": list(config.log_sigma_clamp),
        "train_config": {
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "max_epochs": config.max_epochs,
            "patience": config.patience,
            "validation_fraction": config.validation_fraction,
            "lr_decay_patience": config.lr_decay_patience,
            "min_learning_rate": config.min_learning_rate,
        },
        "category_counts": {c.value: len(groups[c]) for c in CATEGORY_ORDER},
    }
    return models, metadata, reports
