"""Text-to-playlist: tag extraction, retrieval, ranking and refinement."""

from pathlib import Path

from ._t2p import (
    Catalog,
    Lexicon,
    Service,
    T2PError,
    Taxonomy,
    cosine,
    extract_rule_based,
    extraction_prompt,
    parse_llm_tags,
    prompt_hash,
    rank,
    refine,
    retrieve,
)

DATA_DIR = Path(__file__).resolve().parent / "data"


def default_config() -> Path:
    """Bundled config pointing at the bundled demo catalog."""
    return DATA_DIR / "config.json"


__all__ = [
    "Catalog",
    "DATA_DIR",
    "Lexicon",
    "Service",
    "T2PError",
    "Taxonomy",
    "cosine",
    "default_config",
    "extract_rule_based",
    "extraction_prompt",
    "parse_llm_tags",
    "prompt_hash",
    "rank",
    "refine",
    "retrieve",
]
