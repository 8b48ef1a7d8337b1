"""Literature intelligence toolkit.

Pipeline: ingest paper metadata, build a normalized keyword library, extract
keywords for papers lacking them, cluster keywords into topics, mine
cross-topic association rules, and serve semantic search over an
inverted-file product-quantization index.
"""

__version__ = "0.1.0"
