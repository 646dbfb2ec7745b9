"""Triple-augmented clustering and classification of scientific abstracts."""

__version__ = "0.1.0"
