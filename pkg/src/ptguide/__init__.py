"""Point spectrum of the Laplacian in a strip with PT-symmetric Robin walls."""

__version__ = "0.1.0"
