"""Image-side bridge for the partmap pipeline.

Extracts pooling-stage feature grids from a backbone CNN, synthesizes
image-level occlusions, and exports softmax probabilities, all in partmap's
file formats. The partmap package itself is consumed only through those
files and its CLI.
"""

__version__ = "0.1.0"
