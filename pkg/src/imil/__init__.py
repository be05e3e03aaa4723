"""Human-in-the-loop image-classifier training: mid-training selection of
high-confidence mispredictions, grid-based region feedback, blackout
augmentation with in-place sample replacement, and the metrics to compare
it against standard augmentations."""

__version__ = "0.1.0"
