"""Seizure-type classification from multichannel EEG.

Preprocessing to first-IMF 1.8 s windows, 13 features per channel, binary
grey wolf feature selection and one-vs-all kernel naive Bayes.
"""

__version__ = "0.1.0"

from .bgwo import BgwoConfig, BGWOSelector  # noqa: E402
from .dataset import FeatureMatrix, LabelScheme  # noqa: E402
from .features import FeatureExtractor, FeatureParams  # noqa: E402
from .nbayes import KernelNB, OneVsAllKernelNB  # noqa: E402
from .signal_io import Recording, SeizureType  # noqa: E402

__all__ = [
    "BgwoConfig",
    "BGWOSelector",
    "FeatureMatrix",
    "LabelScheme",
    "FeatureExtractor",
    "FeatureParams",
    "KernelNB",
    "OneVsAllKernelNB",
    "Recording",
    "SeizureType",
]
