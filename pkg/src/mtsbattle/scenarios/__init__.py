from . import spectrogram  # noqa: F401  registers the spectrogram evaluators
