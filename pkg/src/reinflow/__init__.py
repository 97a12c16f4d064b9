"""Flow-matching action policies with noise-injected online RL fine-tuning."""

__version__ = "0.1.0"
