"""Trainer-specific exceptions."""


class NonFiniteLoss(Exception):
    """Training produced a NaN or infinite loss; aborts with diagnostics."""
