"""Adaptive elastic-net toolkit: fits, BIC tuning, screening and simulation studies."""
