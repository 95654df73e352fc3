"""Numerical kernels: Hermitian linear algebra and the SDP engine."""
