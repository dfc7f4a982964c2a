"""Parallel inverse-free ADMM solvers for constructive-interference symbol-level precoding."""
