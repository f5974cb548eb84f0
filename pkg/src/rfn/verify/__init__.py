"""Proof obligations, inheritance classification, bounded checking, and SMT-LIB output."""
