"""Compiler-in-the-loop evaluation harness for LLM-generated TFHE code."""

__version__ = "0.1.0"
