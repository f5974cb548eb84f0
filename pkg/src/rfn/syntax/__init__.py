"""Lexer, parser, AST, and pretty-printer."""

from .lexer import tokenize
from .parser import parse_expr, parse_files, parse_program, parse_text
from .printer import pretty_print, print_program

__all__ = ["tokenize", "parse_program", "parse_text", "parse_files", "parse_expr", "pretty_print", "print_program"]
