"""Collects the acceptance suite's PASS/FAIL lines for the terminal summary."""

LINES: list = []
