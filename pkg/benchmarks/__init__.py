"""Timings of the l0bse solvers and property suites."""
