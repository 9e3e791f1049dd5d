"""Batch command-line front end: config parsing, scenario dispatch, output files."""
