"""Poisson distribution of order k: pmf, median, mode and median scaling laws."""
