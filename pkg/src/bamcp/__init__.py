"""Bayes-adaptive Monte-Carlo planning."""
