"""Decentralized macro-action planning against switching adversaries."""
