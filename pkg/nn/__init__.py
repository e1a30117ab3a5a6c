"""Minimal deterministic neural-network engine on numpy arrays"""
