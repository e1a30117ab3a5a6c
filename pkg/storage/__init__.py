"""Checkpoint files and the JSON-lines training log"""
