"""Baseline grayscale JPEG codec used in the loop and for rate measurement"""
