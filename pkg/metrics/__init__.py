"""Image quality metrics, Bjontegaard deltas and rate-distortion curves"""
