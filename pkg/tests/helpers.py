import numpy as np


def write_pgm_bytes(path, arr, maxval=255):
    arr = np.asarray(arr)
    h, w = arr.shape
    path.write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + arr.astype(np.uint8).tobytes())


def write_ppm_bytes(path, rgb):
    rgb = np.asarray(rgb)
    h, w, _ = rgb.shape
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + rgb.astype(np.uint8).tobytes())
