"""Progressive codec-in-the-loop training of the PrN/PoN pair"""
