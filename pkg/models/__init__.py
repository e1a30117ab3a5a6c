"""PrN / PoN definitions in CR and FR variants"""
