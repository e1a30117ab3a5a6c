"""Image ingestion, dataset preparation and the compress/decompress pipeline"""
