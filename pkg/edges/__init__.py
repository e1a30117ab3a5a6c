"""Edge weight maps: built-in Canny and external (HED) map ingestion"""
