"""Command-line surface: configuration, logging and subcommand handlers"""
