"""
Logging configuration
"""
import logging
import sys


def setup_logger(level: str = "INFO"):
    """Console logging for the CLI"""
    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s'
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(simple_formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(level.upper())
    root_logger.handlers = [console_handler]
    return root_logger


def log_epoch(epoch: int, loss_o, loss_r, qf: int, mode: str):
    logging.info(f"EPOCH - {mode} qf={qf} #{epoch}: loss_o={loss_o} loss_r={loss_r}")


def log_processing_time(operation: str, duration: float):
    """Log processing times"""
    logging.info(f"PERFORMANCE - {operation} took {duration:.2f}s")


def log_error(error_type: str, error_msg: str, path=None):
    """Log errors with context"""
    context = f" - {path}" if path else ""
    logging.error(f"ERROR - {error_type}{context}: {error_msg}")
