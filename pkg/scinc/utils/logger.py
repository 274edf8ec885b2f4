import logging
import os
import sys
from logging.handlers import RotatingFileHandler

from scinc.config import settings


def setup_logger(name: str = "scinc", level: str | int = None) -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(level if level is not None else settings.log.upper())

    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        '%(asctime)s | %(levelname)-8s | %(name)s | %(funcName)s:%(lineno)d | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    if settings.log_to_file:
        os.makedirs(settings.log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            os.path.join(settings.log_dir, 'application.log'),
            maxBytes=10 * 1024 * 1024,  # 10 MB
            backupCount=10,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(formatter)

        error_handler = RotatingFileHandler(
            os.path.join(settings.log_dir, 'errors.log'),
            maxBytes=10 * 1024 * 1024,
            backupCount=10,
            encoding='utf-8'
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(formatter)

        logger.addHandler(file_handler)
        logger.addHandler(error_handler)

    # stdout queda libre para las salidas de la CLI
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    return logger


app_logger = setup_logger()


def log_solve_iteration(job_id: str, phase: str, k: int, message: str = "", **kwargs):
    extra_info = " | ".join([f"{key}={value}" for key, value in kwargs.items()])
    log_msg = f"[Job: {job_id[:8]}] fase={phase} k={k}"
    if message:
        log_msg += f" - {message}"
    if extra_info:
        log_msg += f" | {extra_info}"
    app_logger.debug(log_msg)


def log_job_status(job_id: str, status: str, message: str, **kwargs):
    extra_info = " | ".join([f"{k}={v}" for k, v in kwargs.items()])
    log_msg = f"[Job: {job_id[:8]}] {status} - {message}"
    if extra_info:
        log_msg += f" | {extra_info}"

    if status in ['failed', 'budget_exceeded']:
        app_logger.error(log_msg)
    else:
        app_logger.info(log_msg)


def log_validation(validation_type: str, passed: bool, details: str = ""):
    if passed:
        app_logger.info(f"Validación [{validation_type}] PASÓ: {details}")
    else:
        app_logger.warning(f"Validación [{validation_type}] FALLÓ: {details}")


def log_numeric_failure(context: str, error: Exception):
    app_logger.error(f"Fallo numérico en {context}: {error}", exc_info=True)
