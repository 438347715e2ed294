"""
Stratified HJB - Command Line Entry Point

Solver and verification toolkit for Hamilton-Jacobi-Bellman equations on
stratified domains.
"""

import logging
import sys
from typing import List, Optional

from stratified_hjb.core.application import Application
from stratified_hjb.core.settings import Settings
from stratified_hjb.utils.logging_utils import setup_logging


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the command line."""
    argv = list(sys.argv[1:] if argv is None else argv)

    settings = Settings()
    # Log files are opened during setup, so this flag is read before parsing
    log_to_file = bool(settings.log_to_file) and "--no-log-file" not in argv
    logger = setup_logging(logging.INFO, log_to_file=log_to_file)
    logger.info("Starting Stratified HJB")

    try:
        app = Application(logger, settings)
        exit_code = app.run(argv)
        logger.info(f"Application exited with code {exit_code}")
        return exit_code
    except Exception as e:
        logger.critical(f"Unhandled exception: {str(e)}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
