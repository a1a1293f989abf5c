import logging
import sys

from colorama import Fore, Style, just_fix_windows_console

from magbend.core.config import settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(quiet: bool = False) -> None:
    """Configure root logging for the CLI and the server."""
    level = logging.WARNING if quiet else getattr(logging, settings.MAGBEND_LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    just_fix_windows_console()


# Status lines; warnings and errors go to stderr so --json output stays parseable
def print_success(msg: str) -> None:
    print(f"{Fore.GREEN}✅ {msg}{Style.RESET_ALL}", file=sys.stderr)


def print_warning(msg: str) -> None:
    print(f"{Fore.YELLOW}⚠️  {msg}{Style.RESET_ALL}", file=sys.stderr)


def print_error(msg: str) -> None:
    print(f"{Fore.RED}❌ {msg}{Style.RESET_ALL}", file=sys.stderr)


def print_info(msg: str) -> None:
    print(f"   {msg}")
