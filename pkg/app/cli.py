"""Command-line entry point: ``python -m app.cli <command> [options]``.

Every field of a command's config model is also a flag of the same name
(``window_sigma`` -> ``--window-sigma``). Precedence: defaults, then the
``--config`` JSON file, then WSST_SEED, then explicit flags.
"""

from typing import Literal, Optional, Sequence, Union, get_args, get_origin
import argparse
import json
import logging
import os
import sys

from pydantic import ValidationError

from app.command_registry import (
    CommandDefinition,
    execute_command,
    get_all_commands,
    get_command,
    validate_command_config,
)
from app.config import load_config
from app.errors import PulseSignatureError

LOG_LEVEL_ENV = "WSST_LOG_LEVEL"

logger = logging.getLogger(__name__)


def configure_logging():
    level_name = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler()],
        force=True,
    )
    for noisy_logger in ("asyncio", "PIL"):
        logging.getLogger(noisy_logger).setLevel(logging.WARNING)


def _flag_kwargs(name: str, field) -> dict:
    annotation = field.annotation
    origin = get_origin(annotation)
    type_args = get_args(annotation)
    kwargs = {"dest": name, "default": None, "help": f"(default: {field.default})"}
    if origin is Union:
        inner = [a for a in type_args if a is not type(None)]
        annotation = inner[0]
        origin = get_origin(annotation)
        type_args = get_args(annotation)
    if annotation is bool:
        kwargs["action"] = argparse.BooleanOptionalAction
    elif origin is tuple:
        kwargs.update(nargs=len(type_args), type=type_args[0])
    elif origin is Literal:
        kwargs.update(choices=list(type_args))
    else:
        kwargs["type"] = annotation
    return kwargs


def add_config_arguments(parser: argparse.ArgumentParser, config_class: type):
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", default=None, help="JSON config file")
    for name, field in config_class.model_fields.items():
        group.add_argument("--" + name.replace("_", "-"), **_flag_kwargs(name, field))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsst", description="Wave-shape pulse signature toolkit")
    subparsers = parser.add_subparsers(dest="command")
    for name, defn in sorted(get_all_commands().items()):
        sub = subparsers.add_parser(name, help=defn.label, description=defn.description)
        for flags, kwargs in defn.arguments:
            sub.add_argument(*flags, **kwargs)
        if defn.config_class is not None:
            add_config_arguments(sub, defn.config_class)
    return parser


def build_config(defn: CommandDefinition, args: argparse.Namespace):
    """Merge file, environment and flag settings into a validated config."""
    base = load_config(getattr(args, "config", None), model=defn.config_class)
    data = base.model_dump()
    for name in defn.config_class.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = tuple(value) if isinstance(value, list) else value
    validate_command_config(defn.name, json.loads(json.dumps(data)))
    return defn.config_class.model_validate(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    import app.commands  # noqa: F401  (registers every command)

    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2

    defn = get_command(args.command)
    try:
        config = build_config(defn, args) if defn.config_class is not None else None
        return execute_command(args.command, args, config)
    except PulseSignatureError as e:
        logger.error(f"{args.command} failed: {e.code}: {e}")
        print(f"[!] {e.code}: {e}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"[!] {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
