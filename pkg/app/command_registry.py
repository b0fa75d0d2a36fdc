"""
Command Registry for the pulse-signature toolkit.

Each CLI subcommand registers itself with the @register_command decorator, so
adding a command means adding one file under app/commands/ and nothing else.

Example usage:
    from app.command_registry import register_command

    @register_command(
        name="analyze",
        label="Analyze signals",
        description="Signals to SPS vectors",
        config_class=PipelineConfig,
        arguments=[(("inputs",), {"nargs": "+"})],
    )
    def run_analyze_command(args, config):
        ...
        return 0
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import logging

from jsonschema import ValidationError, validate

logger = logging.getLogger(__name__)

# (flags, argparse keyword arguments)
ArgumentSpec = Tuple[Tuple[str, ...], Dict[str, Any]]


@dataclass
class CommandDefinition:
    """
    Metadata for a registered command.

    Attributes:
        name: Subcommand name used on the command line (e.g. "analyze")
        label: Short human-readable title
        description: Help text
        execute_fn: Called as execute_fn(args, config); returns an exit code
        config_class: Pydantic model whose fields become --flags (optional)
        config_schema: JSON Schema used to validate config dicts (defaults to
            the config class's schema)
        arguments: Extra argparse arguments beyond the config flags
        category: Grouping for listings
    """
    name: str
    label: str
    description: str
    execute_fn: Callable
    config_class: Optional[type] = None
    config_schema: Optional[Dict[str, Any]] = None
    arguments: List[ArgumentSpec] = field(default_factory=list)
    category: str = "pipeline"


# Global registry of all commands
_registry: Dict[str, CommandDefinition] = {}


def register_command(
    name: str,
    label: str,
    description: str = "",
    config_class: Optional[type] = None,
    config_schema: Optional[Dict[str, Any]] = None,
    arguments: Optional[Sequence[ArgumentSpec]] = None,
    category: str = "pipeline",
):
    """
    Decorator to register a command with the CLI and the HTTP listing.

    Returns:
        Decorator function that registers the command and returns the original function
    """
    def decorator(fn: Callable) -> Callable:
        if name in _registry:
            logger.warning(f"Command '{name}' is already registered. Overwriting.")

        schema = config_schema
        if schema is None and config_class is not None:
            schema = config_class.model_json_schema()

        _registry[name] = CommandDefinition(
            name=name,
            label=label,
            description=description,
            execute_fn=fn,
            config_class=config_class,
            config_schema=schema,
            arguments=list(arguments or []),
            category=category,
        )
        logger.debug(f"Registered command: {name}")
        return fn

    return decorator


def get_command(name: str) -> Optional[CommandDefinition]:
    return _registry.get(name)


def get_all_commands() -> Dict[str, CommandDefinition]:
    """Copy of the registry, keyed by command name."""
    return _registry.copy()


def list_commands() -> List[Dict[str, Any]]:
    """
    Commands in a form suitable for API responses, sorted by name.
    """
    commands = []
    for name in sorted(_registry):
        defn = _registry[name]
        commands.append({
            "name": defn.name,
            "label": defn.label,
            "description": defn.description,
            "category": defn.category,
            "configSchema": defn.config_schema,
        })
    return commands


def execute_command(name: str, args, config) -> int:
    """
    Run a registered command and return its exit code.

    Unknown commands return 2, the fatal exit code.
    """
    defn = _registry.get(name)
    if defn is None:
        logger.warning(f"Unknown command: {name}")
        return 2
    return int(defn.execute_fn(args, config))


def validate_command_config(name: str, config: Dict[str, Any]) -> None:
    """
    Validate a config dict against the command's schema.

    Raises:
        ValueError: If the command is unknown or validation fails
    """
    defn = _registry.get(name)
    if defn is None:
        raise ValueError(f"Unknown command: {name}")

    if defn.config_schema:
        try:
            validate(instance=config, schema=defn.config_schema)
        except ValidationError as e:
            path = ".".join(str(p) for p in e.path) if e.path else "root"
            raise ValueError(f"Invalid configuration for {name} at '{path}': {e.message}")


def is_registered(name: str) -> bool:
    return name in _registry


def get_registry_stats() -> Dict[str, Any]:
    """Get statistics about the registry for debugging."""
    return {
        "total_commands": len(_registry),
        "commands": sorted(_registry),
        "configurable": sorted(n for n, d in _registry.items() if d.config_class is not None),
    }
