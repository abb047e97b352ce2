import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from src.errors import ConfigurationError

logger = logging.getLogger("action_handler")


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value}")


def float_list(value: Any) -> List[float]:
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    return [float(v) for v in value]


def int_list(value: Any) -> List[int]:
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(v) for v in value]


@dataclass
class ActionParameter:
    name: str
    required: bool
    type: Callable[[Any], Any]
    description: str
    # dotted project key the value overrides, e.g. "training.epochs"
    override: Optional[str] = None


@dataclass
class Action:
    name: str
    handler: Callable
    parameters: List[ActionParameter] = field(default_factory=list)
    description: str = ""

    def validate_params(self, params: Dict[str, Any]) -> List[str]:
        errors = []
        known = {p.name for p in self.parameters}
        for name in params:
            if name not in known:
                errors.append(f"Unknown parameter: {name}")
        for param in self.parameters:
            if param.required and params.get(param.name) is None:
                errors.append(f"Missing required parameter: {param.name}")
            elif params.get(param.name) is not None:
                try:
                    params[param.name] = param.type(params[param.name])
                except (TypeError, ValueError):
                    errors.append(f"Invalid type for {param.name}. Expected {param.type.__name__}")
        return errors


action_registry: Dict[str, Action] = {}


def register_action(action_name: str, parameters=(), description: str = ""):
    def decorator(func):
        action_registry[action_name] = Action(action_name, func, list(parameters), description or (func.__doc__ or "").strip())
        return func
    return decorator


def execute_action(project, action_name: str, **kwargs):
    action = action_registry.get(action_name)
    if action is None:
        logger.error(f"Action {action_name} not found")
        raise ConfigurationError(f"Unknown command: {action_name}")
    params = {k.replace("-", "_"): v for k, v in kwargs.items()}
    errors = action.validate_params(params)
    if errors:
        raise ConfigurationError("; ".join(errors))
    overrides = {p.override: params.pop(p.name) for p in action.parameters
                 if p.override and params.get(p.name) is not None}
    if overrides:
        project = project.with_overrides(overrides)
    return action.handler(project, **{k: v for k, v in params.items() if v is not None})
