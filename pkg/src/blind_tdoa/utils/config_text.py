from __future__ import annotations

__all__ = ('build_model', 'dump_config_text', 'load_config_file', 'parse_config_text')

from pathlib import Path
from types import UnionType
from typing import TYPE_CHECKING, Any, Union, get_args, get_origin

from pydantic import BaseModel, ValidationError

from blind_tdoa.errors import InvalidArgument, NotFoundError

if TYPE_CHECKING:
    from collections.abc import Mapping


type ConfigValue = str | list[str] | dict[str, ConfigValue]

NONE_LITERAL = 'none'


def _parse_value(raw: str) -> str | list[str] | None:
    value = raw.strip()
    if value.lower() == NONE_LITERAL:
        return None

    if value.startswith('[') and value.endswith(']'):
        inner = value[1:-1].strip()
        return [item.strip() for item in inner.split(',')] if inner else []

    if ',' in value:
        return [item.strip() for item in value.split(',') if item.strip()]

    return value


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse the ``key = value`` configuration format into a nested mapping.

    Dotted keys open nested sections, so ``room.dimensions = 5, 4, 3``
    becomes ``{'room': {'dimensions': ['5', '4', '3']}}``. Values stay
    strings; the pydantic models coerce them.
    """

    result: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue

        key, sep, raw = content.partition('=')
        key = key.strip()
        if not sep or not key:
            raise InvalidArgument(f'line {lineno}: expected "key = value", got {line.strip()!r}')

        value = _parse_value(raw)
        if value is None:
            continue

        *sections, leaf = key.split('.')
        target = result
        for section in sections:
            child = target.setdefault(section, {})
            if not isinstance(child, dict):
                raise InvalidArgument(f'line {lineno}: {section!r} is both a value and a section')
            target = child  # pyright: ignore[reportUnknownVariableType]
        target[leaf] = value

    return result


def _format_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _flatten(mapping: Mapping[str, Any], prefix: str = '') -> list[tuple[str, str]]:
    lines: list[tuple[str, str]] = []
    for key, value in mapping.items():
        name = f'{prefix}{key}'
        if value is None:
            continue
        if isinstance(value, dict):
            lines.extend(_flatten(value, f'{name}.'))  # pyright: ignore[reportUnknownArgumentType]
        elif isinstance(value, (list, tuple)):
            items = ', '.join(_format_scalar(v) for v in value)  # pyright: ignore[reportUnknownVariableType]
            lines.append((name, f'[{items}]'))
        else:
            lines.append((name, _format_scalar(value)))
    return lines


def dump_config_text(mapping: Mapping[str, Any]) -> str:
    """Inverse of :func:`parse_config_text` for JSON-like mappings."""

    return ''.join(f'{key} = {value}\n' for key, value in _flatten(mapping))


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError:
        raise NotFoundError(f'config file {path} does not exist') from None
    return parse_config_text(text)


def _is_sequence(annotation: Any) -> bool:
    origin = get_origin(annotation)
    if origin in (tuple, list):
        return True
    if origin in (Union, UnionType):
        return any(_is_sequence(arg) for arg in get_args(annotation))
    return False


def _wrap_scalars(model: type[BaseModel], data: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(data)
    for name, field in model.model_fields.items():
        value = out.get(name)
        annotation = field.annotation
        if isinstance(value, str) and _is_sequence(annotation):
            out[name] = [value]
        elif isinstance(value, dict) and isinstance(annotation, type) and issubclass(annotation, BaseModel):
            out[name] = _wrap_scalars(annotation, value)  # pyright: ignore[reportUnknownArgumentType]
    return out


def build_model[M: BaseModel](model: type[M], data: Mapping[str, Any]) -> M:
    """Validate ``data`` into ``model``, reporting the first problem as ``InvalidArgument``.

    A single value given for a sequence field counts as a one-item list,
    so ``n_mics_values = 2`` reads like ``n_mics_values = [2]``.
    """

    try:
        return model.model_validate(_wrap_scalars(model, data))
    except ValidationError as exc:
        error = exc.errors()[0]
        where = '.'.join(str(part) for part in error['loc']) or model.__name__
        raise InvalidArgument(f'{where}: {error["msg"]}') from None
