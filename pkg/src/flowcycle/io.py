"""Workflow documents, system configuration, command-line flags and DOT export.

A workflow document is a mapping (JSON canonical, YAML accepted)::

    version: 1
    name: docking
    nodes:
      - {name: embed, kind: LoadData, looped: false, max_retries: 0,
         parameters: {data: ["CCO"], dtype: "list<str>"}}
    subgraphs: []            # same layout, recursive, plus "ports"
    channels:
      - {from: embed.out, to: dock.inp, capacity: 16}
    expose: {receptor: [dock.receptor]}

Only explicitly set parameter values are stored; defaults stay with the
node kind. Relative values of ``path`` parameters are resolved against the
directory of the document file.
"""

from __future__ import annotations

import argparse
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import jsonschema
import yaml

from .errors import (
    FlagCollision,
    PathError,
    SchemaError,
    TypeMismatch,
    UnknownKind,
    UnserializableParameterValue,
    VersionError,
)
from .graph import NodeRegistry, Node, Workflow, registry as default_registry

__all__ = [
    "FORMAT_VERSION",
    "Flag",
    "FlagSchema",
    "KindConfig",
    "SystemConfig",
    "apply_flags",
    "build_parser",
    "deserialize",
    "dump",
    "dumps",
    "expose_cli",
    "export_dot",
    "load",
    "load_system_config",
    "loads",
    "serialize",
]

FORMAT_VERSION = 1

_VALUE = {
    "anyOf": [
        {"type": ["null", "boolean", "number", "string"]},
        {"type": "array", "items": {"$ref": "#/$defs/value"}},
    ]
}
_IDENT = {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}
_PORT_REF = {"type": "string", "pattern": r"^[A-Za-z_][A-Za-z0-9_/]*\.[A-Za-z_][A-Za-z0-9_]*$"}

_GRAPH_PROPS = {
    "name": _IDENT,
    "doc": {"type": "string"},
    "nodes": {
        "type": "array",
        "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "kind"],
            "properties": {
                "name": _IDENT,
                "kind": {"type": "string", "minLength": 1},
                "looped": {"type": "boolean"},
                "max_retries": {"type": "integer", "minimum": 0},
                "parameters": {"type": "object", "additionalProperties": {"$ref": "#/$defs/value"}},
            },
        },
    },
    "subgraphs": {"type": "array", "items": {"$ref": "#/$defs/subgraph"}},
    "channels": {
        "type": "array",
        "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["from", "to"],
            "properties": {
                "from": _PORT_REF,
                "to": _PORT_REF,
                "capacity": {"type": "integer", "minimum": 1},
            },
        },
    },
    "expose": {
        "type": "object",
        "propertyNames": _IDENT,
        "additionalProperties": {"type": "array", "minItems": 1, "items": {"type": "string"}},
    },
    "ports": {"type": "object", "propertyNames": _IDENT, "additionalProperties": _PORT_REF},
}

WORKFLOW_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "name"],
    "properties": {"version": {"type": "integer"}, **_GRAPH_PROPS},
    "$defs": {
        "value": _VALUE,
        "subgraph": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": _GRAPH_PROPS,
        },
    },
}

SYSTEM_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "workdir": {"type": "string"},
        "kinds": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "executable": {"type": "string"},
                    "env": {"type": "object", "additionalProperties": {"type": "string"}},
                    "prefix": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "queue": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {"enum": ["mock"]},
                "slots": {"type": "integer", "minimum": 1},
                "latency": {"type": "number", "minimum": 0},
                "fail_first": {"type": "integer", "minimum": 0},
                "fail_jobs": {"type": "array", "items": {"type": "integer"}},
                "workdir": {"type": "string"},
            },
        },
    },
}


def _position(path: Iterable[Any]) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<document>"


def _check_schema(doc: Any, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _position(err.absolute_path))


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------


def loads(text: str, fmt: str | None = None) -> Any:
    """Parse JSON or YAML text; ``fmt`` is guessed when omitted."""
    if fmt is None:
        fmt = "json" if text.lstrip().startswith(("{", "[")) else "yaml"
    if fmt == "json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if fmt == "yaml":
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else None
            raise SchemaError(getattr(exc, "problem", None) or str(exc), where) from None
    raise ValueError(f"unknown format {fmt!r}")


def dumps(doc: dict[str, Any], fmt: str = "json") -> str:
    """Canonical text: sorted keys, fixed indentation, trailing newline."""
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if fmt == "yaml":
        return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)
    raise ValueError(f"unknown format {fmt!r}")


def _fmt_for(path: Path) -> str:
    return "yaml" if path.suffix.lower() in (".yaml", ".yml") else "json"


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _encode(value: Any, where: str) -> Any:
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, os.PathLike):
        return os.fspath(value)
    if isinstance(value, (list, tuple)):
        return [_encode(v, where) for v in value]
    if hasattr(value, "tolist") and hasattr(value, "dtype"):
        return _encode(value.tolist(), where)
    raise UnserializableParameterValue(f"{where}: {type(value).__name__} values cannot be stored in a document")


def _graph_doc(wf: Workflow) -> dict[str, Any]:
    nodes, subgraphs = [], []
    for name, child in wf.children.items():
        if isinstance(child, Workflow):
            subgraphs.append(_graph_doc(child))
            continue
        params = {
            pname: _encode(p.value, f"{child.path}.{pname}")
            for pname, p in child.parameters.items()
            if p.is_set
        }
        nodes.append(
            {
                "name": name,
                "kind": child.kind,
                "looped": child.looped,
                "max_retries": child.max_retries,
                "parameters": params,
            }
        )
    doc: dict[str, Any] = {
        "name": wf.name,
        "nodes": nodes,
        "subgraphs": subgraphs,
        "channels": [{"from": e.source, "to": e.target, "capacity": e.capacity} for e in wf.channels],
        "expose": {name: list(p.references) for name, p in wf.exposed.items()},
    }
    if wf.port_aliases:
        doc["ports"] = {alias: ref for alias, (ref, _) in wf.port_aliases.items()}
    if wf.doc:
        doc["doc"] = wf.doc
    return doc


def serialize(workflow: Workflow) -> dict[str, Any]:
    """Document for ``workflow``; validation is not required."""
    return {"version": FORMAT_VERSION, **_graph_doc(workflow)}


def _decode_params(cls: type[Node], params: dict[str, Any], base_dir: Path | None) -> dict[str, Any]:
    out = {}
    for pname, value in params.items():
        decl = cls._param_decls.get(pname)
        if decl is not None and decl.tag == "path" and isinstance(value, str) and base_dir is not None:
            path = Path(value)
            value = path if path.is_absolute() else base_dir / path
        elif decl is not None and decl.tag == "path" and isinstance(value, str):
            value = Path(value)
        out[pname] = value
    return out


def _build(doc: dict[str, Any], reg: NodeRegistry, base_dir: Path | None, where: str) -> Workflow:
    wf = Workflow(doc["name"], doc=doc.get("doc"))
    for i, entry in enumerate(doc.get("nodes", [])):
        pos = f"{where}nodes[{i}]"
        try:
            cls = reg.resolve(entry["kind"])
        except UnknownKind:
            raise UnknownKind(f"{pos}: node {entry['name']!r} has unknown kind {entry['kind']!r}") from None
        params = _decode_params(cls, entry.get("parameters", {}), base_dir)
        try:
            node = cls(entry["name"], looped=entry.get("looped"), max_retries=entry.get("max_retries", 0), **params)
        except (TypeError, ValueError, LookupError) as exc:
            raise SchemaError(str(exc), pos) from None
        wf.add(node)
    for i, sub in enumerate(doc.get("subgraphs", [])):
        wf.add(_build(sub, reg, base_dir, f"{where}subgraphs[{i}]."))
    for alias, ref in doc.get("ports", {}).items():
        try:
            wf.expose_port(alias, ref)
        except PathError as exc:
            raise SchemaError(str(exc), f"{where}ports.{alias}") from None
    for i, ch in enumerate(doc.get("channels", [])):
        pos = f"{where}channels[{i}]"
        for key in ("from", "to"):
            try:
                wf.resolve_port(ch[key])
            except PathError as exc:
                raise SchemaError(f"{exc} (path {ch[key]!r})", f"{pos}.{key}") from None
        try:
            wf.connect(ch["from"], ch["to"], ch.get("capacity", 16))
        except TypeMismatch as exc:
            raise TypeMismatch(f"{pos}: {exc}") from None
        except Exception as exc:
            raise SchemaError(str(exc), pos) from None
    for name, refs in doc.get("expose", {}).items():
        try:
            wf.map_parameters(name, refs)
        except Exception as exc:
            raise SchemaError(str(exc), f"{where}expose.{name}") from None
    return wf


def deserialize(
    doc: dict[str, Any],
    registry: NodeRegistry | None = None,
    *,
    base_dir: str | os.PathLike | None = None,
) -> Workflow:
    """Rebuild a workflow from a document.

    Raises :class:`VersionError`, :class:`SchemaError` (with a position such
    as ``channels[2].to``), :class:`UnknownKind` or :class:`TypeMismatch`.
    """
    reg = default_registry if registry is None else registry
    if not isinstance(doc, dict):
        raise SchemaError("document must be a mapping", "<document>")
    if "version" not in doc:
        raise VersionError("missing format version", "version")
    if doc["version"] != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {doc['version']!r} (expected {FORMAT_VERSION})", "version")
    _check_schema(doc, WORKFLOW_SCHEMA)
    return _build(doc, reg, Path(base_dir) if base_dir is not None else None, "")


def load(path: str | os.PathLike, registry: NodeRegistry | None = None) -> Workflow:
    path = Path(path)
    doc = loads(path.read_text(), _fmt_for(path))
    return deserialize(doc, registry, base_dir=path.resolve().parent)


def dump(workflow: Workflow, path: str | os.PathLike) -> None:
    path = Path(path)
    path.write_text(dumps(serialize(workflow), _fmt_for(path)))


# ---------------------------------------------------------------------------
# System configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KindConfig:
    executable: str | None = None
    env: dict[str, str] = field(default_factory=dict)
    prefix: tuple[str, ...] = ()


@dataclass(frozen=True)
class SystemConfig:
    """Site settings kept apart from workflow structure.

    Defaults: no working root (a temporary directory is used), no per-kind
    overrides, and a one-slot mock queue.
    """

    workdir: str | None = None
    kinds: dict[str, KindConfig] = field(default_factory=dict)
    queue: dict[str, Any] = field(default_factory=lambda: {"backend": "mock", "slots": 1})

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None, base_dir: Path | None = None) -> "SystemConfig":
        data = {} if data is None else data
        _check_schema(data, SYSTEM_SCHEMA)
        workdir = data.get("workdir")
        if workdir is not None and base_dir is not None and not Path(workdir).is_absolute():
            workdir = str(base_dir / workdir)
        kinds = {
            kind: KindConfig(spec.get("executable"), dict(spec.get("env", {})), tuple(spec.get("prefix", ())))
            for kind, spec in data.get("kinds", {}).items()
        }
        queue = {"backend": "mock", "slots": 1, **data.get("queue", {})}
        return cls(workdir, kinds, queue)


def load_system_config(path: str | os.PathLike) -> SystemConfig:
    """Parse a system config file. Executables are not checked here."""
    path = Path(path)
    data = loads(path.read_text(), _fmt_for(path))
    return SystemConfig.from_dict(data, path.resolve().parent)


# ---------------------------------------------------------------------------
# Command-line flags
# ---------------------------------------------------------------------------

RESERVED_FLAGS = ("config", "workdir", "log-level", "timeout", "help", "format", "poll-interval", "isolation")


@dataclass(frozen=True)
class Flag:
    name: str  # without leading dashes
    tag: str
    default: Any
    required: bool
    help: str
    target: str  # parameter reference relative to the root workflow


@dataclass(frozen=True)
class FlagSchema:
    flags: tuple[Flag, ...]

    def names(self) -> list[str]:
        return [f.name for f in self.flags]

    def __getitem__(self, name: str) -> Flag:
        for flag in self.flags:
            if flag.name == name:
                return flag
        raise KeyError(name)

    def __iter__(self):
        return iter(self.flags)

    def __len__(self) -> int:
        return len(self.flags)


def _norm(name: str) -> str:
    return name.replace("-", "_")


def expose_cli(workflow: Workflow) -> FlagSchema:
    """One flag per exposed parameter, plus ``<node-path>.<param>`` for the rest.

    Parameters exposed by a subgraph but not by the root appear as
    ``<subgraph-path>.<name>``. Raises :class:`FlagCollision` when two flags,
    or a flag and a built-in option, share a name.
    """
    flags: list[Flag] = []
    covered: set[int] = set()

    def add_exposed(wf: Workflow, prefix: str) -> None:
        for name, param in wf.exposed.items():
            leaves = param.leaves()
            if all(id(p) in covered for p in leaves):
                continue
            covered.update(id(p) for p in leaves)
            flag_name = f"{prefix}.{name}" if prefix else name
            flags.append(
                Flag(
                    flag_name,
                    param.tag,
                    param.value,
                    not param.satisfied,
                    param.doc or f"{param.tag}; sets {', '.join(param.references)}",
                    flag_name,
                )
            )

    add_exposed(workflow, "")
    for path, child in workflow.walk():
        if isinstance(child, Workflow):
            add_exposed(child, path)
    for path, node in workflow.leaves():
        for pname, param in node.parameters.items():
            if id(param) in covered:
                continue
            flags.append(
                Flag(
                    f"{path}.{pname}",
                    param.tag,
                    param.value,
                    not param.satisfied,
                    param.doc or f"{param.tag} ({node.kind})",
                    f"{path}.{pname}",
                )
            )

    seen = {_norm(r): f"built-in option --{r}" for r in RESERVED_FLAGS}
    for flag in flags:
        key = _norm(flag.name)
        if key in seen:
            raise FlagCollision(f"flag --{flag.name} collides with {seen[key]}")
        seen[key] = f"--{flag.name}"
    return FlagSchema(tuple(flags))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _parse_any(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def flag_converter(tag: str):
    """Callable turning one command-line string into a value of ``tag``."""
    if tag == "int":
        return int
    if tag == "float":
        return float
    if tag == "bool":
        return _parse_bool
    if tag == "path":
        return Path
    if tag in ("str", "string"):
        return str
    return _parse_any


def add_flags(parser: argparse.ArgumentParser, schema: FlagSchema) -> None:
    group = parser.add_argument_group("workflow parameters")
    for flag in schema:
        kwargs: dict[str, Any] = dict(dest=flag.name, default=argparse.SUPPRESS, help=flag.help)
        if flag.tag.startswith("list<") and flag.tag.endswith(">"):
            kwargs.update(nargs="*", type=flag_converter(flag.tag[5:-1]))
        else:
            kwargs.update(type=flag_converter(flag.tag))
        if flag.required:
            kwargs["help"] += " (required)"
        elif flag.default is not None:
            kwargs["help"] += f" (default: {flag.default!r})"
        group.add_argument(f"--{flag.name}", **kwargs)


def build_parser(workflow: Workflow, prog: str | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=prog, description=workflow.doc)
    add_flags(parser, expose_cli(workflow))
    return parser


def apply_flags(workflow: Workflow, values: dict[str, Any], schema: FlagSchema | None = None) -> list[str]:
    """Set parameters from parsed flag values; returns the flags applied."""
    schema = schema or expose_cli(workflow)
    applied = []
    for flag in schema:
        if flag.name in values:
            workflow.set(flag.target, values[flag.name])
            applied.append(flag.name)
    return applied


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def _q(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def export_dot(workflow: Workflow) -> str:
    """Graphviz description: leaves as boxes, subgraphs as clusters, typed edges."""
    lines = [f"digraph {_q(workflow.name)} {{", "  rankdir=LR;", "  node [shape=box];"]

    def emit(wf: Workflow, indent: str) -> None:
        for name in sorted(wf.children):
            child = wf.children[name]
            path = workflow._relative(child)
            if isinstance(child, Workflow):
                lines.append(f"{indent}subgraph {_q('cluster_' + path)} {{")
                lines.append(f"{indent}  label={_q(name)};")
                emit(child, indent + "  ")
                lines.append(f"{indent}}}")
            else:
                label = _q(f"{name}\n({child.kind})")
                lines.append(f"{indent}{_q(path)} [label={label}];")

    emit(workflow, "  ")
    edges = sorted(
        (workflow._relative(e.source_port.node), workflow._relative(e.target_port.node), e.type_tag)
        for e in workflow.all_channels()
    )
    for src, dst, tag in edges:
        lines.append(f"  {_q(src)} -> {_q(dst)} [label={_q(tag)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
