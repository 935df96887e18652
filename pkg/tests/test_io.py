import json
import re
from pathlib import Path

import pytest
from hypothesis import given, settings

from flowcycle import LoadData, LogResult, Workflow
from flowcycle.demos import assemble_active_learning_workflow, assemble_docking_workflow
from flowcycle.errors import (
    FlagCollision,
    SchemaError,
    TypeMismatch,
    UnknownKind,
    UnserializableParameterValue,
    VersionError,
)
from flowcycle.io import (
    SystemConfig,
    apply_flags,
    build_parser,
    deserialize,
    dump,
    dumps,
    expose_cli,
    export_dot,
    load,
    load_system_config,
    loads,
    serialize,
)
from flowcycle.patterns import make_iterative

from kinds import AddOne, Blocker, Collect, Tagged
from strategies import workflows


def structure(wf: Workflow):
    """Structural fingerprint computed straight from the object graph."""
    nodes = sorted(
        (path, node.kind, node.looped, node.max_retries,
         tuple(sorted((k, repr(p.value)) for k, p in node.parameters.items() if p.is_set)))
        for path, node in wf.leaves()
    )  # fmt: skip
    subs = sorted(path for path, c in wf.walk() if isinstance(c, Workflow))
    edges = sorted(
        (e.source_port.path, e.target_port.path, e.capacity, e.type_tag, e.owner.path) for e in wf.all_channels()
    )
    exposed = sorted(
        (path, name, tuple(p.references))
        for path, c in [("", wf), *wf.walk()]
        if isinstance(c, Workflow)
        for name, p in c.exposed.items()
    )
    aliases = sorted(
        (path, alias, ref)
        for path, c in [("", wf), *wf.walk()]
        if isinstance(c, Workflow)
        for alias, (ref, _) in c.port_aliases.items()
    )
    return nodes, subs, edges, exposed, aliases


# -- serialization ------------------------------------------------------------------


def test_docking_document_shape(tmp_path):
    wf = assemble_docking_workflow()
    wf.set("receptor", "receptor.pdbqt")
    doc = serialize(wf)
    assert doc["version"] == 1
    assert len(doc["nodes"]) == 3
    assert len(doc["channels"]) == 2
    assert doc["expose"] == {"receptor": ["dock.receptor"]}
    assert doc["channels"][0] == {"from": "embed.out", "to": "dock.inp", "capacity": 16}


def test_empty_workflow_document():
    doc = serialize(Workflow("empty"))
    assert doc == {"version": 1, "name": "empty", "nodes": [], "subgraphs": [], "channels": [], "expose": {}}
    assert structure(deserialize(doc)) == structure(Workflow("empty"))


@settings(max_examples=80, deadline=None)
@given(workflows())
def test_round_trip(wf):
    doc = serialize(wf)
    back = deserialize(json.loads(dumps(doc)))
    assert structure(back) == structure(wf)
    assert dumps(serialize(back)) == dumps(doc)
    assert validate_summary(back) == validate_summary(wf)


def validate_summary(wf):
    report = wf.validate()
    return report.ok, sorted((i.severity, i.path, i.message) for i in report.issues)


def test_round_trip_of_patterns_and_demos():
    for wf in (
        make_iterative(AddOne, "ge", 10),
        assemble_active_learning_workflow(variant="sequential"),
        assemble_active_learning_workflow(variant="parallel"),
    ):
        doc = serialize(wf)
        back = deserialize(json.loads(dumps(doc)))
        assert structure(back) == structure(wf)
        assert dumps(serialize(back)) == dumps(doc)


def test_yaml_is_the_same_schema():
    wf = assemble_docking_workflow()
    doc = serialize(wf)
    text = dumps(doc, "yaml")
    assert loads(text, "yaml") == doc
    assert structure(deserialize(loads(text))) == structure(wf)


def test_unserializable_parameter():
    wf = Workflow("w")
    wf.add(LoadData, "src", data={"a": 1})
    with pytest.raises(UnserializableParameterValue):
        serialize(wf)


def test_serialize_is_pure():
    wf = assemble_docking_workflow()
    assert dumps(serialize(wf)) == dumps(serialize(wf))
    assert export_dot(wf) == export_dot(wf)


# -- deserialization errors -------------------------------------------------------------


def docking_doc():
    return serialize(assemble_docking_workflow())


def test_unknown_kind_names_the_node():
    doc = docking_doc()
    doc["nodes"][1]["kind"] = "NoSuchNode"
    with pytest.raises(UnknownKind, match=r"nodes\[1\].*'dock'.*NoSuchNode"):
        deserialize(doc)


def test_missing_port_path_is_schema_error():
    doc = docking_doc()
    doc["channels"][1]["to"] = "result.nothing"
    with pytest.raises(SchemaError) as info:
        deserialize(doc)
    assert info.value.position == "channels[1].to"
    assert "result.nothing" in str(info.value)


def test_unknown_keys_rejected():
    doc = docking_doc()
    doc["nodez"] = []
    with pytest.raises(SchemaError):
        deserialize(doc)
    doc = docking_doc()
    doc["channels"][0]["capasity"] = 3
    with pytest.raises(SchemaError) as info:
        deserialize(doc)
    assert info.value.position == "channels[0]"


def test_version_errors():
    doc = docking_doc()
    doc["version"] = 2
    with pytest.raises(VersionError):
        deserialize(doc)
    del doc["version"]
    with pytest.raises(VersionError):
        deserialize(doc)


def test_bad_parameter_value_position():
    doc = docking_doc()
    doc["nodes"][1]["parameters"]["search_center"] = "centre"
    with pytest.raises(SchemaError) as info:
        deserialize(doc)
    assert info.value.position == "nodes[1]"


def test_type_mismatch_on_load():
    wf = Workflow("w")
    src = wf.add(LoadData, "src", data=1, dtype="int")
    sink = wf.add(LogResult, "sink", dtype="int")
    wf.connect(src.out, sink.inp)
    doc = serialize(wf)
    doc["nodes"][1]["parameters"]["dtype"] = "str"
    with pytest.raises(TypeMismatch, match=r"channels\[0\]"):
        deserialize(doc)


def test_malformed_text_reports_line():
    with pytest.raises(SchemaError) as info:
        loads('{"version": 1,\n "name": }', "json")
    assert "line 2" in info.value.position


def test_path_parameters_resolve_against_document(tmp_path):
    wf = assemble_docking_workflow()
    wf.set("receptor", "data/receptor.pdbqt")
    target = tmp_path / "docs" / "dock.json"
    target.parent.mkdir()
    dump(wf, target)
    back = load(target)
    assert Path(back.get("dock").receptor.value) == tmp_path / "docs" / "data" / "receptor.pdbqt"
    # The stored document keeps the relative form.
    assert json.loads(target.read_text())["nodes"][1]["parameters"]["receptor"] == "data/receptor.pdbqt"


def test_dump_is_canonical(tmp_path):
    wf = assemble_docking_workflow()
    dump(wf, tmp_path / "a.json")
    dump(load(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


# -- system configuration --------------------------------------------------------------------


def test_minimal_system_config(tmp_path):
    path = tmp_path / "sys.yaml"
    path.write_text("workdir: runs\n")
    cfg = load_system_config(path)
    assert cfg.workdir == str(tmp_path / "runs")
    assert cfg.kinds == {}
    assert cfg.queue == {"backend": "mock", "slots": 1}


def test_system_config_with_queue_and_kinds(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(
        json.dumps(
            {
                "kinds": {"RunCommand": {"executable": "/opt/bin/tool", "env": {"A": "1"}, "prefix": ["env"]}},
                "queue": {"backend": "mock", "slots": 4, "latency": 0.1},
            }
        )
    )
    cfg = load_system_config(path)
    assert cfg.queue["slots"] == 4 and cfg.queue["latency"] == 0.1
    kind = cfg.kinds["RunCommand"]
    assert (kind.executable, kind.env, kind.prefix) == ("/opt/bin/tool", {"A": "1"}, ("env",))


def test_malformed_system_config(tmp_path):
    path = tmp_path / "sys.yaml"
    path.write_text("kinds:\n  RunCommand:\n    prefix: 3\n")
    with pytest.raises(SchemaError) as info:
        load_system_config(path)
    assert info.value.position == "kinds.RunCommand.prefix"
    path.write_text("nodes: []\n")
    with pytest.raises(SchemaError):
        load_system_config(path)


def test_transferability(tmp_path):
    """One document, two sites: structure is identical, only node config differs."""
    from flowcycle import RunCommand

    wf = Workflow("w")
    cmd = wf.add(RunCommand, "cmd", command=["tool", "--version"])
    sink = wf.add(LogResult, "sink", dtype="dict")
    wf.connect(cmd.out, sink.inp)
    text = dumps(serialize(wf))
    site_a = SystemConfig.from_dict({"kinds": {"RunCommand": {"executable": "/a/tool"}}})
    site_b = SystemConfig.from_dict({"kinds": {"RunCommand": {"executable": "/b/tool", "env": {"X": "1"}}}})
    wa, wb = deserialize(loads(text)), deserialize(loads(text))
    assert structure(wa) == structure(wb)
    assert site_a.kinds["RunCommand"].executable != site_b.kinds["RunCommand"].executable
    assert dumps(serialize(wa)) == dumps(serialize(wb)) == text


# -- command-line flags ------------------------------------------------------------------------


def test_receptor_flag_is_required():
    schema = expose_cli(assemble_docking_workflow())
    flag = schema["receptor"]
    assert flag.required and flag.tag == "path"
    assert "dock.receptor" not in schema.names()
    assert "embed.smiles" in schema.names()


def test_unexposed_parameters_are_namespaced():
    wf = Workflow("w")
    wf.add(Tagged, "a")
    wf.add(Tagged, "b")
    names = expose_cli(wf).names()
    assert "a.n_cpus" in names and "b.n_cpus" in names


def test_subgraph_exposures_are_prefixed():
    sub = Workflow("sub")
    sub.add(Tagged, "t")
    sub.map_parameters("cores", ["t.n_cpus"])
    wf = Workflow("w")
    wf.add(sub)
    names = expose_cli(wf).names()
    assert "sub.cores" in names and "sub/t.n_cpus" not in names


def test_flag_collision_with_builtin_option():
    wf = Workflow("w")
    wf.add(Tagged, "t")
    wf.map_parameters("timeout", ["t.n_cpus"])
    with pytest.raises(FlagCollision, match="--timeout"):
        expose_cli(wf)
    # Dashes and underscores are interchangeable on the command line.
    wf = Workflow("w")
    wf.add(Tagged, "t")
    wf.map_parameters("log_level", ["t.n_cpus"])
    with pytest.raises(FlagCollision, match="--log-level"):
        expose_cli(wf)


@settings(max_examples=60, deadline=None)
@given(workflows())
def test_flag_schema_invariants(wf):
    from flowcycle.graph import ExposedParameter

    schema = expose_cli(wf)
    names = [n.replace("-", "_") for n in schema.names()]
    assert len(names) == len(set(names))
    covered = set()
    for flag in schema:
        target = wf.resolve_parameter(flag.target)[1]
        covered.update(id(p) for p in (target.leaves() if isinstance(target, ExposedParameter) else [target]))
    for _, node in wf.leaves():
        for param in node.parameters.values():
            assert id(param) in covered


def test_every_required_parameter_has_a_flag():
    from kinds import Required

    wf = Workflow("w")
    wf.add(Required, "r")
    flag = expose_cli(wf)["r.needed"]
    assert flag.required


def test_parser_and_apply_flags():
    wf = assemble_docking_workflow()
    parser = build_parser(wf)
    args = parser.parse_args(["--receptor", "x.pdbqt", "--dock.search_center", "1", "2", "3"])
    applied = apply_flags(wf, vars(args))
    assert sorted(applied) == ["dock.search_center", "receptor"]
    assert str(wf.get("dock").receptor.value) == "x.pdbqt"
    assert wf.get("dock").search_center.value == [1.0, 2.0, 3.0]


# -- DOT export ------------------------------------------------------------------------------


EDGE = re.compile(r'^\s*"([^"]+)" -> "([^"]+)" \[label="([^"]*)"\];$')
VERTEX = re.compile(r'^\s*"([^"]+)" \[label=')


def parse_dot(text):
    vertices, edges, clusters, stack = [], [], {}, []
    for line in text.splitlines():
        if m := re.match(r'^\s*subgraph "cluster_([^"]+)" \{$', line):
            stack.append(m.group(1))
            clusters[m.group(1)] = []
        elif line.strip() == "}" and stack:
            stack.pop()
        elif m := EDGE.match(line):
            edges.append(m.groups())
        elif m := VERTEX.match(line):
            vertices.append(m.group(1))
            for cluster in stack:
                clusters[cluster].append(m.group(1))
    return vertices, edges, clusters


def test_dot_linear():
    vertices, edges, clusters = parse_dot(export_dot(assemble_docking_workflow()))
    assert sorted(vertices) == ["dock", "embed", "result"]
    assert edges == [("dock", "result", "list<float>"), ("embed", "dock", "list<molecule>")]
    assert clusters == {}


def test_dot_cycle():
    wf = Workflow("w")
    a, b = wf.add(Blocker, "a"), wf.add(Blocker, "b")
    wf.connect_all((a.out, b.inp), (b.out, a.inp))
    vertices, edges, _ = parse_dot(export_dot(wf))
    assert len(vertices) == 2
    assert {(s, t) for s, t, _ in edges} == {("a", "b"), ("b", "a")}


def test_dot_nested_clusters():
    inner = Workflow("inner")
    inner.add(AddOne, "leaf")
    mid = Workflow("mid")
    mid.add(inner)
    mid.add(AddOne, "x")
    root = Workflow("root")
    root.add(mid)
    root.add(Collect, "top")
    root.connect("mid/inner/leaf.out", "top.inp")
    vertices, edges, clusters = parse_dot(export_dot(root))
    assert sorted(vertices) == ["mid/inner/leaf", "mid/x", "top"]
    assert clusters == {"mid": ["mid/inner/leaf", "mid/x"], "mid/inner": ["mid/inner/leaf"]}
    assert edges == [("mid/inner/leaf", "top", "int")]
