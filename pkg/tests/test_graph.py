import copy

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowcycle import LogResult, Workflow, registry, validate
from flowcycle.demos import EmbedSmiles, SyntheticDock, assemble_docking_workflow
from flowcycle.errors import (
    AlreadyConnected,
    Ambiguous,
    CycleInTree,
    DirectionError,
    DuplicateName,
    FrozenError,
    GraphError,
    HeterogeneousTypes,
    NoMatch,
    PathError,
    TypeMismatch,
    UnknownTarget,
)
from flowcycle.graph import NodeRegistry, PortType, value_matches
from flowcycle.patterns import make_parallel

from kinds import AddOne, Blocker, Collect, CollectAny, FloatSink, Identity, Required, StrSink, Tagged, TwoFloatSink
from strategies import workflows

# -- construction ----------------------------------------------------------------


def test_docking_workflow_has_three_leaves_and_two_edges():
    wf = Workflow("docking")
    embed = wf.add(EmbedSmiles, "embed", smiles=["Nc1nc(F)nc(c12)n(CCCC)c(n2)Cc3cc(OC)ccc3OC"])
    dock = wf.add(SyntheticDock, "dock")
    result = wf.add(LogResult, "result", dtype="list<float>")
    edges = wf.connect_all((embed.out, dock.inp), (dock.out, result.inp))
    assert [p for p, _ in wf.leaves()] == ["embed", "dock", "result"]
    assert len(edges) == 2
    assert edges[0].type_tag == "list<molecule>"


def test_single_node_depth():
    wf = Workflow("w")
    assert wf.depth() == 0
    wf.add(AddOne, "a")
    assert wf.depth() == 1


def test_duplicate_name():
    wf = Workflow("w")
    wf.add(AddOne, "a")
    with pytest.raises(DuplicateName):
        wf.add(Identity, "a")


def test_subgraph_depth_and_paths():
    inner = Workflow("inner")
    inner.add(AddOne, "leaf")
    mid = Workflow("mid")
    mid.add(inner)
    mid.add(Identity, "other")
    root = Workflow("root")
    root.add(mid)
    root.add(Collect, "top")
    assert root.depth() == 3
    assert [p for p, _ in root.leaves()] == ["mid/inner/leaf", "mid/other", "top"]
    assert root.get("mid/inner/leaf").path == "mid/inner/leaf"
    _, port = root.resolve_port("mid/inner/leaf.out")
    assert port is root["mid/inner/leaf"].out


def test_parallel_subgraph_in_parent_has_depth_two():
    root = Workflow("root")
    root.add(make_parallel(Identity, 2))
    assert root.depth() == 2


def test_same_subgraph_twice_is_cycle_in_tree():
    root = Workflow("root")
    sub = Workflow("sub")
    root.add(sub)
    with pytest.raises(CycleInTree):
        Workflow("other").add(sub)
    with pytest.raises(CycleInTree):
        sub.add(root)


def test_subgraph_cannot_contain_itself():
    sub = Workflow("sub")
    with pytest.raises(CycleInTree):
        sub.add(sub)


# -- connections ------------------------------------------------------------------


def test_type_mismatch():
    wf = Workflow("w")
    a = wf.add(AddOne, "a")
    s = wf.add(StrSink, "s")
    with pytest.raises(TypeMismatch):
        wf.connect(a.out, s.s)


def test_wildcard_accepts_anything():
    wf = Workflow("w")
    a = wf.add(AddOne, "a")
    c = wf.add(CollectAny, "c")
    edge = wf.connect(a.out, c.inp)
    assert edge.type_tag == "int"


def test_direction_and_already_connected():
    wf = Workflow("w")
    a = wf.add(AddOne, "a")
    b = wf.add(AddOne, "b")
    with pytest.raises(DirectionError):
        wf.connect(a.inp, b.inp)
    wf.connect(a.out, b.inp)
    c = wf.add(AddOne, "c")
    with pytest.raises(AlreadyConnected):
        wf.connect(a.out, c.inp)


def test_connect_by_path_strings():
    wf = Workflow("w")
    wf.add(AddOne, "a")
    wf.add(Collect, "b")
    edge = wf.connect("a.out", "b.inp", capacity=3)
    assert (edge.source, edge.target, edge.capacity) == ("a.out", "b.inp", 3)
    with pytest.raises(PathError):
        wf.connect("a.nope", "b.inp")


def test_bad_capacity():
    wf = Workflow("w")
    a, b = wf.add(AddOne, "a"), wf.add(Collect, "b")
    with pytest.raises(ValueError):
        wf.connect(a.out, b.inp, capacity=0)


def test_connect_all_is_atomic():
    wf = Workflow("w")
    a = wf.add(AddOne, "a")
    b = wf.add(AddOne, "b")
    s = wf.add(StrSink, "s")
    with pytest.raises(TypeMismatch) as info:
        wf.connect_all((a.out, b.inp), (b.out, s.s))
    assert info.value.index == 1
    assert wf.channels == []
    assert not a.out.connected and not b.inp.connected


def test_connect_all_rejects_reuse_within_batch():
    wf = Workflow("w")
    a = wf.add(AddOne, "a")
    b, c = wf.add(Collect, "b"), wf.add(Collect, "c")
    with pytest.raises(AlreadyConnected):
        wf.connect_all((a.out, b.inp), (a.out, c.inp))
    assert wf.channels == []


def test_connect_all_empty():
    wf = Workflow("w")
    assert wf.connect_all() == []
    assert wf.connect_all([]) == []


def test_auto_connect():
    wf = Workflow("w")
    t = wf.add(Tagged, "t")
    f = wf.add(FloatSink, "f")
    edge = wf.auto_connect(t, f)
    assert (edge.source, edge.target) == ("t.o_float", "f.a")


def test_auto_connect_ambiguous_and_no_match():
    wf = Workflow("w")
    t = wf.add(Tagged, "t")
    two = wf.add(TwoFloatSink, "two")
    with pytest.raises(Ambiguous):
        wf.auto_connect(t, two)
    s = wf.add(StrSink, "s")
    with pytest.raises(NoMatch):
        wf.auto_connect(t, s)


def test_exposed_ports_on_subgraph():
    sub = Workflow("sub")
    x = sub.add(AddOne, "x")
    sub.expose_port("inp", x.inp)
    sub.expose_port("out", x.out)
    root = Workflow("root")
    root.add(sub)
    a = root.add(AddOne, "a")
    c = root.add(Collect, "c")
    root.connect(a.out, "sub.inp")
    root.auto_connect(sub, c)
    assert x.inp.connected and x.out.connected


# -- parameters ---------------------------------------------------------------------


def test_map_parameters_fan_out():
    wf = Workflow("w")
    a = wf.add(Tagged, "a")
    b = wf.add(Tagged, "b")
    wf.map_parameters("n_cpus", [("a", "n_cpus"), ("b", "n_cpus")])
    wf.set("n_cpus", 4)
    assert a.n_cpus.value == b.n_cpus.value == 4
    assert "n_cpus" in wf.parameters


def test_map_parameters_rename():
    wf = Workflow("w")
    a = wf.add(Tagged, "a")
    wf.map_parameters("cores", ["a.n_cpus"])
    wf.set("cores", 3)
    assert a.n_cpus.value == 3


def test_map_parameters_errors():
    wf = Workflow("w")
    wf.add(Tagged, "a")
    with pytest.raises(HeterogeneousTypes):
        wf.map_parameters("mixed", ["a.n_cpus", "a.label"])
    with pytest.raises(UnknownTarget):
        wf.map_parameters("ghost", ["a.nothing"])
    with pytest.raises(UnknownTarget):
        wf.map_parameters("ghost", ["nobody.n_cpus"])


def test_parameter_type_checked_on_set():
    node = Tagged("t")
    with pytest.raises(TypeError):
        node.n_cpus.set("four")
    with pytest.raises(TypeError):
        node.n_cpus.set(True)


def test_frozen_workflow_rejects_changes():
    wf = Workflow("w")
    a = wf.add(Tagged, "a")
    wf.freeze()
    with pytest.raises(FrozenError):
        a.n_cpus.set(2)
    with pytest.raises(FrozenError):
        wf.add(AddOne, "b")
    wf.unfreeze()
    a.n_cpus.set(2)


def test_required_parameter_is_not_defaulted():
    node = Required("r")
    assert node.needed.required and not node.needed.has_default
    assert not node.needed.satisfied


def test_value_matches():
    assert value_matches("float", 1)
    assert not value_matches("int", 1.5)
    assert value_matches("list<int>", [1, 2])
    assert not value_matches("list<int>", [1, "a"])
    assert value_matches("custom-tag", object())
    assert PortType("any").compatible(PortType("int"))
    assert not PortType("int").compatible(PortType("str"))


# -- validation ------------------------------------------------------------------------


def test_validate_docking_with_and_without_receptor(tmp_path):
    wf = assemble_docking_workflow()
    report = validate(wf)
    assert not report.ok
    assert [(i.path, i.message) for i in report.errors] == [("dock.receptor", "required parameter unset")]
    wf.set("receptor", str(tmp_path / "r.pdbqt"))
    assert validate(wf).ok


def test_validate_cycle_is_ok():
    wf = Workflow("w")
    a, b = wf.add(Blocker, "a"), wf.add(Blocker, "b")
    wf.connect_all((a.out, b.inp), (b.out, a.inp))
    report = validate(wf)
    assert report.ok and report.issues == []


def test_validate_reports_unconnected_input_and_warns_on_output():
    wf = Workflow("w")
    wf.add(AddOne, "a")
    report = validate(wf)
    assert [(i.severity, i.path) for i in report.issues] == [("error", "a.inp"), ("warning", "a.out")]


def test_validate_unresolvable_kind():
    wf = Workflow("w")
    wf.add(AddOne, "a")
    report = validate(wf, NodeRegistry())
    assert any("unresolvable node kind" in i.message for i in report.errors)


def test_validate_dangling_endpoint():
    wf = Workflow("w")
    a, b = wf.add(AddOne, "a"), wf.add(Collect, "b")
    wf.connect(a.out, b.inp)
    wf.add(AddOne, "src")
    wf.connect("src.out", "a.inp")
    del wf.children["b"]
    report = validate(wf)
    assert any("dangling" in i.message for i in report.errors)


# -- properties -------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(workflows())
def test_tree_property(wf):
    paths = [p for p, _ in wf.walk()]
    objs = [id(c) for _, c in wf.walk()]
    assert len(set(paths)) == len(paths)
    assert len(set(objs)) == len(objs)
    for path, child in wf.walk():
        assert wf.get(path) is child
        chain, node = [], child
        while node is not None:
            chain.append(node)
            node = node.parent
        assert chain[-1] is wf
        assert child.parent.children[child.name] is child


@settings(max_examples=60, deadline=None)
@given(workflows(), st.data())
def test_connection_bijectivity_and_type_safety(wf, data):
    leaves = [n for _, n in wf.leaves()]
    outs = [p for n in leaves for p in n.outputs.values()]
    ins = [p for n in leaves for p in n.inputs.values()]
    for _ in range(data.draw(st.integers(0, 5))):
        if not outs or not ins:
            break
        pairs = data.draw(st.lists(st.tuples(st.sampled_from(outs), st.sampled_from(ins)), max_size=3))
        try:
            wf.connect_all(pairs)
        except GraphError:
            pass
    edges = list(wf.all_channels())
    n_in = sum(p.connected for p in ins)
    n_out = sum(p.connected for p in outs)
    assert n_in == n_out == len(edges)
    for edge in edges:
        assert edge.source_port.port_type.compatible(edge.target_port.port_type)


@settings(max_examples=60, deadline=None)
@given(workflows())
def test_validate_is_pure(wf):
    from flowcycle.io import serialize

    before = serialize(wf)
    first, second = validate(wf), validate(wf)
    assert first == second
    assert serialize(wf) == before


@settings(max_examples=60, deadline=None)
@given(workflows(), st.data())
def test_auto_connect_determinism(wf, data):
    children = [c for _, c in wf.walk() if c.parent is wf]
    a = data.draw(st.sampled_from(children))
    b = data.draw(st.sampled_from(children))

    def attempt():
        clone = copy.deepcopy(wf)
        try:
            edge = clone.auto_connect(clone.children[a.name], clone.children[b.name])
        except GraphError as exc:
            return type(exc).__name__, str(exc)
        return edge.source, edge.target

    assert attempt() == attempt() == attempt()


def test_registry_knows_builtin_kinds():
    for kind in ("LoadData", "LogResult", "Copy", "Merge", "RoundRobinDistribute", "ConditionalRouter", "RunCommand"):
        assert kind in registry
