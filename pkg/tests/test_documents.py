import orjson
import pytest

from coarse_clt.core.documents import (
    dump_graph_structure,
    graph_structure_bytes,
    load_graph_structure,
    save_graph_structure,
)
from coarse_clt.core.graph import count_paths
from coarse_clt.exceptions import AutomatonFormatException


def golden_mean_document():
    return {
        "vertices": 2,
        "initial": 0,
        "group": {"kind": "free", "generators": ["a", "b"]},
        "edges": [
            {"from": 0, "to": 0, "label": "a"},
            {"from": 0, "to": 1, "label": "b"},
            {"from": 1, "to": 0, "label": "a"},
        ],
        "name": "golden-mean",
    }


def test_load_from_dict_and_bytes():
    doc = golden_mean_document()
    structure = load_graph_structure(doc)
    assert structure.num_vertices == 2
    assert structure.edges[1].label == ("b",)
    again = load_graph_structure(orjson.dumps(doc))
    assert count_paths(again, 0, 6) == count_paths(structure, 0, 6) == 21


def test_product_labels_are_split():
    doc = golden_mean_document()
    doc["edges"][2]["label"] = "a b"
    structure = load_graph_structure(doc)
    assert structure.edges[2].label == ("a", "b")
    assert structure.label_length is None


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["edges"].append({"from": 0, "to": 5, "label": "a"}), "dangling vertex 5"),
        (lambda d: d.update(initial=3), "dangling vertex 3"),
        (lambda d: d["edges"].append({"from": 0, "to": 1, "label": "c"}), "unknown label 'c'"),
        (lambda d: d["edges"].append({"from": 0, "to": 1, "label": "  "}), "empty label"),
        (lambda d: d.pop("group"), "group"),
        (lambda d: d["group"].update(kind="hyperbolic"), "group.kind"),
    ],
)
def test_malformed_documents(mutate, message):
    doc = golden_mean_document()
    mutate(doc)
    with pytest.raises(AutomatonFormatException) as excinfo:
        load_graph_structure(doc)
    assert message in excinfo.value.detail


def test_malformed_json_bytes():
    with pytest.raises(AutomatonFormatException):
        load_graph_structure(b"{not json")


def test_missing_file(tmp_path):
    with pytest.raises(AutomatonFormatException):
        load_graph_structure(tmp_path / "missing.json")


def test_save_and_reload(tmp_path, golden_mean):
    target = save_graph_structure(golden_mean, tmp_path / "gm.json")
    reloaded = load_graph_structure(target)
    assert [e.label for e in reloaded.edges] == [e.label for e in golden_mean.edges]
    assert reloaded.group.kind == "free"
    assert graph_structure_bytes(reloaded) == target.read_bytes()


def test_dump_uses_edge_aliases(golden_mean):
    data = orjson.loads(graph_structure_bytes(golden_mean))
    assert data["edges"][0] == {"from": 0, "to": 0, "label": "a"}
    assert dump_graph_structure(golden_mean).group.generators == ["a", "b"]
