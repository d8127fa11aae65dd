import math

import pytest

from gaspower.network import NetworkError, build_network, to_topology_document


def minimal_gas_topology():
    return {
        "gas_nodes": [{"id": "S1", "kind": "source"},
                      {"id": "T1", "kind": "sink"}],
        "pipelines": [{"id": "p1", "from": "S1", "to": "T1",
                       "length_m": 10000.0, "diameter_m": 0.8,
                       "roughness_m": 1e-4, "target_dx_m": 1000.0}],
    }


def three_bus_topology():
    return {
        "power_nodes": [{"id": "N1", "kind": "Vphi"},
                        {"id": "N2", "kind": "PV"},
                        {"id": "N3", "kind": "PQ"}],
        "transmission_lines": [
            {"id": "l_12", "from": "N1", "to": "N2", "G_pu": 1.0, "B_pu": -5.0},
            {"id": "l_23", "from": "N2", "to": "N3", "G_pu": 1.0, "B_pu": -5.0},
            {"id": "l_13", "from": "N1", "to": "N3", "G_pu": 1.0, "B_pu": -5.0},
        ],
    }


def test_minimal_pipeline_network():
    net = build_network(minimal_gas_topology())
    assert len(net.gas_nodes) == 2
    assert len(net.pipelines) == 1
    assert len(net.power_nodes) == 0


def test_three_bus_counts():
    net = build_network(three_bus_topology())
    assert len(net.power_nodes) == 3
    assert len(net.lines) == 3


def test_incidence_signs():
    topo = {
        "gas_nodes": [{"id": "71", "kind": "source"},
                      {"id": "72", "kind": "sink"}],
        "pipelines": [{"id": "p_br71", "from": "71", "to": "72",
                       "length_m": 1000.0, "diameter_m": 0.5,
                       "roughness_m": 1e-4, "target_dx_m": 500.0}],
    }
    net = build_network(topo)
    assert net.incidence_sign("71", "p_br71") == +1
    assert net.incidence_sign("72", "p_br71") == -1
    with pytest.raises(NetworkError):
        net.incidence_sign("73", "p_br71")


def test_incidence_sign_product_is_minus_one():
    net = build_network(minimal_gas_topology())
    for arc in net.pipelines:
        assert net.incidence_sign(arc.from_node, arc.id) \
            * net.incidence_sign(arc.to_node, arc.id) == -1


def test_conversion_arc_must_attach_to_slack():
    topo = {**minimal_gas_topology(), **three_bus_topology()}
    topo["conversion_arcs"] = [{
        "id": "c1", "gas_node": "T1", "power_node": "N3",
        "E_power_to_gas_MW_s_m3": 43.56729,
        "E_gas_to_power_MW_s_m3": 12.56, "kappa_m3_s": 60.0}]
    with pytest.raises(NetworkError, match="must be Vphi"):
        build_network(topo)
    topo["conversion_arcs"][0]["power_node"] = "N1"
    net = build_network(topo)
    assert len(net.conversion_arcs) == 1


def test_second_conversion_arc_per_power_node_rejected():
    topo = {**minimal_gas_topology(), **three_bus_topology()}
    arc = {"id": "c1", "gas_node": "T1", "power_node": "N1",
           "E_power_to_gas_MW_s_m3": 43.56729,
           "E_gas_to_power_MW_s_m3": 12.56, "kappa_m3_s": 60.0}
    topo["conversion_arcs"] = [arc, {**arc, "id": "c2"}]
    with pytest.raises(NetworkError, match="already carries"):
        build_network(topo)


def test_error_collection():
    topo = minimal_gas_topology()
    topo["pipelines"].append({"id": "p1", "from": "S1", "to": "missing",
                              "length_m": -5.0, "diameter_m": 0.8,
                              "roughness_m": 1e-4, "target_dx_m": 100.0})
    with pytest.raises(NetworkError) as err:
        build_network(topo)
    text = str(err.value)
    assert "duplicate" in text
    assert "missing" in text
    assert "non-positive geometry" in text


def test_power_network_requires_slack():
    topo = three_bus_topology()
    topo["power_nodes"][0]["kind"] = "PQ"
    with pytest.raises(NetworkError, match="no Vphi"):
        build_network(topo)


def test_gas_node_needs_pressure_bearing_arc():
    topo = minimal_gas_topology()
    topo["gas_nodes"].append({"id": "orphan", "kind": "junction"})
    with pytest.raises(NetworkError, match="orphan"):
        build_network(topo)


def test_grid_step_rounds_to_integer_cells():
    topo = minimal_gas_topology()
    topo["pipelines"][0]["target_dx_m"] = 999.0
    net = build_network(topo)
    pipe = net.pipelines[0]
    assert pipe.n_cells == 11
    assert pipe.dx_m == pytest.approx(10000.0 / 11)
    assert pipe.dx_m <= 999.0


def test_cross_section_default_and_override():
    net = build_network(minimal_gas_topology())
    assert net.pipelines[0].area_m2 == pytest.approx(math.pi * 0.8**2 / 4)
    topo = minimal_gas_topology()
    topo["pipelines"][0]["area_m2"] = 0.75
    assert build_network(topo).pipelines[0].area_m2 == 0.75


def test_topology_round_trip():
    topo = {**minimal_gas_topology(), **three_bus_topology()}
    topo["compressors"] = [{"id": "k1", "from": "S1", "to": "T1",
                            "u_min_bar": 0.0, "u_max_bar": 120.0}]
    net = build_network(topo)
    doc = to_topology_document(net)
    net2 = build_network(doc)
    assert net2 == net
    assert to_topology_document(net2) == doc


def test_build_is_deterministic():
    a = build_network(minimal_gas_topology())
    b = build_network(minimal_gas_topology())
    assert a == b


def test_gas_arcs_sorted_by_id():
    topo = {
        "gas_nodes": [{"id": "A", "kind": "source"},
                      {"id": "B", "kind": "junction"},
                      {"id": "C", "kind": "sink"}],
        "pipelines": [
            {"id": "zz", "from": "A", "to": "B", "length_m": 1000.0,
             "diameter_m": 0.5, "roughness_m": 1e-4, "target_dx_m": 500.0},
            {"id": "aa", "from": "B", "to": "C", "length_m": 1000.0,
             "diameter_m": 0.5, "roughness_m": 1e-4, "target_dx_m": 500.0},
        ],
    }
    net = build_network(topo)
    assert [a.id for a in net.gas_arcs_at("B")] == ["aa", "zz"]
