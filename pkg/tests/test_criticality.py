import itertools
import math
from fractions import Fraction as F

import pytest

from redundancy_ht import SystemModel, generators
from redundancy_ht.criticality import (CrpClass, check_stability, critical_rate,
                                       critical_rate_and_subsets_bruteforce,
                                       critical_subsets_via_construction, crp_components)
from redundancy_ht.errors import CapExceeded


def _report_and_dag(model):
    report = critical_rate_and_subsets_bruteforce(model)
    return report, crp_components(model, report.lambda_star)


def test_stability_n_model_stable():
    model = SystemModel(mu=(F(1), F(1)), lam=F(9, 10),
                        job_types=(frozenset({1, 2}), frozenset({2})), p=(F(1, 2), F(1, 2)))
    stable, witness = check_stability(model)
    assert stable and witness is None


def test_stability_boundary_unstable():
    model = SystemModel(mu=(F(1), F(1)), lam=F(1),
                        job_types=(frozenset({1, 2}), frozenset({2})), p=(F(1, 2), F(1, 2)))
    stable, witness = check_stability(model)
    assert not stable
    assert witness == frozenset({1})  # the type-{2} singleton hits equality first


def test_stability_mm1(mm1):
    assert check_stability(mm1) == (True, None)


def test_bruteforce_four_server(four_server):
    report = critical_rate_and_subsets_bruteforce(four_server)
    assert report.lambda_star == 1
    assert report.depth_K == 3
    assert report.crp_class is CrpClass.NON_CRP
    expected = {frozenset({0}), frozenset({2, 3}), frozenset({0, 2, 3}),
                frozenset({0, 1, 2, 3})}
    assert report.critical_subsets == expected


def test_bruteforce_strong_crp():
    # scenario I: complete sharing keeps the whole set as the only critical subset
    model = SystemModel(mu=(F(1), F(1)), lam=F(1, 2),
                        job_types=(frozenset({1, 2}), frozenset({2})), p=(F(3, 4), F(1, 4)))
    report = critical_rate_and_subsets_bruteforce(model)
    assert report.crp_class is CrpClass.STRONG_CRP
    assert report.lambda_star == 1  # mu_bar
    assert report.depth_K == 1
    assert report.critical_subsets == {frozenset({0, 1})}


def test_bruteforce_scenario_iii(n_model):
    report = critical_rate_and_subsets_bruteforce(n_model)
    assert report.critical_subsets == {frozenset({1}), frozenset({0, 1})}
    assert report.depth_K == 2
    assert report.crp_class is CrpClass.NON_CRP


def test_bruteforce_cap():
    types = tuple(frozenset(s) for k in (1, 2, 3)
                  for s in itertools.combinations(range(1, 8), k))[:21]
    model = SystemModel(mu=tuple(F(1) for _ in range(7)), lam=F(1, 100),
                        job_types=types, p=tuple(F(1, 21) for _ in types))
    with pytest.raises(CapExceeded):
        critical_rate_and_subsets_bruteforce(model)


def test_dinkelbach_matches_bruteforce(rng):
    for _ in range(60):
        model = generators.random_stable_model(rng, max_servers=6, max_types=6)
        report = critical_rate_and_subsets_bruteforce(model)
        assert critical_rate(model) == report.lambda_star


def test_components_four_server(four_server):
    report, dag = _report_and_dag(four_server)
    comps = {(tuple(sorted(c.types)), tuple(sorted(c.servers))) for c in dag.components}
    assert comps == {((0,), (1,)), ((2, 3), (3, 4)), ((1,), (2,))}
    assert sorted(dag.edges) == [(2, 0), (2, 1)]
    assert dag.topo_orders == ((0, 1, 2), (1, 0, 2))
    assert [sorted(v) for v in dag.subtree_types] == [[0], [2, 3], [0, 1, 2, 3]]
    assert dag.subtrees_laminar


def test_components_scenario_iii(n_model):
    report, dag = _report_and_dag(n_model)
    comps = [(tuple(sorted(c.types)), tuple(sorted(c.servers))) for c in dag.components]
    assert comps == [((1,), (2,)), ((0,), (1,))]
    assert dag.edges == frozenset({(1, 0)})
    assert dag.topo_orders == ((0, 1),)  # the {2}-component must come first


def test_components_complete_partitioning():
    n = 4
    model = SystemModel(mu=tuple(F(1) for _ in range(n)), lam=F(1, 2),
                        job_types=tuple(frozenset({i + 1}) for i in range(n)),
                        p=tuple(F(1, n) for _ in range(n)))
    report, dag = _report_and_dag(model)
    assert dag.K == n
    assert not dag.edges
    assert len(dag.topo_orders) == math.factorial(n)
    assert all(len(v) == 1 for v in dag.subtree_types)


def test_construction_four_server(four_server):
    report, dag = _report_and_dag(four_server)
    assert critical_subsets_via_construction(dag) == report.critical_subsets


def test_construction_scenario_iii(n_model):
    report, dag = _report_and_dag(n_model)
    assert critical_subsets_via_construction(dag) == {frozenset({1}), frozenset({0, 1})}


def test_construction_single_component(mm1):
    report, dag = _report_and_dag(mm1)
    assert dag.K == 1
    assert critical_subsets_via_construction(dag) == {frozenset({0})}


def test_prefix_nesting_and_full_set(four_server):
    report, dag = _report_and_dag(four_server)
    for sigma in dag.topo_orders:
        prefixes = []
        acc = set()
        for i in sigma:
            acc |= dag.components[i].types
            prefixes.append(frozenset(acc))
        for a, b in zip(prefixes, prefixes[1:]):
            assert a < b
        # lambda* equals mu_bar here, so the last prefix is the full type set
        assert prefixes[-1] == frozenset(four_server.type_indices)


def test_intersection_closure(rng):
    for _ in range(40):
        model = generators.random_stable_model(rng, max_servers=5, max_types=5)
        report = critical_rate_and_subsets_bruteforce(model)
        for a in report.critical_subsets:
            for b in report.critical_subsets:
                inter = a & b
                assert not inter or inter in report.critical_subsets


def test_crp_class_iff_depth_one(rng):
    for _ in range(60):
        model = generators.random_stable_model(rng, max_servers=5, max_types=5)
        report = critical_rate_and_subsets_bruteforce(model)
        assert (report.crp_class in (CrpClass.STRONG_CRP, CrpClass.WEAK_CRP)) == \
            (report.depth_K == 1)


def test_flow_choice_invariance(rng):
    for _ in range(25):
        model = generators.random_stable_model(rng, max_servers=6, max_types=6)
        crp_components(model, audit=True)  # raises on any disagreement


def test_non_critical_types_excluded():
    # weak CRP: only the {2}-singleton is critical; type {1,2} joins no component
    model = SystemModel(mu=(F(1), F(1)), lam=F(1, 2),
                        job_types=(frozenset({1, 2}), frozenset({2})), p=(F(1, 4), F(3, 4)))
    report, dag = _report_and_dag(model)
    assert report.crp_class is CrpClass.WEAK_CRP
    assert dag.K == 1
    assert dag.components[0].types == frozenset({1})
    assert dag.non_critical_types == frozenset({0})
    assert all(0 not in v for v in dag.subtree_types)


def test_diamond_not_laminar(diamond):
    report, dag = _report_and_dag(diamond)
    assert report.depth_K == 3 and dag.K == 3
    assert critical_subsets_via_construction(dag) == report.critical_subsets
    assert not dag.subtrees_laminar


def test_requires_exact_model(n_model):
    with pytest.raises(Exception):
        critical_rate_and_subsets_bruteforce(n_model.as_float())
