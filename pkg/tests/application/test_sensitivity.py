"""测试雅可比敏感度与衰减比较"""
import numpy as np
import pytest
import scipy.sparse as sp

from DrewLab.application.graph_operators import operators_for
from DrewLab.application.models import DrewModel
from DrewLab.application.sensitivity import decay_comparison, jacobian_norms
from DrewLab.domain.errors import DrewValidationError
from DrewLab.domain.hop_index import compute_hop_index
from DrewLab.domain.model_config import Architecture, ModelConfig
from DrewLab.domain.results import NEVER, first_interaction
from DrewLab.domain.schedule import DelayPolicy
from DrewLab.infrastructure.graph_generators import binary_tree, path_graph
from tests.helpers import FD_STEP, random_connected_graph

FULL_DELAY_MODELS = [
    (Architecture.GCN, None),
    (Architecture.DREW_GCN, DelayPolicy(1)),
    (Architecture.DREW_GIN, DelayPolicy(1)),
    (Architecture.DREW_GATEDGCN, DelayPolicy(1)),
]


def _model(arch: Architecture, layers: int, nu: DelayPolicy | None = None, **kw):
    config = ModelConfig(
        arch=arch,
        layers=layers,
        hidden=kw.pop("hidden", 32),
        in_dim=3,
        out_dim=2,
        nu=nu or DelayPolicy(),
        **kw,
    )
    return DrewModel.create(config, seed=0)


def _matrix_power(m: sp.csr_matrix, r: int) -> sp.csr_matrix:
    out = sp.identity(m.shape[0], format="csr")
    for _ in range(r):
        out = out @ m
    return out


def _report(model, g, rng, nodes=None, **kwargs):
    x = rng.standard_normal((g.n, 3))
    return jacobian_norms(model, g, None, x, nodes=nodes, **kwargs)


def _numeric_sensitivity(model, g, x, layer: int) -> np.ndarray:
    """中心差分计算 S[i][j] = Σ|∂h_i/∂x_j|"""
    ops = operators_for(g)
    out = np.zeros((g.n, g.n))
    for j in range(g.n):
        for c in range(x.shape[1]):
            plus, minus = x.copy(), x.copy()
            plus[j, c] += FD_STEP
            minus[j, c] -= FD_STEP
            hp = model.forward(ops, plus).states[layer].data
            hm = model.forward(ops, minus).states[layer].data
            out[:, j] += np.abs((hp - hm) / (2 * FD_STEP)).sum(axis=1)
    return out


class TestJacobianNorms:
    """敏感度矩阵测试"""

    @pytest.mark.parametrize("arch", list(Architecture))
    def test_matches_finite_differences(self, arch, graph8, rng):
        """测试 S 与有限差分一致"""
        model = _model(arch, 3, DelayPolicy(1), hidden=4)
        x = rng.standard_normal((graph8.n, 3))
        report = jacobian_norms(model, graph8, None, x)
        numeric = _numeric_sensitivity(model, graph8, x, 3)
        np.testing.assert_allclose(report.matrix, numeric, rtol=1e-4, atol=1e-7)

    @pytest.mark.parametrize(("arch", "nu"), FULL_DELAY_MODELS)
    def test_zero_beyond_reach(self, arch, nu, p4, rng):
        """测试 L < d(i,j) 时 S[i][j] = 0"""
        report = _report(_model(arch, 2, nu), p4, rng)
        assert report.matrix[0, 3] == 0.0
        assert report.matrix[3, 0] == 0.0
        assert report.matrix[0, 2] > 0.0

    def test_diagonal_positive(self, graph8, rng):
        """测试对角线为正（残差连接）"""
        report = _report(_model(Architecture.DREW_GCN, 3), graph8, rng)
        assert np.all(np.diag(report.matrix) > 0)
        assert np.all(report.per_layer >= 0)

    def test_threads_give_same_result(self, graph8, rng):
        """测试并行计算结果一致"""
        model = _model(Architecture.DREW_GIN, 2, hidden=6)
        x = rng.standard_normal((graph8.n, 3))
        serial = jacobian_norms(model, graph8, None, x)
        parallel = jacobian_norms(model, graph8, None, x, threads=4)
        assert np.array_equal(serial.per_layer, parallel.per_layer)

    def test_selected_rows(self, graph8, rng):
        """测试只计算指定节点的行"""
        report = _report(_model(Architecture.GCN, 2), graph8, rng, nodes=[2])
        assert report.nodes == (2,)
        assert not np.delete(report.matrix, 2, axis=0).any()
        assert report.matrix[2, 2] > 0

    def test_upto_layer(self, p4, rng):
        """测试只计算到指定层"""
        model = _model(Architecture.GCN, 3)
        report = jacobian_norms(model, p4, None, rng.standard_normal((4, 3)), 1)
        assert report.layers == 1
        with pytest.raises(DrewValidationError):
            jacobian_norms(model, p4, None, np.ones((4, 3)), 4)

    def test_node_out_of_range(self, p4):
        model = _model(Architecture.GCN, 1)
        with pytest.raises(DrewValidationError):
            jacobian_norms(model, p4, None, np.ones((4, 3)), nodes=[4])

    def test_report_dict(self, p4, rng):
        """测试报告的首次交互条目"""
        report = _report(_model(Architecture.GCN, 3), p4, rng, nodes=[0], seed=9)
        data = report.to_dict()
        assert data["seed"] == 9
        assert data["layers"] == 3
        entries = {e["j"]: e for e in data["first_interaction"]}
        assert entries[3] == {"i": 0, "j": 3, "distance": 3, "layer": 3}


class TestFirstInteraction:
    """首次交互层测试"""

    @pytest.mark.parametrize(("arch", "nu"), FULL_DELAY_MODELS)
    def test_path_interacts_at_distance(self, arch, nu, rng):
        """测试经典模型和 ν=1 的 DRew 在 d(i,j) 层首次交互"""
        g = path_graph(6)
        report = _report(_model(arch, 5, nu), g, rng, nodes=[0])
        for j in range(6):
            assert first_interaction(report, 0, j) == j

    def test_no_delay_interacts_earlier(self, p4, rng):
        """测试 ν=∞ 时 P4 的端点在第 2 层交互，早于距离 3"""
        report = _report(_model(Architecture.DREW_GCN, 3), p4, rng, nodes=[0])
        assert first_interaction(report, 0, 3) == 2

    def test_sp_gcn_reach(self, rng):
        """测试 SP-GCN 在 ⌈d/k_max⌉ 层交互"""
        g = path_graph(7)
        model = _model(Architecture.SP_GCN, 3, k_cap=2)
        report = _report(model, g, rng, nodes=[0])
        assert [first_interaction(report, 0, j) for j in range(7)] == [
            0, 1, 1, 2, 2, 3, 3,
        ]

    def test_unreachable_pair(self, two_c3, rng):
        """测试不相连的节点对永不交互"""
        report = _report(_model(Architecture.DREW_GCN, 2), two_c3, rng, nodes=[0])
        assert first_interaction(report, 0, 4) == NEVER
        assert report.matrix[0, 4] == 0.0

    def _check_random_graphs(self, count: int, rng: np.random.Generator) -> None:
        for seed in range(count):
            n = int(rng.integers(4, 21))
            g = random_connected_graph(n, seed=seed, p=0.08)
            hi = compute_hop_index(g, n - 1)
            i = int(rng.integers(n))
            layers = int(min(5, hi.dist[i].max()))
            x = rng.standard_normal((n, 3))
            for arch, nu in FULL_DELAY_MODELS:
                model = _model(arch, layers, nu)
                report = jacobian_norms(model, g, hi, x, nodes=[i])
                for j in range(n):
                    d = int(hi.dist[i, j])
                    if d <= layers:
                        assert first_interaction(report, i, j) == d, (seed, i, j)
                    else:
                        assert report.matrix[i, j] == 0.0, (seed, i, j)

    def test_random_graphs(self, rng):
        """测试随机图上首次交互层等于距离"""
        self._check_random_graphs(10, rng)

    @pytest.mark.slow
    def test_random_graphs_full(self, rng):
        """测试 100 个随机图（n ≤ 20）"""
        self._check_random_graphs(100, rng)


class TestDecayComparison:
    """经典与 DRew 的敏感度衰减比较"""

    def test_binary_tree_ratio(self):
        """测试二叉树上 DRew/经典 比值为 4^(r-1)"""
        table = decay_comparison("binary_tree", range(1, 6))
        for row in table.rows:
            assert row.ratio == pytest.approx(4.0 ** (row.r - 1), rel=1e-9)
        assert table.monotone
        assert table.direct_bound

    def test_binary_tree_classical_matches_matrix_power(self):
        """测试经典敏感度等于 (Γ¹)^r 的对应元素"""
        table = decay_comparison("binary_tree", range(2, 7))
        gamma = operators_for(binary_tree(6), k_max=1).gamma_at(1)
        for row in table.rows:
            expected = _matrix_power(gamma, row.r)[row.source, row.target]
            assert abs(row.classical - expected) <= 1e-10 * expected

    def test_binary_tree_direct_term(self):
        """测试直接项为 1/sqrt(deg(i)·deg(j))"""
        table = decay_comparison("binary_tree", range(2, 5))
        for row in table.rows:
            target_deg = 1 if row.r == 4 else 3
            assert row.direct == pytest.approx(1 / np.sqrt(2 * target_deg), rel=1e-12)
            assert row.drew >= row.direct

    def test_cycle_closed_form(self):
        """测试环 C_2r 上的闭式结果"""
        table = decay_comparison("cycle", range(2, 7))
        for row in table.rows:
            r = row.r
            assert row.classical == pytest.approx(2.0 ** (1 - r), rel=1e-12)
            assert row.drew == pytest.approx(1.5 ** (r - 1) - 0.5, rel=1e-12)
            assert row.direct == pytest.approx(0.5, rel=1e-12)
            assert row.ratio == pytest.approx(3.0 ** (r - 1) - 2.0 ** (r - 2), rel=1e-9)
        assert table.monotone

    def test_dict_layout(self):
        data = decay_comparison("cycle", [2, 3]).to_dict()
        assert data["family"] == "cycle"
        assert [row["r"] for row in data["rows"]] == [2, 3]

    @pytest.mark.parametrize(
        ("family", "r_range"),
        [("grid", [2]), ("cycle", [1, 2]), ("cycle", []), ("binary_tree", [0])],
    )
    def test_invalid(self, family, r_range):
        with pytest.raises(DrewValidationError):
            decay_comparison(family, r_range)
