import io

import numpy as np
import pytest

from coposhier.matrices import horn
from coposhier.sdp import SdpError, SdpProblem, SolverOptions, Status, read_sdpa, solve, write_sdpa
from coposhier.sos.cones import ConeId
from coposhier.sos.formulate import formulate, formulate_bound, target_scale

from oracles import admm_sdp
from sdp_cases import N_RANDOM, random_instances, to_problem


class TestExamples:
    def test_trace_minimisation(self):
        p = SdpProblem([2], [1.0], [[(0, 0, 0, 1.0)]], c_blocks=[np.eye(2)])
        sol = solve(p)
        assert sol.status == Status.OPTIMAL
        assert sol.primal_objective == pytest.approx(1.0, abs=1e-8)
        assert np.allclose(sol.X[0], [[1, 0], [0, 0]], atol=1e-6)
        assert sol.primal_residual <= 1e-9 and sol.dual_residual <= 1e-9 and sol.gap <= 1e-9

    def test_fixed_gram_margin(self):
        # gram of (x1 - x2)^2 in the basis {x1, x2}; the coefficient of x1 x2 is 2 X[0, 1]
        p = SdpProblem([2], [1.0, -2.0, 1.0], [[(0, 0, 0, 1.0), (1, 0, 1, 2.0), (2, 1, 1, 1.0)]], feasibility=True)
        sol = solve(p)
        assert sol.lam == pytest.approx(0.0, abs=1e-8)
        assert np.allclose(sol.X[0], [[1, -1], [-1, 1]], atol=1e-7)

    def test_sign_obstruction(self):
        p = SdpProblem([1], [-1.0], [[(0, 0, 0, 1.0)]], feasibility=True)
        sol = solve(p)
        assert sol.lam == pytest.approx(-1.0, abs=1e-8)
        assert sol.status == Status.PRIMAL_INFEASIBLE
        w = sol.witness
        blocks, _, _ = p.adjoint(w)
        assert blocks[0][0, 0] > 0
        assert p.b @ w < 0

    def test_inconsistent_equalities(self):
        p = SdpProblem([2], [1.0, 2.0], [[(0, 0, 0, 1.0), (1, 0, 0, 1.0)]], c_blocks=[np.eye(2)])
        sol = solve(p)
        assert sol.status == Status.PRIMAL_INFEASIBLE
        blocks, _, _ = p.adjoint(sol.farkas)
        assert np.allclose(blocks[0], 0) and p.b @ sol.farkas == pytest.approx(-1.0)

    def test_bad_entry(self):
        with pytest.raises(SdpError):
            SdpProblem([2], [1.0], [[(0, 1, 0, 1.0)]])
        with pytest.raises(SdpError):
            SdpProblem([2], [1.0], [[(3, 0, 0, 1.0)]])


class TestAgainstOracle:
    @pytest.mark.parametrize("k", range(N_RANDOM))
    def test_random_feasible(self, k):
        d = random_instances()[k]
        sol = solve(to_problem(d))
        assert sol.status == Status.OPTIMAL
        oracle_value = admm_sdp(d["dims"], d["mats"], d["b"], d["c_blocks"], d["n_lp"], d["a_lp"], d["c_lp"])[0]
        assert abs(sol.primal_objective - oracle_value) <= 1e-8 * (1 + abs(oracle_value))
        # the construction also pins the optimum analytically
        assert abs(d["value"] - oracle_value) <= 1e-8 * (1 + abs(oracle_value))
        assert sol.primal_residual <= 1e-9 and sol.gap <= 1e-9


class TestProperties:
    def test_deterministic(self):
        d = random_instances(seed=5, count=1)[0]
        a, b = solve(to_problem(d)), solve(to_problem(d))
        assert a.iterations == b.iterations
        assert all(np.array_equal(x, y) for x, y in zip(a.X, b.X))
        assert np.array_equal(a.y, b.y)
        prob = formulate(horn(), ConeId("K", 1))
        s1 = solve(prob.lower(target_scale(prob)))
        s2 = solve(prob.lower(target_scale(prob)))
        assert s1.iterations == s2.iterations and s1.lam == s2.lam and np.array_equal(s1.X[0], s2.X[0])

    @pytest.mark.parametrize("k", range(5))
    @pytest.mark.parametrize("fb, fc", [(1e3, 1.0), (1.0, 1e3), (1e3, 1e3)])
    def test_scaling_by_thousand(self, k, fb, fc):
        # the optimal value is bilinear in (b, c)
        d = random_instances(seed=11, count=5)[k]
        v1 = solve(to_problem(d)).primal_objective
        v2 = solve(to_problem(d, fb, fc)).primal_objective
        want = fb * fc * v1
        assert abs(v2 - want) <= 1e-6 * abs(want)

    def test_iteration_limit(self):
        d = random_instances(seed=3, count=1)[0]
        sol = solve(to_problem(d), SolverOptions(max_iters=2))
        assert sol.status == Status.NUMERICAL_TROUBLE


class TestSdpaFormat:
    @pytest.mark.parametrize(
        "make",
        [
            lambda: formulate(horn(), ConeId("K", 0)),
            lambda: formulate(horn(), ConeId("LASD", 2)),
            lambda: formulate_bound(horn(), 3),
        ],
    )
    def test_roundtrip_gives_same_solution(self, make):
        prob = make()
        p = prob.lower(target_scale(prob))
        buf = io.StringIO()
        write_sdpa(p, buf)
        q = read_sdpa(io.StringIO(buf.getvalue()))
        assert q.block_dims == p.block_dims and q.n_lp == p.n_lp and q.n_free == p.n_free
        a, b = solve(p), solve(q)
        assert a.status == b.status
        assert a.primal_objective == pytest.approx(b.primal_objective, abs=1e-10)

    def test_random_problem_roundtrip(self):
        d = random_instances(seed=9, count=1)[0]
        p = to_problem(d)
        buf = io.StringIO()
        write_sdpa(p, buf)
        q = read_sdpa(io.StringIO(buf.getvalue()))
        assert solve(q).primal_objective == pytest.approx(d["value"], abs=1e-8)

    def test_plain_sdpa_file(self):
        # min X11 + X22 s.t. X12 = 1 (one 2x2 block); optimum 2
        text = "\n".join(["\"toy", "1", "1", "2", "1.0", "0 1 1 1 -1", "0 1 2 2 -1", "1 1 1 2 0.5"])
        q = read_sdpa(io.StringIO(text))
        assert solve(q).primal_objective == pytest.approx(2.0, abs=1e-8)

    def test_malformed(self):
        with pytest.raises(SdpError):
            read_sdpa(io.StringIO("2\n1\n2\n1.0\n"))
