"""
Tests for the validate, solve and audit pipelines.
"""
import json

import pytest

from src.models.config import RunConfig
from src.models.report import EXIT_CHECK_FAILURE, EXIT_INPUT_ERROR, EXIT_PASS, CheckStatus
from src.nsdp.commands import execute
from src.nsdp.exceptions import IllConditionedError, LPError

from .conftest import MODELS, PROGRAMS


def run(command, model, program=None, **overrides):
    return execute(
        RunConfig(
            command=command,
            model_path=MODELS / model,
            program_path=None if program is None else PROGRAMS / program,
            **overrides,
        )
    )


def statuses(report, check):
    return [o.status for o in report.outcomes if o.check == check]


class TestValidate:
    def test_deterministic(self):
        """A deterministic model validates and carries its SHA-256 digest."""
        report = run("validate", "quadratic.json")
        assert report.exit_code == EXIT_PASS
        assert statuses(report, "summability") == [CheckStatus.PASS]
        assert report.model_digest is not None and len(report.model_digest) == 64

    def test_two_atom(self):
        """Each atom of a stochastic model gets its own envelope outcome."""
        report = run("validate", "two_atom.json")
        assert report.exit_code == EXIT_PASS
        assert statuses(report, "envelope") == [CheckStatus.PASS, CheckStatus.PASS]
        assert [o.atom for o in report.outcomes if o.check == "envelope"] == ["up", "down"]

    def test_divergent_bounds(self):
        """Divergent stage bounds fail the summability check."""
        report = run("validate", "divergent.json")
        assert report.exit_code == EXIT_CHECK_FAILURE
        failure = report.failures[0]
        assert failure.check == "summability"
        assert "summability assumption fails at stage 0" in failure.summary

    def test_malformed_json(self, tmp_path):
        """A JSON syntax error is an input error with its line."""
        path = tmp_path / "broken.json"
        path.write_text('{\n  "stages": [,\n}')
        report = execute(RunConfig(command="validate", model_path=path))
        assert report.exit_code == EXIT_INPUT_ERROR
        assert report.results["error_position"]["line"] == 2

    def test_missing_file(self, tmp_path):
        """A missing model file is an input error."""
        report = execute(RunConfig(command="validate", model_path=tmp_path / "absent.json"))
        assert report.exit_code == EXIT_INPUT_ERROR
        assert report.error is not None


class TestSolve:
    def test_truncated_horizon(self):
        """A geometric model is truncated once the tail bound drops below epsilon."""
        report = run("solve", "geometric.json")
        assert report.exit_code == EXIT_PASS
        assert report.results["T_eff"] == 20
        assert report.results["horizon_mode"] == "truncated"
        assert report.results["tail_error"] <= 1e-6

    def test_epsilon_override(self):
        """A looser epsilon shortens the effective horizon."""
        report = run("solve", "geometric.json", epsilon=1e-3)
        assert report.results["T_eff"] == 10

    def test_export_tsv(self, tmp_path):
        """The value table exports one TSV row per stage and node."""
        out = tmp_path / "value.tsv"
        report = run("solve", "quadratic.json", output_path=out)
        assert report.results["table"] == str(out)
        lines = out.read_text().splitlines()
        assert lines[0] == "stage\tnode\tvalue\tpolicy"
        assert len(lines) == 1 + 2 * 9

    def test_export_json(self, tmp_path):
        """The value table exports as JSON with one entry per stage."""
        out = tmp_path / "value.json"
        run("solve", "quadratic.json", output_path=out)
        data = json.loads(out.read_text())
        assert data["T_eff"] == 1
        assert len(data["stages"]) == 2

    def test_stochastic_model_is_reduced(self):
        """A stochastic model is solved through its deterministic reduction."""
        report = run("solve", "two_atom.json")
        assert report.exit_code == EXIT_PASS
        assert report.results["T_eff"] == 1
        assert report.results["v0_min"] == pytest.approx(0.0, abs=1e-12)

    def test_kinked_cost(self, tmp_path):
        """A kinked cost solves to the exact value and policy."""
        out = tmp_path / "value.json"
        report = run("solve", "abs.json", output_path=out)
        assert report.exit_code == EXIT_PASS
        assert report.results["v0_min"] == pytest.approx(0.0, abs=1e-12)
        nodes = json.loads(out.read_text())["stages"][0]["nodes"]
        assert nodes[0]["value"] == pytest.approx(1.0)
        assert nodes[0]["policy"] == [[0.5]]
        assert nodes[4]["value"] == pytest.approx(0.0, abs=1e-12)

    def test_divergent_model_is_not_solved(self):
        """Failed summability stops the solve before any table is built."""
        report = run("solve", "divergent.json")
        assert report.exit_code == EXIT_CHECK_FAILURE
        assert "T_eff" not in report.results


class TestAudit:
    def test_optimal_program(self):
        """The optimal program passes every check."""
        report = run(
            "audit", "quadratic.json", "quadratic_optimal.json", sampling={"viability_samples": 8}
        )
        assert report.exit_code == EXIT_PASS, [o.summary for o in report.failures]
        assert statuses(report, "bellman") == [CheckStatus.PASS]
        assert statuses(report, "euler") == [CheckStatus.PASS, CheckStatus.PASS]
        assert report.results["program_start_value"] == pytest.approx(0.0, abs=1e-12)

    def test_perturbed_program(self):
        """A perturbed program fails the Euler check with a separator."""
        report = run(
            "audit", "quadratic.json", "quadratic_perturbed.json", checks=["bellman", "euler"]
        )
        assert report.exit_code == EXIT_CHECK_FAILURE
        euler = [o for o in report.outcomes if o.check == "euler"][0]
        assert euler.status == CheckStatus.FAIL
        assert euler.stage == 0
        assert "non_member, separator [-1.0]" in euler.summary
        assert statuses(report, "bellman") == [CheckStatus.FAIL]

    def test_off_policy_subdiff_not_applicable(self):
        """Off-policy states leave the subdifferential check not applicable."""
        report = run("audit", "quadratic.json", "quadratic_perturbed.json", checks=["subdiff"])
        subdiff = [o for o in report.outcomes if o.check == "subdiff"]
        assert subdiff[0].status == CheckStatus.NOT_APPLICABLE
        assert subdiff[0].premise == "policy_point"
        assert subdiff[0].summary == "not applicable (premise policy_point uncertified)"

    def test_two_atom_optimal(self):
        """Euler outcomes are reported per atom."""
        report = run("audit", "two_atom.json", "two_atom_optimal.json", checks=["euler"])
        assert report.exit_code == EXIT_PASS
        atoms = [o.atom for o in report.outcomes if o.check == "euler"]
        assert atoms == ["up", "down", "up", "down"]

    def test_not_adapted(self):
        """A process that is not adapted is rejected before any check runs."""
        report = run("audit", "two_atom.json", "two_atom_not_adapted.json")
        assert report.exit_code == EXIT_INPUT_ERROR
        assert report.error is not None and report.error.startswith("AdaptednessError")
        assert report.outcomes == []

    def test_inadmissible_program(self, tmp_path):
        """A program leaving the feasible set reports its stage."""
        path = tmp_path / "far.json"
        path.write_text(json.dumps({"states": [[0.0], [2.0], [0.0]]}))
        report = execute(
            RunConfig(command="audit", model_path=MODELS / "quadratic.json", program_path=path)
        )
        assert report.exit_code == EXIT_INPUT_ERROR
        assert report.results["inadmissible_stage"] == 0

    def test_program_with_both_sections(self, tmp_path):
        """A program with both states and process is malformed."""
        path = tmp_path / "both.json"
        path.write_text(json.dumps({"states": [[0.0]], "process": [[[0.0], [0.0]]]}))
        report = execute(
            RunConfig(command="audit", model_path=MODELS / "quadratic.json", program_path=path)
        )
        assert report.exit_code == EXIT_INPUT_ERROR


class TestDeterminism:
    def test_same_seed_same_bytes(self):
        """Equal seeds give byte-identical reports."""
        first = run("audit", "quadratic.json", "quadratic_perturbed.json", seed=5).to_json()
        second = run("audit", "quadratic.json", "quadratic_perturbed.json", seed=5).to_json()
        assert first == second

    def test_timing_only_on_request(self):
        """Timing appears only when recording is requested."""
        plain = json.loads(run("validate", "quadratic.json").to_json())
        timed = json.loads(run("validate", "quadratic.json", record_timing=True).to_json())
        assert "timing" not in plain
        assert "validate" in timed["timing"]


class TestNumericalFailures:
    def test_lp_error_fails_the_check(self, monkeypatch):
        """An LP breakdown inside the Euler check is a failed outcome at its stage."""

        def broken(*args, **kwargs):
            raise LPError("Separator fails its check: margin 0.000e+00")

        monkeypatch.setattr("src.nsdp.commands.euler_check", broken)
        report = run("audit", "quadratic.json", "quadratic_optimal.json", checks=["euler"])
        assert report.exit_code == EXIT_CHECK_FAILURE
        assert report.error is None
        euler = [o for o in report.outcomes if o.check == "euler"]
        assert [o.status for o in euler] == [CheckStatus.FAIL, CheckStatus.FAIL]
        assert [o.stage for o in euler] == [0, 1]
        assert euler[0].details["error"] == "LPError"
        assert euler[0].summary.startswith("numerical failure")

    def test_ill_conditioned_solve(self, monkeypatch):
        """An ill-conditioned solve is reported as a failed numerics check."""

        def broken(*args, **kwargs):
            raise IllConditionedError("Generator norm 1.000e+13 exceeds 1e12")

        monkeypatch.setattr("src.nsdp.commands.solve_value", broken)
        report = run("solve", "quadratic.json")
        assert report.exit_code == EXIT_CHECK_FAILURE
        assert statuses(report, "numerics") == [CheckStatus.FAIL]
        assert "IllConditionedError" in report.failures[0].summary
