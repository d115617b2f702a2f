"""Acceptance suite: end-to-end performance and property criteria.

Each test prints exactly one ACCEPTANCE PASS/FAIL line for its criterion
(echoed again in the terminal summary), then asserts it. Trained runs
come from the .acceptance_cache fixtures; delete that directory to
retrain from scratch.
"""

import time

import pytest

import acceptance_support as support
import checks
from courtforge.evaluation import defensive_bias_report, evaluate

FULL_RUN_LIMIT_S = 2 * 3600.0
SMOKE_RUN_LIMIT_S = 8 * 60.0
ABLATION_LIMIT_S = 4 * 3600.0
PROPERTY_SUITE_LIMIT_S = 60.0

EVAL_SKILL = 0.50
EVAL_MATCHES = 100


def _fmt_elapsed(seconds) -> str:
    return "unrecorded" if seconds is None else f"{seconds:.0f}s"


@pytest.fixture(scope="module")
def dueling_eval(dueling_run):
    return evaluate(
        dueling_run.agent, EVAL_SKILL, EVAL_MATCHES, seed=support.ACCEPTANCE_SEED
    )


@pytest.fixture(scope="module")
def vanilla_eval(vanilla_run):
    return evaluate(
        vanilla_run.agent, EVAL_SKILL, EVAL_MATCHES, seed=support.ACCEPTANCE_SEED
    )


@pytest.mark.slow
def test_criterion_1_curriculum_run_win_rate(dueling_run, dueling_eval):
    within_time = dueling_run.elapsed is not None and dueling_run.elapsed <= FULL_RUN_LIMIT_S
    passed = dueling_eval.win_rate >= 0.90 and within_time
    line = support.record_acceptance(
        "criterion 1 (full curriculum run)",
        passed,
        f"win rate {dueling_eval.win_rate:.3f} over {EVAL_MATCHES} greedy matches at "
        f"skill {EVAL_SKILL:.2f} (need >= 0.90); training wall time "
        f"{_fmt_elapsed(dueling_run.elapsed)} (limit {FULL_RUN_LIMIT_S:.0f}s)",
    )
    assert passed, line


@pytest.mark.slow
def test_criterion_2_smoke_run_learning(smoke_run):
    final_wins = [row.win for row in smoke_run.rows[-50:]]
    rate = sum(final_wins) / len(final_wins)
    within_time = smoke_run.elapsed is not None and smoke_run.elapsed <= SMOKE_RUN_LIMIT_S
    passed = len(final_wins) == 50 and rate >= 0.60 and within_time
    line = support.record_acceptance(
        "criterion 2 (fixed-difficulty smoke run)",
        passed,
        f"win rate {rate:.3f} over the final 50 of {len(smoke_run.rows)} episodes at "
        f"skill 0.40 (need >= 0.60); training wall time "
        f"{_fmt_elapsed(smoke_run.elapsed)} (limit {SMOKE_RUN_LIMIT_S:.0f}s)",
    )
    assert passed, line


@pytest.mark.slow
def test_criterion_3_dueling_vs_vanilla_gap(
    dueling_run, vanilla_run, dueling_eval, vanilla_eval
):
    gap = dueling_eval.win_rate - vanilla_eval.win_rate
    total_elapsed = None
    if dueling_run.elapsed is not None and vanilla_run.elapsed is not None:
        total_elapsed = dueling_run.elapsed + vanilla_run.elapsed
    within_time = total_elapsed is not None and total_elapsed <= ABLATION_LIMIT_S
    passed = gap >= 0.30 and within_time
    line = support.record_acceptance(
        "criterion 3 (architecture ablation gap)",
        passed,
        f"dueling {dueling_eval.win_rate:.3f} vs vanilla {vanilla_eval.win_rate:.3f} at "
        f"skill {EVAL_SKILL:.2f}, gap {gap:+.3f} (need >= +0.300); combined training "
        f"wall time {_fmt_elapsed(total_elapsed)} (limit {ABLATION_LIMIT_S:.0f}s)",
    )
    assert passed, line


@pytest.mark.slow
def test_criterion_4_difficulty_shapes_matches(dueling_sweep):
    by_skill = {report.skill: report for report in dueling_sweep.reports}
    low, high = by_skill[0.35], by_skill[0.55]
    lengths_ordered = high.length_mean > low.length_mean
    serve_ok = all(
        report.serve_win_pct is not None and 0.55 <= report.serve_win_pct <= 0.80
        for report in dueling_sweep.reports
    )
    serve_text = ", ".join(
        f"{report.skill:.2f}:{report.serve_win_pct:.3f}" for report in dueling_sweep.reports
    )
    passed = lengths_ordered and serve_ok
    line = support.record_acceptance(
        "criterion 4 (difficulty shapes match statistics)",
        passed,
        f"mean length {high.length_mean:.1f} at 0.55 vs {low.length_mean:.1f} at 0.35 "
        f"(need strictly longer); serve point win by skill [{serve_text}] "
        f"(need each in [0.55, 0.80])",
    )
    assert passed, line


def test_criterion_5_property_suites():
    suite = [
        ("scoring equivalence x10000", lambda: checks.check_scoring_equivalence(10000)),
        ("golden outcome tables", checks.check_golden_tables),
        ("outcome simplex x100000", lambda: checks.check_outcome_simplex(100000)),
        ("skill monotonicity", checks.check_skill_monotonicity),
        ("dueling aggregation identities", checks.check_dueling_identities),
        ("bootstrap target identities", checks.check_target_identities),
        ("gradient finite differences", lambda: checks.check_gradient_finite_difference()),
        ("exploration decay curve", checks.check_epsilon_schedule),
        ("masked selection x1000000", lambda: checks.check_masked_selection(1_000_000)),
        ("checkpoint roundtrip", lambda: checks.check_agent_checkpoint_roundtrip()),
        ("training determinism", lambda: checks.check_training_determinism()),
    ]
    started = time.perf_counter()
    for _, run_check in suite:
        run_check()
    elapsed = time.perf_counter() - started
    passed = elapsed < PROPERTY_SUITE_LIMIT_S
    line = support.record_acceptance(
        "criterion 5 (property suites)",
        passed,
        f"{len(suite)} property suites passed in {elapsed:.1f}s "
        f"(limit {PROPERTY_SUITE_LIMIT_S:.0f}s)",
    )
    assert passed, line


@pytest.mark.slow
def test_criterion_6_defensive_bias_report(dueling_sweep):
    def fmt(value, signed=False):
        if value is None:
            return "n/a"
        return f"{value:+.3f}" if signed else f"{value:.3f}"

    bias = defensive_bias_report(dueling_sweep.reports)
    expected_keys = ["0.35", "0.40", "0.45", "0.50", "0.55"]
    structural = sorted(bias) == expected_keys
    details = []
    for key in sorted(bias):
        entry = bias[key]
        block = entry["return_block_share"]
        lob = entry["defensive_lob_share"]
        structural = structural and block is not None and 0.0 <= block <= 1.0
        structural = structural and lob is not None and 0.0 <= lob <= 1.0
        structural = structural and entry["reference_return_block_share"] is not None
        structural = structural and entry["reference_defensive_lob_share"] is not None
        details.append(
            f"{key}: block {fmt(block)} (ref {fmt(entry['reference_return_block_share'])}, "
            f"delta {fmt(entry['return_block_delta'], signed=True)}), "
            f"lob {fmt(lob)} (ref {fmt(entry['reference_defensive_lob_share'])}, "
            f"delta {fmt(entry['defensive_lob_delta'], signed=True)})"
        )
    # Shares and references must exist at every skill; the deltas themselves
    # are informational and deliberately not judged.
    line = support.record_acceptance(
        "criterion 6 (defensive play share report)",
        structural,
        "; ".join(details),
    )
    assert structural, line
