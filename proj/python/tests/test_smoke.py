import math

import ttseval


def test_extract_and_grade():
    assert ttseval.extract_boxed(r"so \boxed{\frac{1}{2}} then \boxed{3}") == "3"
    assert ttseval.extract_boxed("no box") is None
    assert ttseval.grade(r"thus \boxed{0.5}", "1/2") == "correct"
    assert ttseval.grade("nothing", "1/2") == "no_answer"
    assert ttseval.grade(r"\boxed{(B)}", "B", "multiple_choice", ["x", "y"]) == "correct"


def test_normalize_and_equivalent():
    assert ttseval.normalize("2/4") == ("rational", r"\frac{1}{2}")
    assert ttseval.normalize("  ") is None
    assert ttseval.equivalent("0.5", r"\dfrac{1}{2}")
    assert not ttseval.equivalent("0.33", "1/2")


def test_aggregators():
    answers = ["1", "1", "1", "2", "2"]
    tokens = [8000, 8000, 8000, 100, 100]
    assert ttseval.aggregate("mv", answers, tokens) == "1"
    assert ttseval.aggregate("smv", answers, tokens) == "2"
    assert ttseval.aggregate("shortest", [None, "3", "4"], [1, 50, 40]) == "4"
    assert ttseval.aggregate("mv", [None], [5]) is None
    assert math.isclose(ttseval.smv_score(2, 8.0, 2.0), 2 / 3)


def test_analytic_accuracy():
    assert math.isclose(ttseval.analytic_accuracy(0.45, 0.05, 0.10, steps=200), 1 / 3, abs_tol=1e-9)
    assert ttseval.analytic_accuracy(0.45, 0.0, 0.0, steps=5) == 0.45


def test_simulate_and_cli(tmp_path):
    ttseval.simulate_run(str(tmp_path), "s", {"p_initial_correct": 0.6}, n_questions=20, k=4, steps=3, seed=2)
    run = ttseval.load_run(str(tmp_path), "s")
    assert run["manifest"]["sealed"]
    assert len(run["records"]) == 80
    assert run["questions"][0]["id"] == "sim-000000"

    code, out, err = ttseval.cli(["--runs-dir", str(tmp_path), "revise", "--run", "s", "--steps", "3"])
    assert code == 0, err
    code, out, err = ttseval.cli(["--runs-dir", str(tmp_path), "aggregate", "--run", "s", "--solutions", "2"])
    assert code == 0, err
    assert "smv" in out
    code, _, err = ttseval.cli(["--runs-dir", str(tmp_path), "analyze", "--run", "s", "--analysis", "nope"])
    assert code == 2
    assert "rank-groups" in err
