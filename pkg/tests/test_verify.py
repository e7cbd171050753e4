from lndmv import verify


def test_checks_pass_and_report_deviations():
    report = verify.run_checks(n_cases=30, grad_samples=200)
    assert report.passed
    text = report.to_text()
    assert "inside vs enumeration" in text and "backprop vs finite differences" in text


def test_injected_fault_fails():
    report = verify.run_checks(n_cases=3, inject_fault=True, grad_samples=50)
    assert not report.passed
    assert [c.passed for c in report.checks][-1] is False
