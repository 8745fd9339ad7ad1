from .suites import CHECKS, run_check, run_checks
