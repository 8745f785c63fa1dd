"""Check every golden expectation stored in the corpus files.

Exit status is 1 if any check fails.
"""
import sys

from likefair.corpus import NAMES, load_raw, run_golden


def main():
    failed = 0
    for name in NAMES:
        for res in run_golden(load_raw(name)):
            mark = "ok  " if res.passed else "FAIL"
            print(f"{mark} {name:6s} {res.check['op']:22s} {res.actual}")
            failed += not res.passed
    print(f"{failed} failing check(s)")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
